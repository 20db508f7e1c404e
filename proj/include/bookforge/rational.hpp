#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "bookforge/error.hpp"

namespace bookforge {

/// Non-negative exact fraction; always stored reduced with den > 0.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational of(std::int64_t num, std::int64_t den) {
        if (den <= 0 || num < 0) throw Error(ErrorCode::InvalidArgument, "rational must be non-negative with positive denominator");
        const auto g = std::gcd(num, den);
        return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool positive() const { return num > 0; }

    bool operator==(const Rational&) const = default;
};

}  // namespace bookforge
