#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bookforge/error.hpp"
#include "bookforge/forge.hpp"
#include "bookforge/gate.hpp"
#include "bookforge/ingest.hpp"
#include "bookforge/layout.hpp"

namespace py = pybind11;
using namespace bookforge;

namespace {

std::vector<KeywordOccurrence> at_positions(const std::vector<std::size_t>& positions) {
    std::vector<KeywordOccurrence> out;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        KeywordOccurrence occ;
        occ.keyword = "k" + std::to_string(i);
        occ.global_position = positions[i];
        out.push_back(occ);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core algorithms of the bookforge pipeline";

    py::handle error_type = PyErr_NewException("bookforge._core.BookforgeError", PyExc_ValueError, nullptr);
    m.attr("BookforgeError") = error_type;
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object type = py::module_::import("bookforge._core").attr("BookforgeError");
            py::object instance = type(e.what());
            instance.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(type.ptr(), instance.ptr());
        }
    });

    m.def(
        "segment_words",
        [](const std::string& body, const std::string& language) {
            py::list out;
            for (const auto& w : segment_words(body, language)) out.append(py::make_tuple(w.surface, w.byte_start, w.byte_end));
            return out;
        },
        py::arg("body"), py::arg("language") = "en", "Words as (text, byte_start, byte_end).");

    m.def(
        "locate_occurrences",
        [](const std::string& body, const std::vector<std::string>& keywords, const std::string& language) {
            const auto doc = make_document("py", "py", body, language);
            std::vector<Keyword> wanted;
            for (const auto& k : keywords) wanted.push_back({k, EntityKind::Object});
            const auto result = locate_occurrences(doc, wanted);
            py::dict found;
            for (const auto& occ : result.occurrences) {
                found[py::str(occ.keyword)] = py::make_tuple(occ.global_position, std::string(to_string(occ.match)));
            }
            return py::make_tuple(found, result.misses);
        },
        py::arg("body"), py::arg("keywords"), py::arg("language") = "en",
        "First mention of each keyword: ({keyword: (word_index, match)}, misses).");

    m.def(
        "classify",
        [](double score, double threshold) {
            GateConfig config;
            config.threshold = threshold;
            config.validate();
            return std::string(to_string(classify(score, config)));
        },
        py::arg("score"), py::arg("threshold") = 0.7);

    m.def(
        "evaluate_thresholds",
        [](const std::vector<std::tuple<std::string, double, bool>>& pairs, const std::vector<double>& thresholds) {
            std::vector<LabeledPair> labeled;
            for (const auto& [keyword, score, plausible] : pairs) labeled.push_back({keyword, score, plausible});
            py::list out;
            for (const auto& row : evaluate_thresholds(labeled, thresholds)) {
                py::dict d;
                d["threshold"] = row.threshold;
                d["proportion"] = row.proportion_plausible ? py::cast(*row.proportion_plausible) : py::none();
                d["count"] = row.count;
                d["plausible"] = row.plausible;
                out.append(d);
            }
            return out;
        },
        py::arg("pairs"), py::arg("thresholds") = std::vector<double>{0.9, 0.8, 0.7, 0.6});

    m.def(
        "divide_pages",
        [](const std::vector<std::size_t>& positions, std::size_t total_words) {
            py::list out;
            for (const auto& page : divide_pages(at_positions(positions), total_words)) {
                std::vector<std::size_t> held;
                for (const auto& occ : page.occurrences) held.push_back(occ.global_position);
                out.append(py::make_tuple(page.start_word, page.end_word, held));
            }
            return out;
        },
        py::arg("positions"), py::arg("total_words"), "Pages as (start_word, end_word, positions).");

    m.def(
        "popup_seconds",
        [](std::int64_t words_before, std::int64_t rate_num, std::int64_t rate_den) {
            return popup_seconds(words_before, Rational::of(rate_num, rate_den));
        },
        py::arg("words_before"), py::arg("rate_num"), py::arg("rate_den") = 1,
        "ceil(words_before * 5 / rate) for rate = rate_num / rate_den words per five seconds.");

    m.def("eta_model", [] {
        const auto eta = default_eta_model();
        return py::make_tuple(eta.base_seconds, eta.per_model_seconds);
    });
    m.def(
        "estimate_generation_seconds",
        [](int model_count) { return estimate_generation_seconds(model_count, default_eta_model()); },
        py::arg("model_count"));
    m.def("generation_time_table", [] {
        py::list out;
        for (const auto& row : generation_time_table()) {
            out.append(py::make_tuple(row.title, row.word_count, row.seconds, row.model_count));
        }
        return out;
    });
}
