#include "bookforge/media.hpp"

#include "bookforge/error.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace bookforge {

namespace {

constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u16(std::string& out, std::uint16_t v) {
    out += static_cast<char>(v & 0xff);
    out += static_cast<char>(v >> 8);
}

void put_u32_be(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
    if (at + 4 > bytes.size()) throw Error(ErrorCode::InvalidArgument, "truncated binary data");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]);
    return v;
}

std::uint16_t get_u16(std::string_view bytes, std::size_t at) {
    if (at + 2 > bytes.size()) throw Error(ErrorCode::InvalidArgument, "truncated binary data");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[at]) |
                                      (static_cast<unsigned char>(bytes[at + 1]) << 8));
}

float get_f32(std::string_view bytes, std::size_t at) {
    const std::uint32_t bits = get_u32(bytes, at);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
}

}  // namespace

std::string make_box_glb(float sx, float sy, float sz) {
    const float hx = sx / 2, hy = sy / 2, hz = sz / 2;
    const std::array<std::array<float, 3>, 8> corners{{{-hx, -hy, -hz}, {hx, -hy, -hz}, {hx, hy, -hz}, {-hx, hy, -hz},
                                                       {-hx, -hy, hz},  {hx, -hy, hz},  {hx, hy, hz},  {-hx, hy, hz}}};
    const std::array<std::uint16_t, 36> indices{0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4,
                                                2, 3, 7, 2, 7, 6, 1, 2, 6, 1, 6, 5, 0, 4, 7, 0, 7, 3};
    std::string bin;
    for (const auto& c : corners) {
        for (float f : c) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof bits);
            put_u32(bin, bits);
        }
    }
    const std::size_t index_offset = bin.size();
    for (auto i : indices) put_u16(bin, i);
    while (bin.size() % 4) bin += '\0';

    nlohmann::json gltf = {
        {"asset", {{"version", "2.0"}, {"generator", "bookforge"}}},
        {"scene", 0},
        {"scenes", {{{"nodes", {0}}}}},
        {"nodes", {{{"mesh", 0}}}},
        {"meshes", {{{"primitives", {{{"attributes", {{"POSITION", 0}}}, {"indices", 1}}}}}}},
        {"buffers", {{{"byteLength", bin.size()}}}},
        {"bufferViews",
         {{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", index_offset}, {"target", 34962}},
          {{"buffer", 0}, {"byteOffset", index_offset}, {"byteLength", indices.size() * 2}, {"target", 34963}}}},
        {"accessors",
         {{{"bufferView", 0}, {"componentType", 5126}, {"count", corners.size()}, {"type", "VEC3"},
           {"min", {-hx, -hy, -hz}}, {"max", {hx, hy, hz}}},
          {{"bufferView", 1}, {"componentType", 5123}, {"count", indices.size()}, {"type", "SCALAR"}}}},
    };
    std::string json_chunk = gltf.dump();
    while (json_chunk.size() % 4) json_chunk += ' ';

    std::string out;
    put_u32(out, kGlbMagic);
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(12 + 8 + json_chunk.size() + 8 + bin.size()));
    put_u32(out, static_cast<std::uint32_t>(json_chunk.size()));
    put_u32(out, kChunkJson);
    out += json_chunk;
    put_u32(out, static_cast<std::uint32_t>(bin.size()));
    put_u32(out, kChunkBin);
    out += bin;
    return out;
}

Mesh parse_glb(std::string_view glb) {
    if (get_u32(glb, 0) != kGlbMagic) throw Error(ErrorCode::InvalidArgument, "not a binary glTF");
    const std::uint32_t json_length = get_u32(glb, 12);
    if (get_u32(glb, 16) != kChunkJson || 20 + json_length > glb.size()) {
        throw Error(ErrorCode::InvalidArgument, "glTF JSON chunk missing");
    }
    const auto gltf = nlohmann::json::parse(glb.substr(20, json_length), nullptr, false);
    if (gltf.is_discarded()) throw Error(ErrorCode::InvalidArgument, "glTF JSON chunk is invalid");
    const std::size_t bin_header = 20 + json_length;
    if (get_u32(glb, bin_header + 4) != kChunkBin) throw Error(ErrorCode::InvalidArgument, "glTF BIN chunk missing");
    const std::string_view bin = glb.substr(bin_header + 8, get_u32(glb, bin_header));

    Mesh mesh;
    try {
        const auto& primitive = gltf.at("meshes").at(0).at("primitives").at(0);
        auto accessor_data = [&](std::size_t index, std::size_t& count, int& component) {
            const auto& accessor = gltf.at("accessors").at(index);
            const auto& view = gltf.at("bufferViews").at(accessor.at("bufferView").get<std::size_t>());
            count = accessor.at("count").get<std::size_t>();
            component = accessor.at("componentType").get<int>();
            return view.value("byteOffset", std::size_t{0}) + accessor.value("byteOffset", std::size_t{0});
        };
        std::size_t count = 0;
        int component = 0;
        std::size_t offset = accessor_data(primitive.at("attributes").at("POSITION").get<std::size_t>(), count, component);
        if (component != 5126) throw Error(ErrorCode::InvalidArgument, "positions must be float");
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t at = offset + i * 12;
            mesh.positions.push_back({get_f32(bin, at), get_f32(bin, at + 4), get_f32(bin, at + 8)});
        }
        if (primitive.contains("indices")) {
            offset = accessor_data(primitive.at("indices").get<std::size_t>(), count, component);
            for (std::size_t i = 0; i < count; ++i) {
                switch (component) {
                    case 5121:
                        if (offset + i >= bin.size()) throw Error(ErrorCode::InvalidArgument, "truncated indices");
                        mesh.indices.push_back(static_cast<unsigned char>(bin[offset + i]));
                        break;
                    case 5123: mesh.indices.push_back(get_u16(bin, offset + i * 2)); break;
                    case 5125: mesh.indices.push_back(get_u32(bin, offset + i * 4)); break;
                    default: throw Error(ErrorCode::InvalidArgument, "unsupported index type");
                }
            }
        } else {
            for (std::uint32_t i = 0; i < mesh.positions.size(); ++i) mesh.indices.push_back(i);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("glTF structure: ") + e.what());
    }
    for (auto i : mesh.indices) {
        if (i >= mesh.positions.size()) throw Error(ErrorCode::InvalidArgument, "index out of range");
    }
    return mesh;
}

std::string encode_png_rgb(int width, int height, std::string_view rgb) {
    if (width <= 0 || height <= 0 || rgb.size() != static_cast<std::size_t>(width) * height * 3) {
        throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match image size");
    }
    std::string raw;
    raw.reserve(rgb.size() + static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        raw += '\0';
        raw.append(rgb.substr(static_cast<std::size_t>(y) * width * 3, static_cast<std::size_t>(width) * 3));
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw Error(ErrorCode::Io, "PNG compression failed");
    }
    packed.resize(packed_size);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    auto chunk = [&](const char* type, std::string_view data) {
        put_u32_be(out, static_cast<std::uint32_t>(data.size()));
        std::string body(type, 4);
        body += data;
        out += body;
        put_u32_be(out, static_cast<std::uint32_t>(
                            crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
    };
    std::string header;
    put_u32_be(header, static_cast<std::uint32_t>(width));
    put_u32_be(header, static_cast<std::uint32_t>(height));
    header += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
    chunk("IHDR", header);
    chunk("IDAT", packed);
    chunk("IEND", {});
    return out;
}

bool is_png(std::string_view bytes) {
    return bytes.size() > 24 && bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8) &&
           bytes.substr(12, 4) == "IHDR";
}

std::string render_frontal_view(const Mesh& mesh, int size) {
    std::string pixels(static_cast<std::size_t>(size) * size * 3, static_cast<char>(255));
    if (mesh.positions.empty() || mesh.indices.size() < 3) return encode_png_rgb(size, size, pixels);

    float min_x = std::numeric_limits<float>::max(), min_y = min_x;
    float max_x = std::numeric_limits<float>::lowest(), max_y = max_x;
    for (const auto& p : mesh.positions) {
        min_x = std::min(min_x, p[0]);
        max_x = std::max(max_x, p[0]);
        min_y = std::min(min_y, p[1]);
        max_y = std::max(max_y, p[1]);
    }
    const float extent = std::max({max_x - min_x, max_y - min_y, 1e-6f});
    const float scale = 0.9f * static_cast<float>(size) / extent;
    const float cx = (min_x + max_x) / 2, cy = (min_y + max_y) / 2;
    auto to_screen = [&](const std::array<float, 3>& p) {
        return std::array<float, 3>{(p[0] - cx) * scale + size / 2.0f, (cy - p[1]) * scale + size / 2.0f, p[2]};
    };

    std::vector<float> depth(static_cast<std::size_t>(size) * size, std::numeric_limits<float>::lowest());
    for (std::size_t t = 0; t + 2 < mesh.indices.size(); t += 3) {
        const auto& a3 = mesh.positions[mesh.indices[t]];
        const auto& b3 = mesh.positions[mesh.indices[t + 1]];
        const auto& c3 = mesh.positions[mesh.indices[t + 2]];
        const std::array<float, 3> u{b3[0] - a3[0], b3[1] - a3[1], b3[2] - a3[2]};
        const std::array<float, 3> v{c3[0] - a3[0], c3[1] - a3[1], c3[2] - a3[2]};
        const std::array<float, 3> n{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
        const float length = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        if (length == 0) continue;
        const auto shade = static_cast<unsigned char>(60 + 160 * std::fabs(n[2] / length));

        const auto a = to_screen(a3), b = to_screen(b3), c = to_screen(c3);
        const float area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if (std::fabs(area) < 1e-12f) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a[0], b[0], c[0]}))));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({a[0], b[0], c[0]}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a[1], b[1], c[1]}))));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({a[1], b[1], c[1]}))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const float px = x + 0.5f, py = y + 0.5f;
                const float w0 = ((b[0] - px) * (c[1] - py) - (b[1] - py) * (c[0] - px)) / area;
                const float w1 = ((c[0] - px) * (a[1] - py) - (c[1] - py) * (a[0] - px)) / area;
                const float w2 = 1 - w0 - w1;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const float z = w0 * a[2] + w1 * b[2] + w2 * c[2];
                const std::size_t at = static_cast<std::size_t>(y) * size + x;
                if (z <= depth[at]) continue;
                depth[at] = z;
                pixels[at * 3] = pixels[at * 3 + 1] = pixels[at * 3 + 2] = static_cast<char>(shade);
            }
        }
    }
    return encode_png_rgb(size, size, pixels);
}

std::string make_silent_wav(std::uint32_t sample_count, std::uint32_t sample_rate) {
    std::string out = "RIFF";
    put_u32(out, 36 + sample_count);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, sample_rate);
    put_u32(out, sample_rate);  // byte rate
    put_u16(out, 1);            // block align
    put_u16(out, 8);            // bits per sample
    out += "data";
    put_u32(out, sample_count);
    out.append(sample_count, static_cast<char>(0x80));
    return out;
}

Rational wav_duration_seconds(std::string_view wav) {
    if (wav.size() < 12 || wav.substr(0, 4) != "RIFF" || wav.substr(8, 4) != "WAVE") {
        throw Error(ErrorCode::InvalidArgument, "audio is not a RIFF/WAVE container");
    }
    std::uint32_t byte_rate = 0;
    std::size_t at = 12;
    while (at + 8 <= wav.size()) {
        const std::string_view id = wav.substr(at, 4);
        const std::uint32_t length = get_u32(wav, at + 4);
        if (id == "fmt ") {
            byte_rate = get_u32(wav, at + 16);
        } else if (id == "data") {
            if (byte_rate == 0) throw Error(ErrorCode::InvalidArgument, "WAVE data chunk precedes a valid fmt chunk");
            const std::size_t available = std::min<std::size_t>(length, wav.size() - at - 8);
            return Rational::of(static_cast<std::int64_t>(available), byte_rate);
        }
        at += 8 + length + (length & 1);
    }
    throw Error(ErrorCode::InvalidArgument, "WAVE container has no data chunk");
}

}  // namespace bookforge
