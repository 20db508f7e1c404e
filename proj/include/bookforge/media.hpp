#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bookforge/rational.hpp"

namespace bookforge {

struct Mesh {
    std::vector<std::array<float, 3>> positions;
    std::vector<std::uint32_t> indices;  // triangle list
};

/// Axis-aligned box as a single-mesh binary glTF.
std::string make_box_glb(float size_x, float size_y, float size_z);

/// Reads the first primitive of the first mesh (float VEC3 positions and
/// optional u8/u16/u32 indices). Throws InvalidArgument on anything else.
Mesh parse_glb(std::string_view glb);

std::string encode_png_rgb(int width, int height, std::string_view rgb);
bool is_png(std::string_view bytes);

/// Orthographic render looking down -Z from the +Z side, framed on the mesh's
/// XY bounding box, flat-shaded grey on white.
std::string render_frontal_view(const Mesh& mesh, int size = 256);

/// 8-bit mono PCM WAV of silence.
std::string make_silent_wav(std::uint32_t sample_count, std::uint32_t sample_rate = 8000);

/// Exact duration from the RIFF header: data bytes / byte rate. Throws
/// InvalidArgument if the container cannot be read.
Rational wav_duration_seconds(std::string_view wav);

}  // namespace bookforge
