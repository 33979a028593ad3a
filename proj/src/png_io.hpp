#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nucsel::detail {

// Raw PNG samples, no color conversion. Palette and sub-byte grayscale are
// expanded to 8 bits; 16-bit samples are kept as-is.
struct RawPng {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
    int bit_depth = 0;  // 8 or 16
    std::vector<std::uint16_t> samples;  // row-major, interleaved
};

RawPng read_png(const std::filesystem::path& path);

// Writes 8-bit (samples < 256) or 16-bit PNG; channels 1 or 3.
void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
               const std::vector<std::uint16_t>& samples);

}  // namespace nucsel::detail
