#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dualline {

// Minimal deterministic PNG writer (8-bit gray or RGB, stored deflate
// blocks, filter 0). Output bytes depend only on the pixel payload, which
// is what makes artifact diffs byte-exact.
void write_png_gray8(const std::string& path, std::size_t width, std::size_t height,
                     std::span<const std::uint8_t> pixels);
void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels);

struct PngImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

// Reads the subset of PNG emitted by the writers above.
PngImage read_png8(const std::string& path);

// The documented sample mapping: clamp(round-half-up(127.5*(v/vmax)+127.5),
// 0, 255); vmax == 0 maps everything to mid-gray 128.
std::uint8_t affine_byte(double v, double vmax);

}  // namespace dualline
