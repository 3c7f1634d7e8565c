#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace robophoto {

/// 8-bit grayscale raster, row-major, origin top-left.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const GrayImage&) const = default;
};

/// Reads a binary (P5) PGM with maxval 255.
GrayImage read_pgm(std::istream& in);
GrayImage read_pgm(const std::filesystem::path& path);

/// Writes a binary (P5) PGM; the header is "P5\n<w> <h>\n255\n".
void write_pgm(std::ostream& out, const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace robophoto
