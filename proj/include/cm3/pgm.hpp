#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cm3 {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major
};

// Binary PGM (P5), maxval 255. The reader accepts '#' comments in the header.
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

} // namespace cm3
