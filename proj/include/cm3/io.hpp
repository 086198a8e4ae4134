#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

namespace cm3 {

// Little-endian binary primitives shared by the codebook, memory bank and
// n-gram file formats.
void write_u32(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32(std::istream& in, const std::string& what);
void write_f32(std::ostream& out, float v);
float read_f32(std::istream& in, const std::string& what);
void write_magic(std::ostream& out, std::string_view magic);
void expect_magic(std::istream& in, std::string_view magic, const std::string& path);

std::ofstream open_output(const std::string& path, bool binary = true);
std::ifstream open_input(const std::string& path, bool binary = true);

} // namespace cm3
