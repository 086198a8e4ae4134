#include "cm3/pgm.hpp"

#include <cctype>
#include <string>

#include "cm3/error.hpp"
#include "cm3/io.hpp"

namespace cm3 {

namespace {

// Next whitespace-separated header field, skipping '#' comments.
std::string next_field(std::istream& in, const std::string& path) {
    std::string field;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!field.empty())
                return field;
            continue;
        }
        field.push_back(static_cast<char>(c));
    }
    if (field.empty())
        throw IoError("truncated PGM header in " + path);
    return field;
}

std::size_t parse_dim(const std::string& field, const std::string& path) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(field, &pos);
    } catch (const std::exception&) {
        throw IoError("bad PGM header field '" + field + "' in " + path);
    }
    if (pos != field.size() || v == 0)
        throw IoError("bad PGM header field '" + field + "' in " + path);
    return v;
}

} // namespace

GrayImage read_pgm(const std::string& path) {
    auto in = open_input(path);
    if (next_field(in, path) != "P5")
        throw IoError(path + " is not a binary PGM (P5) file");
    GrayImage img;
    img.width = parse_dim(next_field(in, path), path);
    img.height = parse_dim(next_field(in, path), path);
    const std::size_t maxval = parse_dim(next_field(in, path), path);
    if (maxval != 255)
        throw IoError("unsupported PGM maxval " + std::to_string(maxval) + " in " + path);
    img.pixels.resize(img.width * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in)
        throw IoError("truncated pixel data in " + path);
    return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height)
        throw ShapeError("image dimensions do not match the pixel buffer");
    auto out = open_output(path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out)
        throw IoError("failed writing " + path);
}

} // namespace cm3
