#include "robophoto/image.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "robophoto/errors.hpp"

namespace robophoto {

namespace {

void skip_space_and_comments(std::istream& in) {
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

int read_header_int(std::istream& in) {
    skip_space_and_comments(in);
    int value = -1;
    if (!(in >> value)) throw ParseError("pgm: bad header");
    return value;
}

}  // namespace

GrayImage read_pgm(std::istream& in) {
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5') throw ParseError("pgm: expected P5 magic");
    const int w = read_header_int(in);
    const int h = read_header_int(in);
    const int maxval = read_header_int(in);
    if (w <= 0 || h <= 0) throw ParseError("pgm: non-positive dimensions");
    if (maxval != 255) throw ParseError("pgm: only 8-bit (maxval 255) images are supported");
    in.get();  // single whitespace before raster
    GrayImage image(w, h);
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) throw ParseError("pgm: truncated raster");
    return image;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_pgm(in);
}

void write_pgm(std::ostream& out, const GrayImage& image) {
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_pgm(out, image);
}

}  // namespace robophoto
