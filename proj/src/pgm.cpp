#include "orbit/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace orbit {

namespace {

void write_p5(const std::filesystem::path& path, int h, int w,
              const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

int next_token(std::istream& in) {
    // PGM headers allow '#' comments between tokens.
    while (true) {
        int ch = in.peek();
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    return value;
}

std::vector<unsigned char> read_p5(const std::filesystem::path& path, int& h, int& w) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM: " + path.string());
    w = next_token(in);
    h = next_token(in);
    const int maxval = next_token(in);
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw std::runtime_error("unsupported PGM header: " + path.string());
    }
    in.get();  // single whitespace before raster
    std::vector<unsigned char> bytes(static_cast<size_t>(h) * w);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw std::runtime_error("truncated PGM raster: " + path.string());
    }
    return bytes;
}

}  // namespace

void write_image_pgm(const std::filesystem::path& path, const Image& image) {
    std::vector<unsigned char> bytes(image.size());
    for (size_t i = 0; i < image.data.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(std::lround(image.data[i] * 255.0));
    }
    write_p5(path, image.h, image.w, bytes);
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
    std::vector<unsigned char> bytes(mask.data.begin(), mask.data.end());
    write_p5(path, mask.h, mask.w, bytes);
}

Image read_image_pgm(const std::filesystem::path& path) {
    int h = 0, w = 0;
    const auto bytes = read_p5(path, h, w);
    Image image(h, w);
    for (size_t i = 0; i < bytes.size(); ++i) image.data[i] = bytes[i] / 255.0;
    return image;
}

Mask read_mask_pgm(const std::filesystem::path& path) {
    int h = 0, w = 0;
    const auto bytes = read_p5(path, h, w);
    Mask mask(h, w);
    for (size_t i = 0; i < bytes.size(); ++i) mask.data[i] = bytes[i];
    return mask;
}

}  // namespace orbit
