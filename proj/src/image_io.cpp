#include "hlstm/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hlstm/errors.hpp"

namespace hlstm {

namespace {

struct Header {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t maxval = 0;
};

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path, "cannot open for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError(path, "cannot open for writing");
    return out;
}

// Reads one header integer, skipping whitespace and '#' comments.
std::size_t header_int(std::istream& in, const std::string& path) {
    int c = in.get();
    while (in) {
        if (c == '#') {
            while (in && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (!in || !std::isdigit(c)) throw FormatError(path + ": malformed header");
    std::size_t v = 0;
    while (in && std::isdigit(c)) {
        v = v * 10 + static_cast<std::size_t>(c - '0');
        if (v > (1u << 30)) throw FormatError(path + ": header value out of range");
        c = in.get();
    }
    // Exactly one whitespace byte separates the header from the raster.
    if (!std::isspace(c)) throw FormatError(path + ": malformed header");
    return v;
}

Header read_header(std::istream& in, const std::string& path, const char* magic) {
    char m[2] = {0, 0};
    in.read(m, 2);
    if (!in || m[0] != magic[0] || m[1] != magic[1]) {
        throw FormatError(path + ": expected a binary " + std::string(magic) + " file");
    }
    Header h;
    h.width = header_int(in, path);
    h.height = header_int(in, path);
    h.maxval = header_int(in, path);
    if (h.width == 0 || h.height == 0) throw FormatError(path + ": empty raster");
    if (h.maxval == 0 || h.maxval > 65535) throw FormatError(path + ": maxval must be in [1, 65535]");
    return h;
}

std::vector<unsigned char> read_raster(std::istream& in, const std::string& path, std::size_t bytes) {
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) throw FormatError(path + ": truncated raster");
    return buf;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw FileError(path, "write failed");
}

}  // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream in = open_in(path);
    const Header h = read_header(in, path, "P6");
    if (h.maxval != 255) throw FormatError(path + ": only 8-bit PPM is supported");
    const std::vector<unsigned char> buf = read_raster(in, path, 3 * h.width * h.height);
    Tensor image({3, h.height, h.width});
    const std::size_t n = h.width * h.height;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) image[c * n + i] = buf[3 * i + c] / 255.0;
    }
    return image;
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw std::invalid_argument("write_ppm: expected (3, H, W), got " + shape_string(image.shape()));
    }
    const std::size_t height = image.dim(1);
    const std::size_t width = image.dim(2);
    const std::size_t n = height * width;
    std::vector<unsigned char> buf(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            buf[3 * i + c] = static_cast<unsigned char>(std::lround(std::clamp(image[c * n + i], 0.0, 1.0) * 255.0));
        }
    }
    std::ofstream out = open_out(path);
    out << "P6\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    finish(out, path);
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in = open_in(path);
    const Header h = read_header(in, path, "P5");
    const bool wide = h.maxval > 255;
    const std::size_t n = h.width * h.height;
    const std::vector<unsigned char> buf = read_raster(in, path, wide ? 2 * n : n);
    GrayImage g{h.height, h.width, static_cast<std::uint16_t>(h.maxval), std::vector<std::uint16_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        g.values[i] = wide ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]) : buf[i];
        if (g.values[i] > h.maxval) throw FormatError(path + ": sample exceeds maxval");
    }
    return g;
}

void write_pgm(const std::string& path, const GrayImage& image) {
    const std::size_t n = image.height * image.width;
    if (image.values.size() != n || n == 0) throw std::invalid_argument("write_pgm: raster size does not match extents");
    if (image.maxval == 0) throw std::invalid_argument("write_pgm: maxval must be positive");
    const bool wide = image.maxval > 255;
    std::vector<unsigned char> buf(wide ? 2 * n : n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t v = image.values[i];
        if (v > image.maxval) throw std::invalid_argument("write_pgm: sample exceeds maxval");
        if (wide) {
            buf[2 * i] = static_cast<unsigned char>(v >> 8);
            buf[2 * i + 1] = static_cast<unsigned char>(v & 0xFF);
        } else {
            buf[i] = static_cast<unsigned char>(v);
        }
    }
    std::ofstream out = open_out(path);
    out << "P5\n" << image.width << ' ' << image.height << '\n' << image.maxval << '\n';
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    finish(out, path);
}

SurfaceLabelMap read_label_pgm(const std::string& path, std::size_t num_classes) {
    const GrayImage g = read_pgm(path);
    SurfaceLabelMap labels(g.height, g.width, num_classes);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        if (g.values[i] >= num_classes) {
            throw FormatError(path + ": label " + std::to_string(g.values[i]) + " is not below the class count " +
                              std::to_string(num_classes));
        }
        labels.labels[i] = static_cast<std::uint8_t>(g.values[i]);
    }
    return labels;
}

void write_label_pgm(const std::string& path, const SurfaceLabelMap& labels) {
    labels.validate();
    GrayImage g{labels.height, labels.width, 255, std::vector<std::uint16_t>(labels.labels.begin(), labels.labels.end())};
    write_pgm(path, g);
}

void quantize_8bit(Tensor& image) {
    for (double& v : image.data()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
}

}  // namespace hlstm
