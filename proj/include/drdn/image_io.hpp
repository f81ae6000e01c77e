#pragma once

// Netpbm image I/O: P2/P5 grayscale and P3/P6 color, maxval 255 only.
// Pixels are stored planar (channel-major) as floats in [0,1], value/255.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "drdn/errors.hpp"
#include "drdn/tensor.hpp"

namespace drdn {

struct Image {
    int channels = 0;  // 1 or 3
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // channels * height * width, planar

    float& at(int c, int y, int x) {
        return pixels[(static_cast<long>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return pixels[(static_cast<long>(c) * height + y) * width + x];
    }
};

inline Tensor4<float> to_tensor(const Image& image) {
    Tensor4<float> t(1, image.channels, image.height, image.width);
    for (long i = 0; i < t.size(); ++i) t[i] = image.pixels[i];
    return t;
}

inline Image from_tensor(const Tensor4<float>& t) {
    if (t.shape().n != 1) throw ShapeMismatch("expected batch of 1, got " + t.shape().str());
    Image image{t.shape().c, t.shape().h, t.shape().w, {}};
    image.pixels.assign(t.data(), t.data() + t.size());
    return image;
}

namespace pnm {

class Scanner {
  public:
    explicit Scanner(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    long offset() const { return static_cast<long>(pos_); }
    size_t remaining() const { return bytes_.size() - pos_; }
    const char* cursor() const { return bytes_.data() + pos_; }
    void advance(size_t n) { pos_ += n; }

    // Skips whitespace and '#' comment lines, then reads a decimal integer.
    int next_int(const char* what) {
        skip_space_and_comments();
        if (pos_ >= bytes_.size())
            throw FormatError(std::string("missing ") + what, offset());
        if (bytes_[pos_] < '0' || bytes_[pos_] > '9')
            throw FormatError(std::string("expected digit for ") + what, offset());
        long value = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000) throw FormatError("integer overflow", offset());
            ++pos_;
        }
        return static_cast<int>(value);
    }

    // Consumes exactly one whitespace byte (the separator before raster data).
    void expect_single_space() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_]))
            throw FormatError("expected whitespace before raster", offset());
        ++pos_;
    }

  private:
    static bool is_space(char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    }
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (is_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::vector<char> bytes_;
    size_t pos_ = 0;
};

}  // namespace pnm

inline Image load_image(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(file)),
                            std::istreambuf_iterator<char>());
    pnm::Scanner scan(std::move(bytes));

    if (scan.remaining() < 2 || scan.cursor()[0] != 'P')
        throw FormatError("not a PNM file", scan.offset());
    const char type = scan.cursor()[1];
    if (type != '2' && type != '3' && type != '5' && type != '6')
        throw FormatError(std::string("unsupported PNM type 'P") + type + "'", scan.offset() + 1);
    scan.advance(2);
    const bool color = (type == '3' || type == '6');
    const bool binary = (type == '5' || type == '6');

    const int width = scan.next_int("width");
    const int height = scan.next_int("height");
    const int maxval = scan.next_int("maxval");
    if (width < 1 || height < 1)
        throw FormatError("non-positive image dimensions", scan.offset());
    if (maxval != 255) throw FormatError("only maxval 255 is supported", scan.offset());

    Image image{color ? 3 : 1, height, width, {}};
    image.pixels.resize(static_cast<size_t>(image.channels) * height * width);
    const long count = static_cast<long>(image.channels) * height * width;

    if (binary) {
        scan.expect_single_space();
        if (scan.remaining() < static_cast<size_t>(count))
            throw FormatError("raster shorter than header promises",
                              scan.offset() + static_cast<long>(scan.remaining()));
        const unsigned char* raster = reinterpret_cast<const unsigned char*>(scan.cursor());
        // File raster is interleaved; storage is planar.
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < image.channels; ++c)
                    image.at(c, y, x) =
                        raster[(static_cast<long>(y) * width + x) * image.channels + c] / 255.0f;
    } else {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < image.channels; ++c) {
                    const int v = scan.next_int("sample");
                    if (v > 255) throw FormatError("sample exceeds maxval", scan.offset());
                    image.at(c, y, x) = v / 255.0f;
                }
    }
    return image;
}

// Writes binary P5 (gray) or P6 (color); floats are clamped and rounded to
// 8-bit, so a save/load round trip of 8-bit data is exact.
inline void save_image(const Image& image, const std::string& path) {
    if (image.channels != 1 && image.channels != 3)
        throw IoError("image must have 1 or 3 channels");
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path + "' for writing");
    file << (image.channels == 1 ? "P5" : "P6") << "\n"
         << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> raster(static_cast<size_t>(image.channels) * image.height *
                                      image.width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) {
                float v = image.at(c, y, x) * 255.0f;
                v = v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v);
                raster[(static_cast<long>(y) * image.width + x) * image.channels + c] =
                    static_cast<unsigned char>(std::lround(v));
            }
    file.write(reinterpret_cast<const char*>(raster.data()),
               static_cast<std::streamsize>(raster.size()));
    if (!file) throw IoError("short write to '" + path + "'");
}

}  // namespace drdn
