#pragma once

// Binary checkpoint format:
//   magic "DRDN", format version u16, NetworkConfig as u32 fields,
//   then per-layer records in network order:
//     kind tag u8, shape dims u32 x 4, payload of little-endian float32,
//   terminated by a CRC32 of all payload bytes. Everything little-endian.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "drdn/network.hpp"

namespace drdn {
namespace ckpt {

constexpr char kMagic[4] = {'D', 'R', 'D', 'N'};
constexpr std::uint16_t kVersion = 1;

enum RecordKind : std::uint8_t {
    kConvWeights = 1,
    kConvBias = 2,
    kBnGamma = 3,
    kBnBeta = 4,
    kBnRunningMean = 5,
    kBnRunningVar = 6,
};

inline std::uint32_t crc32_update(std::uint32_t crc, const std::uint8_t* data, size_t len) {
    static const auto table = [] {
        std::vector<std::uint32_t> t(256);
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

class Writer {
  public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void payload_f32(const float* data, long count) {
        const size_t start = bytes_.size();
        bytes_.resize(start + static_cast<size_t>(count) * 4);
        for (long i = 0; i < count; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &data[i], 4);
            for (int b = 0; b < 4; ++b)
                bytes_[start + static_cast<size_t>(i) * 4 + b] =
                    static_cast<std::uint8_t>(bits >> (8 * b));
        }
        crc_ = crc32_update(crc_, bytes_.data() + start, static_cast<size_t>(count) * 4);
    }
    std::uint32_t payload_crc() const { return crc_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  private:
    std::vector<std::uint8_t> bytes_;
    std::uint32_t crc_ = 0;
};

class Reader {
  public:
    explicit Reader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

    long offset() const { return static_cast<long>(pos_); }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    void payload_f32(float* out, long count) {
        need(static_cast<size_t>(count) * 4);
        crc_ = crc32_update(crc_, bytes_.data() + pos_, static_cast<size_t>(count) * 4);
        for (long i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * b);
            std::memcpy(&out[i], &bits, 4);
        }
    }
    std::uint32_t payload_crc() const { return crc_; }
    bool at_end() const { return pos_ == bytes_.size(); }

  private:
    void need(size_t n) const {
        if (pos_ + n > bytes_.size())
            throw FormatError("truncated checkpoint", static_cast<long>(bytes_.size()));
    }
    std::vector<std::uint8_t> bytes_;
    size_t pos_ = 0;
    std::uint32_t crc_ = 0;
};

}  // namespace ckpt

inline std::vector<std::uint8_t> serialize(const DenoiserModel<float>& model) {
    ckpt::Writer w;
    for (char c : ckpt::kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(ckpt::kVersion);
    w.u32(static_cast<std::uint32_t>(model.config.depth));
    w.u32(static_cast<std::uint32_t>(model.config.width));
    w.u32(static_cast<std::uint32_t>(model.config.io_channels));
    w.u32(static_cast<std::uint32_t>(model.config.patch_size));

    auto record = [&w](std::uint8_t kind, Shape4 dims, const float* data, long count) {
        w.u8(kind);
        w.u32(static_cast<std::uint32_t>(dims.n));
        w.u32(static_cast<std::uint32_t>(dims.c));
        w.u32(static_cast<std::uint32_t>(dims.h));
        w.u32(static_cast<std::uint32_t>(dims.w));
        w.payload_f32(data, count);
    };

    const int depth = model.config.depth;
    for (int l = 1; l <= depth; ++l) {
        const ConvLayer<float>& conv = model.convs[l - 1];
        record(ckpt::kConvWeights, conv.weights.shape(), conv.weights.data(),
               conv.weights.size());
        if (!conv.bias.empty())
            record(ckpt::kConvBias, {static_cast<int>(conv.bias.size()), 1, 1, 1},
                   conv.bias.data(), static_cast<long>(conv.bias.size()));
        if (l >= 2 && l < depth) {
            const BatchNormLayer<float>& bn = model.bns[l - 2];
            const Shape4 dims{bn.channels(), 1, 1, 1};
            record(ckpt::kBnGamma, dims, bn.gamma.data(), bn.channels());
            record(ckpt::kBnBeta, dims, bn.beta.data(), bn.channels());
            record(ckpt::kBnRunningMean, dims, bn.running_mean.data(), bn.channels());
            record(ckpt::kBnRunningVar, dims, bn.running_var.data(), bn.channels());
        }
    }
    w.u32(w.payload_crc());
    return w.bytes();
}

inline DenoiserModel<float> deserialize(std::vector<std::uint8_t> bytes) {
    ckpt::Reader r(std::move(bytes));
    for (char c : ckpt::kMagic)
        if (r.u8() != static_cast<std::uint8_t>(c))
            throw FormatError("bad magic, not a DRDN checkpoint", r.offset() - 1);
    const std::uint16_t version = r.u16();
    if (version != ckpt::kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version),
                          r.offset() - 2);
    NetworkConfig config;
    config.depth = static_cast<int>(r.u32());
    config.width = static_cast<int>(r.u32());
    config.io_channels = static_cast<int>(r.u32());
    config.patch_size = static_cast<int>(r.u32());
    config.validate();

    DenoiserModel<float> model;
    model.config = config;

    auto read_record = [&r](std::uint8_t expected_kind, Shape4 expected_dims, float* out,
                            long count) {
        const long at = r.offset();
        const std::uint8_t kind = r.u8();
        if (kind != expected_kind)
            throw FormatError("unexpected record kind " + std::to_string(kind), at);
        Shape4 dims{static_cast<int>(r.u32()), static_cast<int>(r.u32()),
                    static_cast<int>(r.u32()), static_cast<int>(r.u32())};
        if (!(dims == expected_dims))
            throw FormatError("record dims " + dims.str() + " do not match model " +
                                  expected_dims.str(),
                              at + 1);
        r.payload_f32(out, count);
    };

    for (int l = 1; l <= config.depth; ++l) {
        const int in_ch = (l == 1) ? config.io_channels : config.width;
        const int out_ch = (l == config.depth) ? config.io_channels : config.width;
        ConvLayer<float> conv;
        conv.weights = Tensor4<float>(out_ch, in_ch, 3, 3);
        conv.padding = config.padding_at(l);
        conv.dilation = config.dilation_at(l);
        read_record(ckpt::kConvWeights, conv.weights.shape(), conv.weights.data(),
                    conv.weights.size());
        if (l == 1 || l == config.depth) {
            conv.bias.assign(out_ch, 0.0f);
            read_record(ckpt::kConvBias, {out_ch, 1, 1, 1}, conv.bias.data(), out_ch);
        }
        model.convs.push_back(std::move(conv));
        if (l >= 2 && l < config.depth) {
            BatchNormLayer<float> bn(config.width);
            const Shape4 dims{config.width, 1, 1, 1};
            read_record(ckpt::kBnGamma, dims, bn.gamma.data(), config.width);
            read_record(ckpt::kBnBeta, dims, bn.beta.data(), config.width);
            read_record(ckpt::kBnRunningMean, dims, bn.running_mean.data(), config.width);
            read_record(ckpt::kBnRunningVar, dims, bn.running_var.data(), config.width);
            model.bns.push_back(std::move(bn));
        }
    }
    const std::uint32_t expected_crc = r.payload_crc();
    const long at = r.offset();
    if (r.u32() != expected_crc) throw FormatError("payload checksum mismatch", at);
    if (!r.at_end()) throw FormatError("trailing bytes after checksum", r.offset());
    return model;
}

inline void save_checkpoint(const DenoiserModel<float>& model, const std::string& path) {
    const std::vector<std::uint8_t> bytes = serialize(model);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path + "' for writing");
    file.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!file) throw IoError("short write to '" + path + "'");
}

inline DenoiserModel<float> load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    return deserialize(std::move(bytes));
}

}  // namespace drdn
