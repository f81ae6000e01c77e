#pragma once

// Convolution output-size and receptive-field arithmetic for stacks of
// (possibly dilated) convolutional layers.

#include <string>
#include <vector>

#include "drdn/errors.hpp"

namespace drdn {

// One convolutional layer: filter size k, zero-padding p (per side),
// stride s, dilation d (d=1 is ordinary convolution).
struct LayerSpec {
    int filter_size = 3;
    int padding = 0;
    int stride = 1;
    int dilation = 1;

    // k + (k-1)(d-1): the span of the dilated tap lattice.
    int effective_filter_size() const {
        return filter_size + (filter_size - 1) * (dilation - 1);
    }

    void validate() const {
        if (filter_size < 1) throw InvalidStack("filter size must be >= 1");
        if (stride < 1) throw InvalidStack("stride must be >= 1");
        if (dilation < 1) throw InvalidStack("dilation must be >= 1");
        if (padding < 0) throw InvalidStack("padding must be >= 0");
    }
};

struct LayerStackSpec {
    std::vector<LayerSpec> layers;
    int input_size = 0;  // pixels, one spatial axis
};

struct RfRow {
    int layer_index;      // 1-based
    int dilation;
    long receptive_field;  // pixels
    int output_size;       // pixels
};

struct RfTable {
    std::vector<RfRow> per_layer;
};

// Spatial output size of one layer via the effective-kernel form
//   o = floor((i + 2p - (k + (k-1)(d-1))) / s) + 1.
inline int output_size(int input_size, const LayerSpec& layer) {
    layer.validate();
    const int eff = layer.effective_filter_size();
    const int numer = input_size + 2 * layer.padding - eff;
    if (numer < 0)
        throw InvalidStack("effective kernel " + std::to_string(eff) +
                           " does not fit input " + std::to_string(input_size) +
                           " with padding " + std::to_string(layer.padding));
    return numer / layer.stride + 1;
}

// Receptive field per layer via the recurrence
//   r_l = r_{l-1} + (k-1) * d_l * prod_{j<l} s_j,   r_0 = 1,
// together with the running output size.
inline RfTable receptive_field(const LayerStackSpec& stack) {
    if (stack.layers.empty()) throw InvalidStack("empty layer stack");
    RfTable table;
    table.per_layer.reserve(stack.layers.size());
    long rf = 1;
    long stride_product = 1;
    int size = stack.input_size;
    int index = 0;
    for (const LayerSpec& layer : stack.layers) {
        ++index;
        size = output_size(size, layer);
        rf += static_cast<long>(layer.filter_size - 1) * layer.dilation * stride_product;
        stride_product *= layer.stride;
        table.per_layer.push_back({index, layer.dilation, rf, size});
    }
    return table;
}

// Parses a comma-separated per-layer list "k:p:s:d,k:p:s:d,...".
// Throws ParseError carrying the 1-based column of the offending character.
inline std::vector<LayerSpec> parse_stack(const std::string& text) {
    std::vector<LayerSpec> layers;
    size_t pos = 0;
    const size_t n = text.size();
    if (n == 0) throw ParseError("empty stack description", 1);
    while (pos < n) {
        int fields[4];
        for (int f = 0; f < 4; ++f) {
            if (pos >= n || text[pos] < '0' || text[pos] > '9')
                throw ParseError("expected digit", static_cast<long>(pos) + 1);
            long value = 0;
            while (pos < n && text[pos] >= '0' && text[pos] <= '9') {
                value = value * 10 + (text[pos] - '0');
                if (value > 1'000'000) throw ParseError("value too large", static_cast<long>(pos) + 1);
                ++pos;
            }
            fields[f] = static_cast<int>(value);
            if (f < 3) {
                if (pos >= n || text[pos] != ':')
                    throw ParseError("expected ':'", static_cast<long>(pos) + 1);
                ++pos;
            }
        }
        layers.push_back({fields[0], fields[1], fields[2], fields[3]});
        if (pos < n) {
            if (text[pos] != ',') throw ParseError("expected ','", static_cast<long>(pos) + 1);
            ++pos;
            if (pos == n) throw ParseError("trailing ','", static_cast<long>(pos));
        }
    }
    return layers;
}

}  // namespace drdn
