#pragma once

// Dense rank-4 tensor (batch, channel, height, width) plus the elementwise,
// reduction, and random-fill primitives the layers and optimizer build on.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drdn/errors.hpp"

namespace drdn {

struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    long size() const { return static_cast<long>(n) * c * h * w; }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

template <typename T>
class Tensor4 {
  public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape, T fill = T(0))
        : shape_(shape), data_(check_size(shape), fill) {}
    Tensor4(int n, int c, int h, int w, T fill = T(0)) : Tensor4(Shape4{n, c, h, w}, fill) {}

    const Shape4& shape() const { return shape_; }
    long size() const { return static_cast<long>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    long index(int n, int c, int h, int w) const {
        return ((static_cast<long>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    T at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    T& operator[](long i) { return data_[i]; }
    T operator[](long i) const { return data_[i]; }

    void fill(T value) { data_.assign(data_.size(), value); }

    // Casts between scalar precisions (float training vs double check mode).
    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape_);
        for (long i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool has_nonfinite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return true;
        return false;
    }

  private:
    static long check_size(Shape4 s) {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
            throw ShapeMismatch("all dimensions must be positive, got " + s.str());
        return s.size();
    }

    Shape4 shape_;
    std::vector<T> data_;
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

namespace detail {
inline void require_same_shape(const Shape4& a, const Shape4& b) {
    if (!(a == b)) throw ShapeMismatch(a.str() + " vs " + b.str());
}
}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
    detail::require_same_shape(a.shape(), b.shape());
    Tensor4<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename T>
Tensor4<T> sub(const Tensor4<T>& a, const Tensor4<T>& b) {
    detail::require_same_shape(a.shape(), b.shape());
    Tensor4<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <typename T>
Tensor4<T> mul(const Tensor4<T>& a, const Tensor4<T>& b) {
    detail::require_same_shape(a.shape(), b.shape());
    Tensor4<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <typename T>
Tensor4<T> scale(const Tensor4<T>& a, T factor) {
    Tensor4<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
    return out;
}

template <typename T>
Tensor4<T> max_with_zero(const Tensor4<T>& a) {
    Tensor4<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
    return out;
}

template <typename T>
Tensor4<T> clamp01(const Tensor4<T>& a) {
    Tensor4<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] < T(0) ? T(0) : (a[i] > T(1) ? T(1) : a[i]);
    return out;
}

// ---- reductions -------------------------------------------------------------

enum class Reduce { sum, mean, sum_of_squares };

// Collapses the selected axes to size 1; accumulation is done in double.
template <typename T>
Tensor4<T> reduce(Reduce op, const Tensor4<T>& a, const std::array<bool, 4>& axes) {
    const Shape4 in = a.shape();
    Shape4 out_shape{axes[0] ? 1 : in.n, axes[1] ? 1 : in.c, axes[2] ? 1 : in.h,
                     axes[3] ? 1 : in.w};
    std::vector<double> acc(out_shape.size(), 0.0);
    Tensor4<T> out(out_shape);
    for (int n = 0; n < in.n; ++n)
        for (int c = 0; c < in.c; ++c)
            for (int h = 0; h < in.h; ++h)
                for (int w = 0; w < in.w; ++w) {
                    const double v = static_cast<double>(a.at(n, c, h, w));
                    const long o = out.index(axes[0] ? 0 : n, axes[1] ? 0 : c,
                                             axes[2] ? 0 : h, axes[3] ? 0 : w);
                    acc[o] += (op == Reduce::sum_of_squares) ? v * v : v;
                }
    long reduced_count = 1;
    if (axes[0]) reduced_count *= in.n;
    if (axes[1]) reduced_count *= in.c;
    if (axes[2]) reduced_count *= in.h;
    if (axes[3]) reduced_count *= in.w;
    for (long i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(op == Reduce::mean ? acc[i] / reduced_count : acc[i]);
    return out;
}

template <typename T>
double reduce_all(Reduce op, const Tensor4<T>& a) {
    double acc = 0.0;
    for (long i = 0; i < a.size(); ++i) {
        const double v = static_cast<double>(a[i]);
        acc += (op == Reduce::sum_of_squares) ? v * v : v;
    }
    return op == Reduce::mean ? acc / static_cast<double>(a.size()) : acc;
}

// ---- random fill ------------------------------------------------------------

// Deterministic Gaussian source: xoshiro-free, fully specified stream built
// on splitmix64 plus Box-Muller, so the same seed gives the same tensor on
// every platform.
class RngState {
  public:
    explicit RngState(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

    // Standard normal via Box-Muller; the spare sample is cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_uniform();
        } while (u1 <= 0.0);
        u2 = next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Fisher-Yates index permutation.
    std::vector<int> permutation(int count) {
        std::vector<int> order(count);
        for (int i = 0; i < count; ++i) order[i] = i;
        for (int i = count - 1; i > 0; --i) {
            const int j = static_cast<int>(next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }
        return order;
    }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

template <typename T>
Tensor4<T> fill_gaussian(Shape4 shape, T mean, T stddev, RngState& rng) {
    if (stddev < T(0)) throw NumericalError("negative stddev");
    Tensor4<T> out(shape);
    for (long i = 0; i < out.size(); ++i)
        out[i] = mean + stddev * static_cast<T>(rng.next_normal());
    return out;
}

}  // namespace drdn
