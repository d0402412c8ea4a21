#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xing/rng.hpp"

namespace xing {

enum class Dtype { f32, f64 };

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

inline std::size_t shape_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 1) throw std::invalid_argument("tensor shape entries must be >= 1, got " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

// Dense row-major tensor. Plain value type; all layout decisions (row-major,
// channel-first images) are fixed project-wide so serialized bytes are stable.
template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> shp)
        : shape(std::move(shp)), data(shape_numel(shape), S(0)) {}

    Tensor(std::vector<int> shp, std::vector<S> d)
        : shape(std::move(shp)), data(std::move(d)) {
        if (data.size() != shape_numel(shape))
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }

    static Tensor full(std::vector<int> shp, S v) {
        Tensor t(std::move(shp));
        for (S& x : t.data) x = v;
        return t;
    }

    static Tensor ones(std::vector<int> shp) { return full(std::move(shp), S(1)); }

    // Fan-in uniform: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static Tensor uniform_fan_in(std::vector<int> shp, int fan_in, Rng& rng) {
        Tensor t(std::move(shp));
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (S& x : t.data) x = static_cast<S>(rng.uniform(-bound, bound));
        return t;
    }

    static Tensor uniform(std::vector<int> shp, double lo, double hi, Rng& rng) {
        Tensor t(std::move(shp));
        for (S& x : t.data) x = static_cast<S>(rng.uniform(lo, hi));
        return t;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    static constexpr Dtype dtype() {
        return sizeof(S) == 4 ? Dtype::f32 : Dtype::f64;
    }

    S& operator[](std::size_t i) { return data[i]; }
    const S& operator[](std::size_t i) const { return data[i]; }

    // Row-major multi-index access.
    std::size_t offset(std::initializer_list<int> idx) const {
        if (idx.size() != shape.size())
            throw std::invalid_argument("index rank " + std::to_string(idx.size()) +
                                        " does not match tensor rank " + std::to_string(shape.size()));
        std::size_t off = 0;
        std::size_t k = 0;
        for (int i : idx) {
            if (i < 0 || i >= shape[k])
                throw std::out_of_range("index " + std::to_string(i) + " out of bounds for dim " +
                                        std::to_string(k) + " of " + shape_str(shape));
            off = off * static_cast<std::size_t>(shape[k]) + static_cast<std::size_t>(i);
            ++k;
        }
        return off;
    }

    S& at(std::initializer_list<int> idx) { return data[offset(idx)]; }
    const S& at(std::initializer_list<int> idx) const { return data[offset(idx)]; }

    Tensor reshaped(std::vector<int> shp) const {
        if (shape_numel(shp) != numel())
            throw std::invalid_argument("reshape " + shape_str(shape) + " -> " + shape_str(shp) +
                                        " changes element count");
        return Tensor(std::move(shp), data);
    }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (S x : data)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }
};

template <class S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace xing
