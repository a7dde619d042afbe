#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "saldiff/errors.hpp"

namespace saldiff {

// Dense row-major tensor of doubles. Training and verification run at 64-bit
// precision; file formats store 32-bit payloads (see io.hpp).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), 0.0);
    }

    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("tensor: shape/product mismatch (" + shape_str() + " vs " +
                             std::to_string(data.size()) + " values)");
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor: non-positive dimension " + std::to_string(d));
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    // 2-D accessors; the matrix convention throughout is [rows, cols].
    int rows() const { return shape.size() >= 1 ? shape[0] : 1; }
    int cols() const { return shape.size() >= 2 ? shape[1] : 1; }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace saldiff
