#include "saldiff/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "saldiff/kernels.hpp"

namespace saldiff {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: expected 2-D tensors, got " + a.shape_str() + " x " +
                         b.shape_str());
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " x " +
                         b.shape_str());
    Tensor c({a.rows(), b.cols()});
    kern::mm_nn(a.data.data(), b.data.data(), c.data.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor softmax(const Tensor& x, int axis) {
    if (x.rank() < 1) throw ShapeError("softmax: rank-0 input");
    int ax = axis < 0 ? x.rank() + axis : axis;
    if (ax < 0 || ax >= x.rank()) throw ShapeError("softmax: axis out of range");

    const int width = x.shape[ax];
    int64_t inner = 1;
    for (int i = ax + 1; i < x.rank(); ++i) inner *= x.shape[i];
    int64_t outer = x.numel() / (width * inner);

    Tensor y(x.shape);
    if (inner == 1) {
        kern::softmax_rows(x.data.data(), y.data.data(), static_cast<int>(outer), width);
        return y;
    }
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const double* xs = x.data.data() + o * width * inner + in;
            double* ys = y.data.data() + o * width * inner + in;
            double mx = xs[0];
            for (int i = 1; i < width; ++i) mx = std::max(mx, xs[i * inner]);
            double sum = 0.0;
            for (int i = 0; i < width; ++i) {
                ys[i * inner] = std::exp(xs[i * inner] - mx);
                sum += ys[i * inner];
            }
            for (int i = 0; i < width; ++i) ys[i * inner] /= sum;
        }
    }
    return y;
}

Tensor layer_norm(const Tensor& x, double eps) {
    if (x.rank() < 1) throw ShapeError("layer_norm: rank-0 input");
    const int width = x.shape.back();
    const int rows = static_cast<int>(x.numel() / width);
    Tensor y(x.shape);
    kern::layer_norm_rows(x.data.data(), y.data.data(), rows, width, eps);
    return y;
}

double grad_check(const std::function<double(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> params, const std::vector<Tensor>& analytic, double h) {
    if (h <= 0.0) throw ArgumentError("grad_check: h must be positive");
    if (params.size() != analytic.size())
        throw ArgumentError("grad_check: params/analytic count mismatch");

    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        if (!params[p].same_shape(analytic[p]))
            throw ShapeError("grad_check: gradient shape mismatch for parameter " +
                             std::to_string(p));
        for (size_t i = 0; i < params[p].data.size(); ++i) {
            const double keep = params[p].data[i];
            params[p].data[i] = keep + h;
            const double fp = f(params);
            params[p].data[i] = keep - h;
            const double fm = f(params);
            params[p].data[i] = keep;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("grad_check: non-finite function evaluation");
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p].data[i];
            const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace saldiff
