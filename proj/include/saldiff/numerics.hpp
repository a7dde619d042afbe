#pragma once

#include <functional>
#include <vector>

#include "saldiff/tensor.hpp"

namespace saldiff {

// c = a x b for 2-D tensors [m,k] x [k,n]. Deterministic row-major
// accumulation; the same kernel backs the autodiff op.
Tensor matmul(const Tensor& a, const Tensor& b);

// Max-subtracted softmax along `axis` (negative axis counts from the back).
Tensor softmax(const Tensor& x, int axis = -1);

// Per-row normalization over the last dimension, population variance,
// eps added to the variance before the reciprocal square root. No affine.
// The tiny default keeps the output variance within 1e-6 of 1; model code
// passes its own eps.
Tensor layer_norm(const Tensor& x, double eps = 1e-12);

// Central-difference check of analytic gradients. `f` maps flat parameter
// vectors to a scalar; `analytic` holds df/dparam in matching order.
// Returns max over elements of |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
double grad_check(const std::function<double(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> params, const std::vector<Tensor>& analytic,
                  double h = 1e-5);

}  // namespace saldiff
