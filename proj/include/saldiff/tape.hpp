#pragma once

#include <functional>
#include <vector>

#include "saldiff/tensor.hpp"

namespace saldiff {

// Handle into a Tape. Cheap to copy; only meaningful for the tape that
// produced it.
struct Var {
    int id = -1;
    bool ok() const { return id >= 0; }
};

// Reverse-mode tape. Ops record a closure that scatters the output gradient
// into the parents; backward() walks nodes in reverse creation order, which
// is deterministic. Tensors with more than two dimensions are treated as
// [numel/last, last] row matrices by the row-wise ops.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves. value() is a constant (no gradient); param() is tracked.
    Var value(Tensor v);
    Var param(const Tensor& v);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;  // valid after backward(); zeros if untouched

    Var matmul(Var a, Var b);     // [m,k] x [k,n]
    Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T -> [m,n]
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_rowvec(Var x, Var v);  // [m,n] + [n] per row
    Var mul_rowvec(Var x, Var v);  // [m,n] * [n] per row
    Var scale_rows(Var x, Var s);  // row i of [m,n] scaled by s[i]
    Var add_const(Var x, double c);
    Var scale(Var x, double c);
    Var layer_norm(Var x, double eps = 1e-6);
    Var softmax(Var x);  // last dim
    Var gelu(Var x);     // tanh approximation
    Var silu(Var x);
    Var concat_rows(const std::vector<Var>& xs);
    Var slice_rows(Var x, int r0, int r1);
    Var concat_cols(const std::vector<Var>& xs);
    Var slice_cols(Var x, int c0, int c1);
    Var reshape(Var x, std::vector<int> shape);
    Var mean_rows(Var x);               // [m,n] -> [1,n]
    Var sum(Var x);                     // -> [1]
    Var mse(Var pred, Tensor target);   // mean squared error -> [1]

    void backward(Var loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grd;
        std::function<void(Tape&, const Tensor&)> back;  // nullptr for leaves/constants
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;

    Var push(Tensor v, bool needs_grad, std::function<void(Tape&, const Tensor&)> back);
    Tensor& grad_buf(int id);
    bool tracked(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }
    void check(Var v) const;
    static void rows_cols(const Tensor& t, int& r, int& c);
};

}  // namespace saldiff
