#include "saldiff/tape.hpp"

#include <cmath>
#include <cstring>

#include "saldiff/kernels.hpp"

namespace saldiff {

namespace {
constexpr double kSqrt2OverPi = 0.7978845608028654;
constexpr double kGeluCoef = 0.044715;
}  // namespace

void Tape::check(Var v) const {
    if (!v.ok() || static_cast<size_t>(v.id) >= nodes_.size())
        throw ArgumentError("tape: invalid variable handle");
}

void Tape::rows_cols(const Tensor& t, int& r, int& c) {
    if (t.rank() == 0) throw ShapeError("tape: rank-0 tensor");
    c = t.shape.back();
    r = static_cast<int>(t.numel() / c);
}

Var Tape::push(Tensor v, bool needs_grad, std::function<void(Tape&, const Tensor&)> back) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::value(Tensor v) { return push(std::move(v), false, nullptr); }

Var Tape::param(const Tensor& v) { return push(v, true, nullptr); }

const Tensor& Tape::val(Var v) const {
    check(v);
    return nodes_[static_cast<size_t>(v.id)].val;
}

const Tensor& Tape::grad(Var v) const {
    check(v);
    const Node& n = nodes_[static_cast<size_t>(v.id)];
    if (n.grd.numel() == 0) {
        // Untouched gradient: materialize zeros lazily is not possible in a
        // const accessor, so keep a per-node zero buffer on demand.
        const_cast<Node&>(n).grd = Tensor::zeros(n.val.shape);
    }
    return n.grd;
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grd.numel() == 0) n.grd = Tensor::zeros(n.val.shape);
    return n.grd;
}

Var Tape::matmul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
        throw ShapeError("tape.matmul: bad shapes " + ta.shape_str() + " x " + tb.shape_str());
    const int m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    kern::mm_nn(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    const int ia = a.id, ib = b.id;
    bool track = tracked(a) || tracked(b);
    return push(std::move(out), track, [ia, ib, m, k, n](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ia}))
            kern::mm_nt_acc(g.data.data(), t.val(Var{ib}).data.data(), t.grad_buf(ia).data.data(),
                            m, n, k);
        if (t.tracked(Var{ib}))
            kern::mm_tn_acc(t.val(Var{ia}).data.data(), g.data.data(), t.grad_buf(ib).data.data(),
                            k, m, n);
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols())
        throw ShapeError("tape.matmul_nt: bad shapes " + ta.shape_str() + " x " + tb.shape_str());
    const int m = ta.rows(), k = ta.cols(), n = tb.rows();
    Tensor out({m, n});
    kern::mm_nt(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    const int ia = a.id, ib = b.id;
    bool track = tracked(a) || tracked(b);
    return push(std::move(out), track, [ia, ib, m, k, n](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ia}))
            kern::mm_nn_acc(g.data.data(), t.val(Var{ib}).data.data(), t.grad_buf(ia).data.data(),
                            m, n, k);
        if (t.tracked(Var{ib}))
            kern::mm_tn_acc(g.data.data(), t.val(Var{ia}).data.data(), t.grad_buf(ib).data.data(),
                            n, m, k);
    });
}

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb))
        throw ShapeError("tape.add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
    const int ia = a.id, ib = b.id;
    bool track = tracked(a) || tracked(b);
    return push(std::move(out), track, [ia, ib](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ia})) {
            Tensor& ga = t.grad_buf(ia);
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (t.tracked(Var{ib})) {
            Tensor& gb = t.grad_buf(ib);
            for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
        }
    });
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb))
        throw ShapeError("tape.mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
    const int ia = a.id, ib = b.id;
    bool track = tracked(a) || tracked(b);
    return push(std::move(out), track, [ia, ib](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ia})) {
            Tensor& ga = t.grad_buf(ia);
            const Tensor& vb = t.val(Var{ib});
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * vb.data[i];
        }
        if (t.tracked(Var{ib})) {
            Tensor& gb = t.grad_buf(ib);
            const Tensor& va = t.val(Var{ia});
            for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * va.data[i];
        }
    });
}

Var Tape::add_rowvec(Var x, Var v) {
    check(x);
    check(v);
    const Tensor& tx = val(x);
    const Tensor& tv = val(v);
    int r, c;
    rows_cols(tx, r, c);
    if (tv.numel() != c)
        throw ShapeError("tape.add_rowvec: vector width " + tv.shape_str() + " vs cols " +
                         std::to_string(c));
    Tensor out(tx.shape);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out.data[static_cast<size_t>(i) * c + j] =
                tx.data[static_cast<size_t>(i) * c + j] + tv.data[static_cast<size_t>(j)];
    const int ix = x.id, iv = v.id;
    bool track = tracked(x) || tracked(v);
    return push(std::move(out), track, [ix, iv, r, c](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ix})) {
            Tensor& gx = t.grad_buf(ix);
            for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
        }
        if (t.tracked(Var{iv})) {
            Tensor& gv = t.grad_buf(iv);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    gv.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i) * c + j];
        }
    });
}

Var Tape::mul_rowvec(Var x, Var v) {
    check(x);
    check(v);
    const Tensor& tx = val(x);
    const Tensor& tv = val(v);
    int r, c;
    rows_cols(tx, r, c);
    if (tv.numel() != c)
        throw ShapeError("tape.mul_rowvec: vector width " + tv.shape_str() + " vs cols " +
                         std::to_string(c));
    Tensor out(tx.shape);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out.data[static_cast<size_t>(i) * c + j] =
                tx.data[static_cast<size_t>(i) * c + j] * tv.data[static_cast<size_t>(j)];
    const int ix = x.id, iv = v.id;
    bool track = tracked(x) || tracked(v);
    return push(std::move(out), track, [ix, iv, r, c](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ix})) {
            Tensor& gx = t.grad_buf(ix);
            const Tensor& vv = t.val(Var{iv});
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    gx.data[static_cast<size_t>(i) * c + j] +=
                        g.data[static_cast<size_t>(i) * c + j] * vv.data[static_cast<size_t>(j)];
        }
        if (t.tracked(Var{iv})) {
            Tensor& gv = t.grad_buf(iv);
            const Tensor& vx = t.val(Var{ix});
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    gv.data[static_cast<size_t>(j)] +=
                        g.data[static_cast<size_t>(i) * c + j] *
                        vx.data[static_cast<size_t>(i) * c + j];
        }
    });
}

Var Tape::scale_rows(Var x, Var s) {
    check(x);
    check(s);
    const Tensor& tx = val(x);
    const Tensor& ts = val(s);
    int r, c;
    rows_cols(tx, r, c);
    if (ts.numel() != r)
        throw ShapeError("tape.scale_rows: scale count " + ts.shape_str() + " vs rows " +
                         std::to_string(r));
    Tensor out(tx.shape);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out.data[static_cast<size_t>(i) * c + j] =
                tx.data[static_cast<size_t>(i) * c + j] * ts.data[static_cast<size_t>(i)];
    const int ix = x.id, is = s.id;
    bool track = tracked(x) || tracked(s);
    return push(std::move(out), track, [ix, is, r, c](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ix})) {
            Tensor& gx = t.grad_buf(ix);
            const Tensor& vs = t.val(Var{is});
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    gx.data[static_cast<size_t>(i) * c + j] +=
                        g.data[static_cast<size_t>(i) * c + j] * vs.data[static_cast<size_t>(i)];
        }
        if (t.tracked(Var{is})) {
            Tensor& gs = t.grad_buf(is);
            const Tensor& vx = t.val(Var{ix});
            for (int i = 0; i < r; ++i) {
                double acc = 0.0;
                for (int j = 0; j < c; ++j)
                    acc += g.data[static_cast<size_t>(i) * c + j] *
                           vx.data[static_cast<size_t>(i) * c + j];
                gs.data[static_cast<size_t>(i)] += acc;
            }
        }
    });
}

Var Tape::add_const(Var x, double cst) {
    check(x);
    Tensor out = val(x);
    for (auto& v : out.data) v += cst;
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ix})) {
            Tensor& gx = t.grad_buf(ix);
            for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
        }
    });
}

Var Tape::scale(Var x, double cst) {
    check(x);
    Tensor out = val(x);
    for (auto& v : out.data) v *= cst;
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix, cst](Tape& t, const Tensor& g) {
        if (t.tracked(Var{ix})) {
            Tensor& gx = t.grad_buf(ix);
            for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += cst * g.data[i];
        }
    });
}

Var Tape::layer_norm(Var x, double eps) {
    check(x);
    const Tensor& tx = val(x);
    int r, c;
    rows_cols(tx, r, c);
    Tensor out(tx.shape);
    std::vector<double> rstd(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const double* xr = tx.data.data() + static_cast<int64_t>(i) * c;
        double* yr = out.data.data() + static_cast<int64_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= c;
        rstd[static_cast<size_t>(i)] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < c; ++j) yr[j] = (xr[j] - mean) * rstd[static_cast<size_t>(i)];
    }
    const int ix = x.id;
    const int self = static_cast<int>(nodes_.size());
    return push(std::move(out), tracked(x),
                [ix, self, r, c, rstd = std::move(rstd)](Tape& t, const Tensor& g) {
                    if (!t.tracked(Var{ix})) return;
                    Tensor& gx = t.grad_buf(ix);
                    const Tensor& y = t.val(Var{self});
                    for (int i = 0; i < r; ++i) {
                        const double* gr = g.data.data() + static_cast<int64_t>(i) * c;
                        const double* yr = y.data.data() + static_cast<int64_t>(i) * c;
                        double gmean = 0.0, gymean = 0.0;
                        for (int j = 0; j < c; ++j) {
                            gmean += gr[j];
                            gymean += gr[j] * yr[j];
                        }
                        gmean /= c;
                        gymean /= c;
                        const double rs = rstd[static_cast<size_t>(i)];
                        double* gxr = gx.data.data() + static_cast<int64_t>(i) * c;
                        for (int j = 0; j < c; ++j)
                            gxr[j] += rs * (gr[j] - gmean - yr[j] * gymean);
                    }
                });
}

Var Tape::softmax(Var x) {
    check(x);
    const Tensor& tx = val(x);
    int r, c;
    rows_cols(tx, r, c);
    Tensor out(tx.shape);
    kern::softmax_rows(tx.data.data(), out.data.data(), r, c);
    const int ix = x.id;
    const int self = static_cast<int>(nodes_.size());
    return push(std::move(out), tracked(x), [ix, self, r, c](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        const Tensor& y = t.val(Var{self});
        for (int i = 0; i < r; ++i) {
            const double* gr = g.data.data() + static_cast<int64_t>(i) * c;
            const double* yr = y.data.data() + static_cast<int64_t>(i) * c;
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += gr[j] * yr[j];
            double* gxr = gx.data.data() + static_cast<int64_t>(i) * c;
            for (int j = 0; j < c; ++j) gxr[j] += yr[j] * (gr[j] - dot);
        }
    });
}

Var Tape::gelu(Var x) {
    check(x);
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (size_t i = 0; i < tx.data.size(); ++i) {
        const double v = tx.data[i];
        const double inner = kSqrt2OverPi * (v + kGeluCoef * v * v * v);
        out.data[i] = 0.5 * v * (1.0 + std::tanh(inner));
    }
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        const Tensor& vx = t.val(Var{ix});
        for (size_t i = 0; i < g.data.size(); ++i) {
            const double v = vx.data[i];
            const double inner = kSqrt2OverPi * (v + kGeluCoef * v * v * v);
            const double th = std::tanh(inner);
            const double dinner = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoef * v * v);
            const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner;
            gx.data[i] += g.data[i] * d;
        }
    });
}

Var Tape::silu(Var x) {
    check(x);
    const Tensor& tx = val(x);
    Tensor out(tx.shape);
    for (size_t i = 0; i < tx.data.size(); ++i) {
        const double v = tx.data[i];
        out.data[i] = v / (1.0 + std::exp(-v));
    }
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        const Tensor& vx = t.val(Var{ix});
        for (size_t i = 0; i < g.data.size(); ++i) {
            const double v = vx.data[i];
            const double sig = 1.0 / (1.0 + std::exp(-v));
            gx.data[i] += g.data[i] * sig * (1.0 + v * (1.0 - sig));
        }
    });
}

Var Tape::concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw ArgumentError("tape.concat_rows: empty input");
    int total = 0, c = -1;
    bool track = false;
    for (Var v : xs) {
        check(v);
        int r, cc;
        rows_cols(val(v), r, cc);
        if (c < 0) c = cc;
        if (cc != c) throw ShapeError("tape.concat_rows: column mismatch");
        total += r;
        track = track || tracked(v);
    }
    Tensor out({total, c});
    int at = 0;
    std::vector<int> ids;
    std::vector<int> row_of;
    for (Var v : xs) {
        const Tensor& tv = val(v);
        int r, cc;
        rows_cols(tv, r, cc);
        std::memcpy(out.data.data() + static_cast<int64_t>(at) * c, tv.data.data(),
                    tv.data.size() * sizeof(double));
        ids.push_back(v.id);
        row_of.push_back(at);
        at += r;
    }
    return push(std::move(out), track,
                [ids = std::move(ids), row_of = std::move(row_of), c](Tape& t, const Tensor& g) {
                    for (size_t p = 0; p < ids.size(); ++p) {
                        if (!t.tracked(Var{ids[p]})) continue;
                        Tensor& gp = t.grad_buf(ids[p]);
                        const double* src =
                            g.data.data() + static_cast<int64_t>(row_of[p]) * c;
                        for (size_t i = 0; i < gp.data.size(); ++i) gp.data[i] += src[i];
                    }
                });
}

Var Tape::slice_rows(Var x, int r0, int r1) {
    check(x);
    const Tensor& tx = val(x);
    int r, c;
    rows_cols(tx, r, c);
    if (r0 < 0 || r1 > r || r0 >= r1) throw ArgumentError("tape.slice_rows: bad range");
    Tensor out({r1 - r0, c});
    std::memcpy(out.data.data(), tx.data.data() + static_cast<int64_t>(r0) * c,
                out.data.size() * sizeof(double));
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix, r0, c](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        double* dst = gx.data.data() + static_cast<int64_t>(r0) * c;
        for (size_t i = 0; i < g.data.size(); ++i) dst[i] += g.data[i];
    });
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw ArgumentError("tape.concat_cols: empty input");
    int total = 0, r = -1;
    bool track = false;
    for (Var v : xs) {
        check(v);
        int rr, cc;
        rows_cols(val(v), rr, cc);
        if (r < 0) r = rr;
        if (rr != r) throw ShapeError("tape.concat_cols: row mismatch");
        total += cc;
        track = track || tracked(v);
    }
    Tensor out({r, total});
    std::vector<int> ids, col_of, widths;
    int at = 0;
    for (Var v : xs) {
        const Tensor& tv = val(v);
        int rr, cc;
        rows_cols(tv, rr, cc);
        for (int i = 0; i < r; ++i)
            std::memcpy(out.data.data() + static_cast<int64_t>(i) * total + at,
                        tv.data.data() + static_cast<int64_t>(i) * cc, cc * sizeof(double));
        ids.push_back(v.id);
        col_of.push_back(at);
        widths.push_back(cc);
        at += cc;
    }
    return push(std::move(out), track,
                [ids = std::move(ids), col_of = std::move(col_of), widths = std::move(widths), r,
                 total](Tape& t, const Tensor& g) {
                    for (size_t p = 0; p < ids.size(); ++p) {
                        if (!t.tracked(Var{ids[p]})) continue;
                        Tensor& gp = t.grad_buf(ids[p]);
                        const int w = widths[p];
                        for (int i = 0; i < r; ++i) {
                            const double* src =
                                g.data.data() + static_cast<int64_t>(i) * total + col_of[p];
                            double* dst = gp.data.data() + static_cast<int64_t>(i) * w;
                            for (int j = 0; j < w; ++j) dst[j] += src[j];
                        }
                    }
                });
}

Var Tape::slice_cols(Var x, int c0, int c1) {
    check(x);
    const Tensor& tx = val(x);
    int r, c;
    rows_cols(tx, r, c);
    if (c0 < 0 || c1 > c || c0 >= c1) throw ArgumentError("tape.slice_cols: bad range");
    const int w = c1 - c0;
    Tensor out({r, w});
    for (int i = 0; i < r; ++i)
        std::memcpy(out.data.data() + static_cast<int64_t>(i) * w,
                    tx.data.data() + static_cast<int64_t>(i) * c + c0, w * sizeof(double));
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix, c0, c, w, r](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        for (int i = 0; i < r; ++i) {
            const double* src = g.data.data() + static_cast<int64_t>(i) * w;
            double* dst = gx.data.data() + static_cast<int64_t>(i) * c + c0;
            for (int j = 0; j < w; ++j) dst[j] += src[j];
        }
    });
}

Var Tape::reshape(Var x, std::vector<int> shape) {
    check(x);
    const Tensor& tx = val(x);
    if (Tensor::count(shape) != tx.numel())
        throw ShapeError("tape.reshape: element count mismatch");
    Tensor out(std::move(shape), tx.data);
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
    });
}

Var Tape::mean_rows(Var x) {
    check(x);
    const Tensor& tx = val(x);
    int r, c;
    rows_cols(tx, r, c);
    Tensor out({1, c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.data[static_cast<size_t>(j)] += tx.at(i, j);
    for (auto& v : out.data) v /= r;
    const int ix = x.id;
    return push(std::move(out), tracked(x), [ix, r, c](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                gx.data[static_cast<size_t>(i) * c + j] += g.data[static_cast<size_t>(j)] / r;
    });
}

Var Tape::sum(Var x) {
    check(x);
    const Tensor& tx = val(x);
    double s = 0.0;
    for (double v : tx.data) s += v;
    const int ix = x.id;
    return push(Tensor({1}, {s}), tracked(x), [ix](Tape& t, const Tensor& g) {
        if (!t.tracked(Var{ix})) return;
        Tensor& gx = t.grad_buf(ix);
        for (auto& v : gx.data) v += g.data[0];
    });
}

Var Tape::mse(Var pred, Tensor target) {
    check(pred);
    const Tensor& tp = val(pred);
    if (!tp.same_shape(target))
        throw ShapeError("tape.mse: shape mismatch " + tp.shape_str() + " vs " +
                         target.shape_str());
    const double n = static_cast<double>(tp.numel());
    double s = 0.0;
    for (size_t i = 0; i < tp.data.size(); ++i) {
        const double d = tp.data[i] - target.data[i];
        s += d * d;
    }
    const int ip = pred.id;
    return push(Tensor({1}, {s / n}), tracked(pred),
                [ip, target = std::move(target), n](Tape& t, const Tensor& g) {
                    if (!t.tracked(Var{ip})) return;
                    Tensor& gp = t.grad_buf(ip);
                    const Tensor& vp = t.val(Var{ip});
                    const double k = 2.0 * g.data[0] / n;
                    for (size_t i = 0; i < gp.data.size(); ++i)
                        gp.data[i] += k * (vp.data[i] - target.data[i]);
                });
}

void Tape::backward(Var loss) {
    check(loss);
    if (val(loss).numel() != 1) throw ArgumentError("tape.backward: loss must be scalar");
    if (!nodes_[static_cast<size_t>(loss.id)].needs_grad)
        throw ArgumentError("tape.backward: loss does not depend on any parameter");
    grad_buf(loss.id).data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.needs_grad || !n.back || n.grd.numel() == 0) continue;
        n.back(*this, n.grd);
    }
}

}  // namespace saldiff
