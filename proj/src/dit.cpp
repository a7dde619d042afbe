#include "saldiff/dit.hpp"

#include <cmath>

namespace saldiff {

Conditioning parse_conditioning(const std::string& name) {
    if (name == "decoupled") return Conditioning::kDecoupled;
    if (name == "undecoupled") return Conditioning::kUndecoupled;
    throw ConfigError("unknown conditioning mode \"" + name + "\"");
}

std::string conditioning_name(Conditioning c) {
    return c == Conditioning::kDecoupled ? "decoupled" : "undecoupled";
}

void ModelConfig::validate() const {
    if (map_h <= 0 || map_w <= 0 || patch <= 0) throw ConfigError("model: bad map/patch size");
    if (map_h % patch != 0 || map_w % patch != 0)
        throw ConfigError("model: map size must be divisible by patch");
    if (d_model <= 0 || d_model % 2 != 0) throw ConfigError("model: d_model must be even");
    if (heads <= 0 || d_model % heads != 0)
        throw ConfigError("model: d_model must be divisible by heads");
    if (depth < 1) throw ConfigError("model: depth must be >= 1");
    if (mlp_ratio <= 0.0) throw ConfigError("model: mlp_ratio must be positive");
}

namespace {

Tensor glorot(SeededRng& rng, int in_dim, int out_dim) {
    Tensor w({in_dim, out_dim});
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& v : w.data) v = rng.normal() * scale;
    return w;
}

// Multi-head attention over already-projected q/k/v, one slice per head.
Var attention(Tape& t, Var q, Var k, Var v, int heads, int d_head) {
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
    std::vector<Var> ctx;
    for (int h = 0; h < heads; ++h) {
        Var qh = t.slice_cols(q, h * d_head, (h + 1) * d_head);
        Var kh = t.slice_cols(k, h * d_head, (h + 1) * d_head);
        Var vh = t.slice_cols(v, h * d_head, (h + 1) * d_head);
        Var attn = t.softmax(t.scale(t.matmul_nt(qh, kh), inv_sqrt));
        ctx.push_back(t.matmul(attn, vh));
    }
    return t.concat_cols(ctx);
}

}  // namespace

DitParams DitParams::init(const ModelConfig& cfg, SeededRng& rng) {
    cfg.validate();
    const int d = cfg.d_model;
    DitParams p;
    p.cfg = cfg;
    p.patch_w = glorot(rng, cfg.patch_dim(), d);
    p.patch_b = Tensor::zeros({d});
    p.pos_emb = rng.normal_tensor({cfg.tokens(), d});
    for (auto& v : p.pos_emb.data) v *= 0.02;
    p.time_w1 = glorot(rng, d, d);
    p.time_b1 = Tensor::zeros({d});
    p.time_w2 = glorot(rng, d, d);
    p.time_b2 = Tensor::zeros({d});
    if (cfg.conditioning == Conditioning::kUndecoupled) {
        p.cond_time_w = glorot(rng, d, d);
        p.cond_time_b = Tensor::zeros({d});
    }
    for (int i = 0; i < cfg.depth; ++i) {
        BlockParams b;
        b.w_qkv = glorot(rng, d, 3 * d);
        b.b_qkv = Tensor::zeros({3 * d});
        b.w_attn_out = glorot(rng, d, d);
        b.b_attn_out = Tensor::zeros({d});
        if (cfg.conditioning == Conditioning::kDecoupled) {
            b.w_mca_q = glorot(rng, d, d);
            b.b_mca_q = Tensor::zeros({d});
            b.w_mca_k = glorot(rng, d, d);
            b.b_mca_k = Tensor::zeros({d});
            b.w_mca_v = glorot(rng, d, d);
            b.b_mca_v = Tensor::zeros({d});
            // adaLN-Zero style: the conditional branch starts silent.
            b.w_mca_out = Tensor::zeros({d, d});
            b.b_mca_out = Tensor::zeros({d});
        }
        b.w_fc1 = glorot(rng, d, cfg.mlp_hidden());
        b.b_fc1 = Tensor::zeros({cfg.mlp_hidden()});
        b.w_fc2 = glorot(rng, cfg.mlp_hidden(), d);
        b.b_fc2 = Tensor::zeros({d});
        for (int m = 0; m < 6; ++m) {
            b.mod_w[m] = Tensor::zeros({d, d});
            b.mod_b[m] = Tensor::zeros({d});
        }
        p.blocks.push_back(std::move(b));
    }
    p.head_w = Tensor::zeros({d, cfg.patch_dim()});
    p.head_b = Tensor::zeros({cfg.patch_dim()});
    return p;
}

DitVars bind_dit(Tape& t, const DitParams& p) {
    DitVars v;
    auto bind = [&](const Tensor& x) { return x.numel() > 0 ? t.param(x) : Var{}; };
    v.patch_w = bind(p.patch_w);
    v.patch_b = bind(p.patch_b);
    v.pos_emb = bind(p.pos_emb);
    v.time_w1 = bind(p.time_w1);
    v.time_b1 = bind(p.time_b1);
    v.time_w2 = bind(p.time_w2);
    v.time_b2 = bind(p.time_b2);
    v.cond_time_w = bind(p.cond_time_w);
    v.cond_time_b = bind(p.cond_time_b);
    for (const BlockParams& b : p.blocks) {
        BlockVars bv;
        bv.w_qkv = bind(b.w_qkv);
        bv.b_qkv = bind(b.b_qkv);
        bv.w_attn_out = bind(b.w_attn_out);
        bv.b_attn_out = bind(b.b_attn_out);
        bv.w_mca_q = bind(b.w_mca_q);
        bv.b_mca_q = bind(b.b_mca_q);
        bv.w_mca_k = bind(b.w_mca_k);
        bv.b_mca_k = bind(b.b_mca_k);
        bv.w_mca_v = bind(b.w_mca_v);
        bv.b_mca_v = bind(b.b_mca_v);
        bv.w_mca_out = bind(b.w_mca_out);
        bv.b_mca_out = bind(b.b_mca_out);
        bv.w_fc1 = bind(b.w_fc1);
        bv.b_fc1 = bind(b.b_fc1);
        bv.w_fc2 = bind(b.w_fc2);
        bv.b_fc2 = bind(b.b_fc2);
        for (int m = 0; m < 6; ++m) {
            bv.mod_w[m] = bind(b.mod_w[m]);
            bv.mod_b[m] = bind(b.mod_b[m]);
        }
        v.blocks.push_back(bv);
    }
    v.head_w = bind(p.head_w);
    v.head_b = bind(p.head_b);
    return v;
}

Tensor timestep_embedding(int t, int d_model) {
    if (d_model % 2 != 0) throw ConfigError("timestep_embedding: d_model must be even");
    Tensor e({1, d_model});
    const int half = d_model / 2;
    for (int k = 0; k < half; ++k) {
        const double freq = std::pow(10000.0, -2.0 * k / static_cast<double>(d_model));
        e.data[static_cast<size_t>(k)] = std::sin(t * freq);
        e.data[static_cast<size_t>(half + k)] = std::cos(t * freq);
    }
    return e;
}

Tensor patchify(const Tensor& map, int patch) {
    if (map.rank() != 2) throw ShapeError("patchify: expected 2-D map");
    if (patch <= 0 || map.rows() % patch != 0 || map.cols() % patch != 0)
        throw ShapeError("patchify: " + map.shape_str() + " not divisible by patch " +
                         std::to_string(patch));
    const int gh = map.rows() / patch, gw = map.cols() / patch;
    Tensor out({gh * gw, patch * patch});
    for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
            double* dst = out.data.data() + (static_cast<int64_t>(pr) * gw + pc) * patch * patch;
            for (int i = 0; i < patch; ++i)
                for (int j = 0; j < patch; ++j)
                    dst[i * patch + j] = map.at(pr * patch + i, pc * patch + j);
        }
    return out;
}

Tensor unpatchify(const Tensor& tokens, int map_h, int map_w, int patch) {
    const int gh = map_h / patch, gw = map_w / patch;
    if (tokens.rank() != 2 || tokens.rows() != gh * gw || tokens.cols() != patch * patch)
        throw ShapeError("unpatchify: token shape " + tokens.shape_str() + " mismatch");
    Tensor map({map_h, map_w});
    for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
            const double* src =
                tokens.data.data() + (static_cast<int64_t>(pr) * gw + pc) * patch * patch;
            for (int i = 0; i < patch; ++i)
                for (int j = 0; j < patch; ++j)
                    map.at(pr * patch + i, pc * patch + j) = src[i * patch + j];
        }
    return map;
}

Var embed_timestep(Tape& t, int step, const DitVars& v, const ModelConfig& cfg) {
    if (step < 0 || step > 1000) throw ArgumentError("embed_timestep: step out of [0,1000]");
    Var sinusoid = t.value(timestep_embedding(step, cfg.d_model));
    Var h = t.silu(t.add_rowvec(t.matmul(sinusoid, v.time_w1), v.time_b1));
    return t.add_rowvec(t.matmul(h, v.time_w2), v.time_b2);  // [1, d]
}

ModulationVars modulation(Tape& t, Var time_emb, const BlockVars& b) {
    Var shared = t.silu(time_emb);  // [1, d]
    const int d = t.val(time_emb).cols();
    auto head = [&](int i) {
        return t.reshape(t.add_rowvec(t.matmul(shared, b.mod_w[i]), b.mod_b[i]), {d});
    };
    ModulationVars m;
    m.msa_scale = head(0);
    m.msa_shift = head(1);
    m.msa_gate = head(2);
    m.mlp_scale = head(3);
    m.mlp_shift = head(4);
    m.mlp_gate = head(5);
    return m;
}

Var block_forward(Tape& t, Var tokens, Var cond, const ModulationVars& m, const BlockVars& b,
                  const ModelConfig& cfg) {
    const int d = cfg.d_model;
    if (t.val(tokens).cols() != d) throw ShapeError("block_forward: token width mismatch");
    const int d_head = d / cfg.heads;

    // N1 = (1 + msa_scale) . LN(N) + msa_shift
    Var n1 = t.add_rowvec(t.mul_rowvec(t.layer_norm(tokens), t.add_const(m.msa_scale, 1.0)),
                          m.msa_shift);

    // N2 = N + msa_gate . MSA(N1)
    Var qkv = t.add_rowvec(t.matmul(n1, b.w_qkv), b.b_qkv);
    Var q = t.slice_cols(qkv, 0, d);
    Var k = t.slice_cols(qkv, d, 2 * d);
    Var v = t.slice_cols(qkv, 2 * d, 3 * d);
    Var msa = t.add_rowvec(t.matmul(attention(t, q, k, v, cfg.heads, d_head), b.w_attn_out),
                           b.b_attn_out);
    Var n2 = t.add(tokens, t.mul_rowvec(msa, m.msa_gate));

    // N3 = N2 + LN(MCA(N2, C)); skipped entirely in undecoupled mode.
    Var n3 = n2;
    if (cfg.conditioning == Conditioning::kDecoupled) {
        if (t.val(cond).cols() != d)
            throw ShapeError("block_forward: condition width " +
                             std::to_string(t.val(cond).cols()) + " != d_model");
        Var mq = t.add_rowvec(t.matmul(n2, b.w_mca_q), b.b_mca_q);
        Var mk = t.add_rowvec(t.matmul(cond, b.w_mca_k), b.b_mca_k);
        Var mv = t.add_rowvec(t.matmul(cond, b.w_mca_v), b.b_mca_v);
        Var mca = t.add_rowvec(
            t.matmul(attention(t, mq, mk, mv, cfg.heads, d_head), b.w_mca_out), b.b_mca_out);
        n3 = t.add(n2, t.layer_norm(mca));
    }

    // N4 = (1 + mlp_scale) . LN(N3) + mlp_shift
    Var n4 = t.add_rowvec(t.mul_rowvec(t.layer_norm(n3), t.add_const(m.mlp_scale, 1.0)),
                          m.mlp_shift);

    // N5 = N3 + mlp_gate . MLP(N4)
    Var mlp = t.add_rowvec(
        t.matmul(t.gelu(t.add_rowvec(t.matmul(n4, b.w_fc1), b.b_fc1)), b.w_fc2), b.b_fc2);
    return t.add(n3, t.mul_rowvec(mlp, m.mlp_gate));
}

DitForward dit_forward(Tape& t, const Tensor& noisy_map, int step, Var cond, const DitVars& v,
                       const ModelConfig& cfg) {
    if (noisy_map.rows() != cfg.map_h || noisy_map.cols() != cfg.map_w)
        throw ShapeError("dit_forward: map shape " + noisy_map.shape_str() + " mismatch");

    Var x = t.value(patchify(noisy_map, cfg.patch));
    x = t.add(t.add_rowvec(t.matmul(x, v.patch_w), v.patch_b), v.pos_emb);

    Var e = embed_timestep(t, step, v, cfg);
    if (cfg.conditioning == Conditioning::kUndecoupled) {
        // Table-IV "undecoupled" wiring: condition pooled into the timestep.
        Var pooled = t.mean_rows(cond);
        e = t.add(e, t.add_rowvec(t.matmul(pooled, v.cond_time_w), v.cond_time_b));
    }

    for (int i = 0; i < cfg.depth; ++i) {
        ModulationVars m = modulation(t, e, v.blocks[static_cast<size_t>(i)]);
        x = block_forward(t, x, cond, m, v.blocks[static_cast<size_t>(i)], cfg);
        if (!t.val(x).all_finite())
            throw NumericError("dit_forward: non-finite activations after block " +
                               std::to_string(i));
    }

    Var y = t.add_rowvec(t.matmul(t.layer_norm(x), v.head_w), v.head_b);  // [L, p^2]

    DitForward out;
    out.tokens = y;
    out.map = unpatchify(t.val(y), cfg.map_h, cfg.map_w, cfg.patch);
    if (!out.map.all_finite()) throw NumericError("dit_forward: non-finite output map");
    return out;
}

}  // namespace saldiff
