#include "saldiff/sitr.hpp"

#include <cmath>

namespace saldiff {

FusionStrategy parse_fusion(const std::string& name) {
    if (name == "sitr") return FusionStrategy::kSitr;
    if (name == "concatenate") return FusionStrategy::kConcatenate;
    if (name == "repeat_add") return FusionStrategy::kRepeatAdd;
    if (name == "repeat_average") return FusionStrategy::kRepeatAverage;
    throw ConfigError("unknown fusion strategy \"" + name + "\"");
}

std::string fusion_name(FusionStrategy s) {
    switch (s) {
        case FusionStrategy::kSitr: return "sitr";
        case FusionStrategy::kConcatenate: return "concatenate";
        case FusionStrategy::kRepeatAdd: return "repeat_add";
        case FusionStrategy::kRepeatAverage: return "repeat_average";
    }
    throw ConfigError("invalid fusion strategy value");
}

namespace {

Tensor affine_init(SeededRng& rng, int in_dim, int out_dim) {
    Tensor w({in_dim, out_dim});
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& v : w.data) v = rng.normal() * scale;
    return w;
}

}  // namespace

SitrParams SitrParams::init(const SitrConfig& cfg, const FeatureConfig& feat,
                            FusionStrategy strategy, SeededRng& rng) {
    if (cfg.heads <= 0 || cfg.d_k <= 0) throw ConfigError("sitr: heads and d_k must be positive");
    SitrParams p;
    p.heads = cfg.heads;
    p.d_k = cfg.d_k;
    const int width = cfg.heads * cfg.d_k;
    if (strategy == FusionStrategy::kSitr) {
        p.w_q = affine_init(rng, feat.c_t, width);
        p.b_q = Tensor::zeros({width});
        p.w_k = affine_init(rng, feat.c_v, width);
        p.b_k = Tensor::zeros({width});
        p.w_v = affine_init(rng, feat.c_v, width);
        p.b_v = Tensor::zeros({width});
    } else {
        p.w_txt = affine_init(rng, feat.c_t, cfg.d_model);
        p.b_txt = Tensor::zeros({cfg.d_model});
    }
    p.w_vis = affine_init(rng, feat.c_v, cfg.d_model);
    p.b_vis = Tensor::zeros({cfg.d_model});
    p.w_aud = affine_init(rng, feat.c_a, cfg.d_model);
    p.b_aud = Tensor::zeros({cfg.d_model});
    return p;
}

SitrVars bind_sitr(Tape& t, const SitrParams& p) {
    SitrVars v;
    auto bind = [&](const Tensor& x) { return x.numel() > 0 ? t.param(x) : Var{}; };
    v.w_q = bind(p.w_q);
    v.b_q = bind(p.b_q);
    v.w_k = bind(p.w_k);
    v.b_k = bind(p.b_k);
    v.w_v = bind(p.w_v);
    v.b_v = bind(p.b_v);
    v.w_vis = bind(p.w_vis);
    v.b_vis = bind(p.b_vis);
    v.w_aud = bind(p.w_aud);
    v.b_aud = bind(p.b_aud);
    v.w_txt = bind(p.w_txt);
    v.b_txt = bind(p.b_txt);
    return v;
}

Tensor pool_visual_time(const VisualFeatures& v) {
    if (v.grid.rank() != 4) throw ShapeError("pool_visual_time: expected [t,h,w,c] grid");
    const int t = v.grid.shape[0], h = v.grid.shape[1], w = v.grid.shape[2], c = v.grid.shape[3];
    Tensor out({h * w, c});
    for (int ti = 0; ti < t; ++ti) {
        const double* src = v.grid.data.data() + static_cast<int64_t>(ti) * h * w * c;
        for (int64_t i = 0; i < static_cast<int64_t>(h) * w * c; ++i) out.data[i] += src[i];
    }
    for (auto& x : out.data) x /= t;
    return out;
}

Tensor area_downsample(const Tensor& map, int h, int w) {
    if (map.rank() != 2) throw ShapeError("area_downsample: expected 2-D map");
    if (h <= 0 || w <= 0 || map.rows() % h != 0 || map.cols() % w != 0)
        throw ShapeError("area_downsample: target " + std::to_string(h) + "x" +
                         std::to_string(w) + " does not divide " + map.shape_str());
    const int fr = map.rows() / h, fc = map.cols() / w;
    Tensor out({h, w});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = 0; i < fr; ++i)
                for (int j = 0; j < fc; ++j) acc += map.at(r * fr + i, c * fc + j);
            out.at(r, c) = acc / (fr * fc);
        }
    return out;
}

SitrForward response_maps(Tape& t, Var text_feat, Var visual_flat, const SitrVars& p, int heads,
                          int d_k) {
    if (d_k <= 0) throw ConfigError("response_maps: d_k must be positive");
    Var q = t.add_rowvec(t.matmul(text_feat, p.w_q), p.b_q);      // [n, h*dk]
    Var k = t.add_rowvec(t.matmul(visual_flat, p.w_k), p.b_k);    // [P, h*dk]
    Var v = t.add_rowvec(t.matmul(visual_flat, p.w_v), p.b_v);    // [P, h*dk]

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
    Var maps_sum;
    std::vector<Var> ctx;
    for (int h = 0; h < heads; ++h) {
        Var qh = t.slice_cols(q, h * d_k, (h + 1) * d_k);
        Var kh = t.slice_cols(k, h * d_k, (h + 1) * d_k);
        Var vh = t.slice_cols(v, h * d_k, (h + 1) * d_k);
        Var attn = t.softmax(t.scale(t.matmul_nt(qh, kh), inv_sqrt_dk));  // [n, P]
        ctx.push_back(t.matmul(attn, vh));                                // [n, dk]
        maps_sum = h == 0 ? attn : t.add(maps_sum, attn);
    }
    SitrForward out;
    out.maps = t.scale(maps_sum, 1.0 / heads);
    out.attended = t.concat_cols(ctx);
    return out;
}

int select_response_training(const Tensor& maps, const Tensor& gt, int h_v, int w_v) {
    if (maps.rank() != 2 || maps.cols() != h_v * w_v)
        throw ShapeError("select_response_training: maps/grid mismatch");
    bool all_zero = true;
    for (double v : gt.data)
        if (v != 0.0) {
            all_zero = false;
            break;
        }
    if (all_zero) return select_response_inference(maps);

    Tensor gtd = area_downsample(gt, h_v, w_v);
    int best = 0;
    double best_score = -1.0;
    for (int i = 0; i < maps.rows(); ++i) {
        double s = 0.0;
        for (int pidx = 0; pidx < maps.cols(); ++pidx)
            s += maps.at(i, pidx) * gtd.data[static_cast<size_t>(pidx)];
        if (s > best_score) {  // strict: ties keep the lowest index
            best_score = s;
            best = i;
        }
    }
    return best;
}

int select_response_inference(const Tensor& maps) {
    if (maps.rank() != 2 || maps.rows() < 1)
        throw ShapeError("select_response_inference: expected [n, P] maps");
    int best = 0;
    double best_score = -1.0;
    for (int i = 0; i < maps.rows(); ++i) {
        double s = 0.0;
        for (int pidx = 0; pidx < maps.cols(); ++pidx) {
            const double m = maps.at(i, pidx);
            s += m * m;
        }
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

Var build_condition(Tape& t, Var maps, int selected, Var visual_flat, Var audio_feat,
                    const SitrVars& p) {
    const Tensor& m = t.val(maps);
    if (selected < 0 || selected >= m.rows())
        throw ArgumentError("build_condition: selected index out of range");
    const int positions = m.cols();

    Var vis_tok = t.add_rowvec(t.matmul(visual_flat, p.w_vis), p.b_vis);  // [P, d_model]
    // Mean-one scaling: softmax mass 1 spread over P positions.
    Var sel = t.reshape(t.slice_rows(maps, selected, selected + 1), {positions});
    Var f_tv = t.scale_rows(vis_tok, t.scale(sel, static_cast<double>(positions)));

    Var aud_tok = t.add_rowvec(t.matmul(audio_feat, p.w_aud), p.b_aud);  // [t_a, d_model]
    return t.concat_rows({f_tv, aud_tok});
}

Var baseline_fuse(Tape& t, FusionStrategy strategy, Var text_feat, Var visual_flat,
                  Var audio_feat, const SitrVars& p) {
    Var vis_tok = t.add_rowvec(t.matmul(visual_flat, p.w_vis), p.b_vis);
    Var aud_tok = t.add_rowvec(t.matmul(audio_feat, p.w_aud), p.b_aud);

    switch (strategy) {
        case FusionStrategy::kConcatenate: {
            Var txt_tok = t.add_rowvec(t.matmul(text_feat, p.w_txt), p.b_txt);
            return t.concat_rows({vis_tok, aud_tok, txt_tok});
        }
        case FusionStrategy::kRepeatAdd: {
            Var tmean = t.mean_rows(text_feat);                               // [1, c_t]
            Var tproj = t.add_rowvec(t.matmul(tmean, p.w_txt), p.b_txt);      // [1, d_model]
            Var trow = t.reshape(tproj, {t.val(tproj).cols()});
            return t.concat_rows({t.add_rowvec(vis_tok, trow), aud_tok});
        }
        case FusionStrategy::kRepeatAverage: {
            Var tmean = t.mean_rows(text_feat);
            Var tproj = t.add_rowvec(t.matmul(tmean, p.w_txt), p.b_txt);
            Var trow = t.reshape(tproj, {t.val(tproj).cols()});
            Var mixed = t.scale(t.add_rowvec(vis_tok, trow), 0.5);
            return t.concat_rows({mixed, aud_tok});
        }
        case FusionStrategy::kSitr:
            throw ConfigError("baseline_fuse: use response_maps/build_condition for sitr");
    }
    throw ConfigError("baseline_fuse: invalid strategy");
}

}  // namespace saldiff
