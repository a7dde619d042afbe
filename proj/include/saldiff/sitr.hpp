#pragma once

#include <string>
#include <vector>

#include "saldiff/features.hpp"
#include "saldiff/tape.hpp"

namespace saldiff {

enum class FusionStrategy { kSitr, kConcatenate, kRepeatAdd, kRepeatAverage };

FusionStrategy parse_fusion(const std::string& name);
std::string fusion_name(FusionStrategy s);

struct SitrConfig {
    int heads = 4;
    int d_k = 16;
    int d_model = 64;
};

// Cross-attention projections (text queries against visual keys/values) plus
// the projections of visual/audio/text features into the denoiser width.
// Tensors for projections a fusion strategy does not use stay empty.
struct SitrParams {
    int heads = 0, d_k = 0;
    Tensor w_q, b_q;      // [c_t, heads*d_k]
    Tensor w_k, b_k;      // [c_v, heads*d_k]
    Tensor w_v, b_v;      // [c_v, heads*d_k]
    Tensor w_vis, b_vis;  // [c_v, d_model]
    Tensor w_aud, b_aud;  // [c_a, d_model]
    Tensor w_txt, b_txt;  // [c_t, d_model], baseline strategies only

    static SitrParams init(const SitrConfig& cfg, const FeatureConfig& feat,
                           FusionStrategy strategy, SeededRng& rng);

    template <typename Fn>
    void visit(Fn&& fn) {
        auto emit = [&](const char* name, Tensor& t) {
            if (t.numel() > 0) fn(std::string("sitr.") + name, t);
        };
        emit("w_q", w_q);
        emit("b_q", b_q);
        emit("w_k", w_k);
        emit("b_k", b_k);
        emit("w_v", w_v);
        emit("b_v", b_v);
        emit("w_vis", w_vis);
        emit("b_vis", b_vis);
        emit("w_aud", w_aud);
        emit("b_aud", b_aud);
        emit("w_txt", w_txt);
        emit("b_txt", b_txt);
    }
};

// Tape handles for one forward pass.
struct SitrVars {
    Var w_q, b_q, w_k, b_k, w_v, b_v, w_vis, b_vis, w_aud, b_aud, w_txt, b_txt;
};

SitrVars bind_sitr(Tape& t, const SitrParams& p);

// Mean over the temporal axis, flattened to [h_v*w_v, c_v].
Tensor pool_visual_time(const VisualFeatures& v);

// Area-average downsample of a [H, W] map to [h, w]; H, W must be multiples.
Tensor area_downsample(const Tensor& map, int h, int w);

struct SitrForward {
    Var maps;      // [n, h_v*w_v], head-averaged attention weights per token
    Var attended;  // [n, heads*d_k], value-attended vectors (retained)
};

// Per-token cross-attention response maps over the visual positions:
// softmax(Q_t^i K_v / sqrt(d_k)), head-averaged.
SitrForward response_maps(Tape& t, Var text_feat, Var visual_flat, const SitrVars& p, int heads,
                          int d_k);

// Training-time selection: argmax over tokens of sum(map .* downsampled gt).
// All-zero gt falls back to inference-time selection.
int select_response_training(const Tensor& maps, const Tensor& gt, int h_v, int w_v);

// Inference-time selection: argmax over tokens of sum(map^2); every softmax
// map sums to 1, so concentration is the discriminating statistic.
int select_response_inference(const Tensor& maps);

// Condition tokens: visual tokens projected to d_model and scaled per
// position by (h_v*w_v) * maps[selected], then projected audio tokens.
Var build_condition(Tape& t, Var maps, int selected, Var visual_flat, Var audio_feat,
                    const SitrVars& p);

// Table-V baseline fusions (concatenate / repeat_add / repeat_average).
Var baseline_fuse(Tape& t, FusionStrategy strategy, Var text_feat, Var visual_flat,
                  Var audio_feat, const SitrVars& p);

}  // namespace saldiff
