#pragma once

#include <string>
#include <vector>

#include "saldiff/rng.hpp"
#include "saldiff/tape.hpp"

namespace saldiff {

enum class Conditioning { kDecoupled, kUndecoupled };

Conditioning parse_conditioning(const std::string& name);
std::string conditioning_name(Conditioning c);

struct ModelConfig {
    int map_h = 24, map_w = 40;
    int patch = 4;
    int d_model = 64;
    int heads = 4;
    int depth = 3;
    double mlp_ratio = 4.0;
    Conditioning conditioning = Conditioning::kDecoupled;

    int tokens() const { return (map_h / patch) * (map_w / patch); }
    int patch_dim() const { return patch * patch; }
    int mlp_hidden() const { return static_cast<int>(d_model * mlp_ratio); }
    void validate() const;
};

// Six per-block modulation vectors derived from the timestep embedding.
struct ModulationVars {
    Var msa_scale, msa_shift, msa_gate;
    Var mlp_scale, mlp_shift, mlp_gate;
};

struct BlockParams {
    Tensor w_qkv, b_qkv;          // [d, 3d]
    Tensor w_attn_out, b_attn_out;
    Tensor w_mca_q, b_mca_q;      // decoupled mode only
    Tensor w_mca_k, b_mca_k;
    Tensor w_mca_v, b_mca_v;
    Tensor w_mca_out, b_mca_out;  // zero-initialized
    Tensor w_fc1, b_fc1;          // [d, mlp_hidden]
    Tensor w_fc2, b_fc2;
    Tensor mod_w[6], mod_b[6];    // zero-initialized modulation heads
};

struct BlockVars {
    Var w_qkv, b_qkv, w_attn_out, b_attn_out;
    Var w_mca_q, b_mca_q, w_mca_k, b_mca_k, w_mca_v, b_mca_v, w_mca_out, b_mca_out;
    Var w_fc1, b_fc1, w_fc2, b_fc2;
    Var mod_w[6], mod_b[6];
};

struct DitParams {
    ModelConfig cfg;
    Tensor patch_w, patch_b;  // [p^2, d]
    Tensor pos_emb;           // [L, d], learned
    Tensor time_w1, time_b1, time_w2, time_b2;
    Tensor cond_time_w, cond_time_b;  // undecoupled mode only
    std::vector<BlockParams> blocks;
    Tensor head_w, head_b;  // zero-initialized final head [d, p^2]

    static DitParams init(const ModelConfig& cfg, SeededRng& rng);

    template <typename Fn>
    void visit(Fn&& fn) {
        auto emit = [&](const std::string& name, Tensor& t) {
            if (t.numel() > 0) fn("dit." + name, t);
        };
        emit("patch_w", patch_w);
        emit("patch_b", patch_b);
        emit("pos_emb", pos_emb);
        emit("time_w1", time_w1);
        emit("time_b1", time_b1);
        emit("time_w2", time_w2);
        emit("time_b2", time_b2);
        emit("cond_time_w", cond_time_w);
        emit("cond_time_b", cond_time_b);
        for (size_t i = 0; i < blocks.size(); ++i) {
            const std::string pre = "block" + std::to_string(i) + ".";
            BlockParams& b = blocks[i];
            emit(pre + "w_qkv", b.w_qkv);
            emit(pre + "b_qkv", b.b_qkv);
            emit(pre + "w_attn_out", b.w_attn_out);
            emit(pre + "b_attn_out", b.b_attn_out);
            emit(pre + "w_mca_q", b.w_mca_q);
            emit(pre + "b_mca_q", b.b_mca_q);
            emit(pre + "w_mca_k", b.w_mca_k);
            emit(pre + "b_mca_k", b.b_mca_k);
            emit(pre + "w_mca_v", b.w_mca_v);
            emit(pre + "b_mca_v", b.b_mca_v);
            emit(pre + "w_mca_out", b.w_mca_out);
            emit(pre + "b_mca_out", b.b_mca_out);
            emit(pre + "w_fc1", b.w_fc1);
            emit(pre + "b_fc1", b.b_fc1);
            emit(pre + "w_fc2", b.w_fc2);
            emit(pre + "b_fc2", b.b_fc2);
            for (int m = 0; m < 6; ++m) {
                emit(pre + "mod_w" + std::to_string(m), b.mod_w[m]);
                emit(pre + "mod_b" + std::to_string(m), b.mod_b[m]);
            }
        }
        emit("head_w", head_w);
        emit("head_b", head_b);
    }
};

struct DitVars {
    Var patch_w, patch_b, pos_emb;
    Var time_w1, time_b1, time_w2, time_b2;
    Var cond_time_w, cond_time_b;
    std::vector<BlockVars> blocks;
    Var head_w, head_b;
};

DitVars bind_dit(Tape& t, const DitParams& p);

// Raw sinusoidal embedding of an integer timestep: sin block then cos block,
// frequencies 10000^(-2k/d).
Tensor timestep_embedding(int t, int d_model);

// Non-overlapping row-major patches, each flattened row-major.
Tensor patchify(const Tensor& map, int patch);
Tensor unpatchify(const Tensor& tokens, int map_h, int map_w, int patch);

// Learned part of the timestep pathway: 2-layer MLP over the sinusoid.
Var embed_timestep(Tape& t, int step, const DitVars& v, const ModelConfig& cfg);

ModulationVars modulation(Tape& t, Var time_emb, const BlockVars& b);

Var block_forward(Tape& t, Var tokens, Var cond, const ModulationVars& m, const BlockVars& b,
                  const ModelConfig& cfg);

struct DitForward {
    Var tokens;  // [L, p^2] prediction in patch space
    Tensor map;  // unpatchified [H, W] value
};

// Full denoiser pass. `cond` must already be on the tape. In undecoupled
// mode the cross-attention stages are skipped and mean-pooled `cond` is
// projected and added to the timestep embedding instead.
DitForward dit_forward(Tape& t, const Tensor& noisy_map, int step, Var cond, const DitVars& v,
                       const ModelConfig& cfg);

}  // namespace saldiff
