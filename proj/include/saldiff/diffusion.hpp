#pragma once

#include <string>
#include <utility>
#include <vector>

#include "saldiff/dit.hpp"
#include "saldiff/features.hpp"
#include "saldiff/rng.hpp"
#include "saldiff/sitr.hpp"

namespace saldiff {

struct NoiseSchedule {
    int total_steps = 1000;          // T
    std::vector<double> beta;        // beta[t-1] = beta_t for t = 1..T
    std::vector<double> alpha_bar;   // [T+1], alpha_bar[0] = 1, strictly decreasing
};

// Linear beta ramp; alpha_bar by cumulative product.
NoiseSchedule make_schedule(int total_steps, double beta_min, double beta_max);

// S_t = sqrt(alpha_bar_t) * S0 + sqrt(1 - alpha_bar_t) * eps, 1 <= t <= T.
Tensor forward_noise(const Tensor& s0, int t, const Tensor& eps, const NoiseSchedule& sched);

// Deterministic DDIM update for an x0-predicting network:
//   eps_hat = (S_t - sqrt(ab_now) * S_pred) / sqrt(1 - ab_now)
//   S_next  = sqrt(ab_next) * S_pred + sqrt(1 - ab_next) * eps_hat
// With alpha_bar[0] = 1 the final step returns S_pred exactly.
Tensor ddim_step(const Tensor& s_t, const Tensor& s_pred, int t_now, int t_next,
                 const NoiseSchedule& sched);

// Equally spaced ladder {S*T/S, ..., 1*T/S, 0}; nearest-integer spacing when
// S does not divide T.
std::vector<int> ddim_times(int total_steps, int steps);

struct TrainConfig {
    double learning_rate = 1e-4;
    double lr_decay_factor = 0.2;
    int lr_patience = 5;
    double weight_decay = 1e-4;
    int batch_size = 16;
    int epochs = 12;
    uint64_t seed = 0;
    FusionStrategy fusion = FusionStrategy::kSitr;
};

struct InferenceConfig {
    int steps = 4;
    uint64_t seed = 0;
};

// All learnable parameters: SITR projections plus the denoiser.
struct TrainState {
    SitrParams sitr;
    DitParams dit;

    template <typename Fn>
    void visit(Fn&& fn) {
        sitr.visit(fn);
        dit.visit(fn);
    }

    int64_t param_count() {
        int64_t n = 0;
        visit([&](const std::string&, Tensor& t) { n += t.numel(); });
        return n;
    }
};

// Per-sample inputs with the temporal pooling already applied.
struct PreparedSample {
    Tensor visual_flat;  // [h_v*w_v, c_v]
    int grid_h = 0, grid_w = 0;
    Tensor audio;        // [t_a, c_a]
    Tensor text;         // [n, c_t]
    Tensor gt;           // [H, W]
    std::vector<std::pair<int, int>> fixations;
};

PreparedSample prepare_sample(const DatasetSample& s);

struct BoundModel {
    SitrVars sitr;
    DitVars dit;
};

// Binds every parameter as a tape leaf. Must be called on an empty tape so
// gradient readout can address leaves by visitation order.
BoundModel bind_model(Tape& tape, const TrainState& state);

// Gradients in visit() order after backward().
std::vector<Tensor> collect_param_grads(const Tape& tape, TrainState& state);

// Condition tokens on the tape. Training-time SITR selection uses the
// ground truth; inference-time selection uses map concentration.
Var condition_on_tape(Tape& tape, const BoundModel& bm, const TrainState& state,
                      const PreparedSample& ps, FusionStrategy strategy, const Tensor* gt);

// Condition token values for inference (no gradients kept).
Tensor condition_values(const TrainState& state, const PreparedSample& ps,
                        FusionStrategy strategy);

// AdamW: adaptive moments with decoupled weight decay.
class AdamW {
public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    void step(TrainState& state, const std::vector<Tensor>& grads);

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// One optimization step over a batch (Alg. 1 lines 2-8): per-sample noise
// draw, SITR conditioning, denoiser forward, pixel MSE, averaged gradients.
// Samples are processed in parallel; the gradient reduction is serial in
// sample order so results do not depend on the thread count.
double train_step(const std::vector<const PreparedSample*>& batch, TrainState& state,
                  AdamW& opt, const NoiseSchedule& sched, SeededRng& rng,
                  const TrainConfig& cfg);

// Validation objective with the same per-sample (t, eps) draws for a given
// seed, so epoch-over-epoch values are comparable.
double eval_loss(const std::vector<PreparedSample>& samples, TrainState& state,
                 const NoiseSchedule& sched, uint64_t seed, FusionStrategy strategy);

// Alg. 2: start from seeded Gaussian noise and iterate forward + DDIM down
// the ladder; output clamped to [0,1] as metric-facing post-processing.
Tensor sample_map(const PreparedSample& ps, TrainState& state, const NoiseSchedule& sched,
                  const InferenceConfig& icfg, FusionStrategy strategy);

// Checkpoint: magic "TAVD", version, embedded config text, then params in
// canonical name order as (name, rank, dims, f32 payload).
void save_checkpoint(const std::string& path, TrainState& state, const std::string& config_text);
struct LoadedCheckpoint {
    std::string config_text;
};
LoadedCheckpoint load_checkpoint(const std::string& path, TrainState& state);

}  // namespace saldiff
