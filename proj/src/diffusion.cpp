#include "saldiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "saldiff/io.hpp"

namespace saldiff {

NoiseSchedule make_schedule(int total_steps, double beta_min, double beta_max) {
    if (total_steps < 1) throw ConfigError("make_schedule: need at least one step");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw ConfigError("make_schedule: need 0 < beta_min <= beta_max < 1");

    NoiseSchedule s;
    s.total_steps = total_steps;
    s.beta.resize(static_cast<size_t>(total_steps));
    for (int t = 1; t <= total_steps; ++t) {
        s.beta[static_cast<size_t>(t - 1)] =
            total_steps == 1
                ? beta_min
                : beta_min + (t - 1) * (beta_max - beta_min) / static_cast<double>(total_steps - 1);
    }
    s.alpha_bar.resize(static_cast<size_t>(total_steps) + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= total_steps; ++t)
        s.alpha_bar[static_cast<size_t>(t)] =
            s.alpha_bar[static_cast<size_t>(t - 1)] * (1.0 - s.beta[static_cast<size_t>(t - 1)]);
    return s;
}

Tensor forward_noise(const Tensor& s0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.total_steps)
        throw ArgumentError("forward_noise: t " + std::to_string(t) + " out of [1," +
                            std::to_string(sched.total_steps) + "]");
    if (!s0.same_shape(eps)) throw ShapeError("forward_noise: eps shape mismatch");
    const double ab = sched.alpha_bar[static_cast<size_t>(t)];
    const double s_sig = std::sqrt(ab), s_noise = std::sqrt(1.0 - ab);
    Tensor out(s0.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = s_sig * s0.data[i] + s_noise * eps.data[i];
    return out;
}

Tensor ddim_step(const Tensor& s_t, const Tensor& s_pred, int t_now, int t_next,
                 const NoiseSchedule& sched) {
    if (t_next >= t_now || t_next < 0 || t_now > sched.total_steps)
        throw ArgumentError("ddim_step: need 0 <= t_next < t_now <= T");
    if (!s_t.same_shape(s_pred)) throw ShapeError("ddim_step: shape mismatch");
    const double ab_now = sched.alpha_bar[static_cast<size_t>(t_now)];
    const double ab_next = sched.alpha_bar[static_cast<size_t>(t_next)];
    const double sn = std::sqrt(ab_now), nn = std::sqrt(1.0 - ab_now);
    const double sx = std::sqrt(ab_next), nx = std::sqrt(1.0 - ab_next);
    Tensor out(s_t.shape);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double eps_hat = (s_t.data[i] - sn * s_pred.data[i]) / nn;
        out.data[i] = sx * s_pred.data[i] + nx * eps_hat;
    }
    return out;
}

std::vector<int> ddim_times(int total_steps, int steps) {
    if (steps < 1 || steps > total_steps)
        throw ConfigError("ddim_times: steps must be in [1, T]");
    std::vector<int> times;
    times.reserve(static_cast<size_t>(steps) + 1);
    for (int i = steps; i >= 0; --i)
        times.push_back(static_cast<int>(
            std::llround(static_cast<double>(i) * total_steps / static_cast<double>(steps))));
    // Nearest-integer spacing can collide for steps close to T.
    for (size_t i = 1; i < times.size(); ++i)
        if (times[i] >= times[i - 1]) throw ConfigError("ddim_times: non-decreasing ladder");
    return times;
}

PreparedSample prepare_sample(const DatasetSample& s) {
    if (s.visual.grid.rank() != 4) throw ShapeError("prepare_sample: expected [t,h,w,c] grid");
    PreparedSample p;
    p.visual_flat = pool_visual_time(s.visual);
    p.grid_h = s.visual.grid.shape[1];
    p.grid_w = s.visual.grid.shape[2];
    p.audio = s.audio.tokens;
    p.text = s.text.tokens;
    p.gt = s.gt_map;
    p.fixations = s.fixations;
    return p;
}

BoundModel bind_model(Tape& tape, const TrainState& state) {
    if (tape.size() != 0) throw ArgumentError("bind_model: tape must be empty");
    BoundModel bm;
    bm.sitr = bind_sitr(tape, state.sitr);
    bm.dit = bind_dit(tape, state.dit);
    return bm;
}

std::vector<Tensor> collect_param_grads(const Tape& tape, TrainState& state) {
    std::vector<Tensor> grads;
    int idx = 0;
    state.visit([&](const std::string& name, Tensor& t) {
        const Tensor& g = tape.grad(Var{idx});
        if (!g.same_shape(t))
            throw ShapeError("collect_param_grads: leaf order mismatch at " + name);
        grads.push_back(g);
        ++idx;
    });
    return grads;
}

Var condition_on_tape(Tape& tape, const BoundModel& bm, const TrainState& state,
                      const PreparedSample& ps, FusionStrategy strategy, const Tensor* gt) {
    Var f_t = tape.value(ps.text);
    Var f_v = tape.value(ps.visual_flat);
    Var f_a = tape.value(ps.audio);
    if (strategy != FusionStrategy::kSitr)
        return baseline_fuse(tape, strategy, f_t, f_v, f_a, bm.sitr);

    SitrForward sf = response_maps(tape, f_t, f_v, bm.sitr, state.sitr.heads, state.sitr.d_k);
    // Selection is a detached argmax; gradients reach the text/visual
    // projections only through the selected map's attention weights.
    const int selected =
        gt != nullptr
            ? select_response_training(tape.val(sf.maps), *gt, ps.grid_h, ps.grid_w)
            : select_response_inference(tape.val(sf.maps));
    return build_condition(tape, sf.maps, selected, f_v, f_a, bm.sitr);
}

Tensor condition_values(const TrainState& state, const PreparedSample& ps,
                        FusionStrategy strategy) {
    Tape tape;
    BoundModel bm = bind_model(tape, state);
    Var c = condition_on_tape(tape, bm, state, ps, strategy, nullptr);
    return tape.val(c);
}

void AdamW::step(TrainState& state, const std::vector<Tensor>& grads) {
    ++t_;
    if (m_.empty()) {
        for (const Tensor& g : grads) {
            m_.push_back(Tensor::zeros(g.shape));
            v_.push_back(Tensor::zeros(g.shape));
        }
    }
    if (m_.size() != grads.size()) throw ArgumentError("AdamW: gradient count changed");

    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    size_t idx = 0;
    state.visit([&](const std::string&, Tensor& p) {
        const Tensor& g = grads[idx];
        Tensor& m = m_[idx];
        Tensor& v = v_[idx];
        for (size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
            const double mh = m.data[i] / bc1;
            const double vh = v.data[i] / bc2;
            p.data[i] -= lr_ * (mh / (std::sqrt(vh) + eps_) + wd_ * p.data[i]);
        }
        ++idx;
    });
}

namespace {

struct SampleLossResult {
    double loss = 0.0;
    std::vector<Tensor> grads;
};

SampleLossResult sample_loss_and_grads(const PreparedSample& ps, TrainState& state,
                                       const Tensor& noisy, int t_step, FusionStrategy strategy,
                                       bool with_grads) {
    Tape tape;
    BoundModel bm = bind_model(tape, state);
    Var cond = condition_on_tape(tape, bm, state, ps, strategy, &ps.gt);
    DitForward fwd = dit_forward(tape, noisy, t_step, cond, bm.dit, state.dit.cfg);
    Var loss = tape.mse(fwd.tokens, patchify(ps.gt, state.dit.cfg.patch));
    SampleLossResult out;
    out.loss = tape.val(loss).data[0];
    if (with_grads) {
        tape.backward(loss);
        out.grads = collect_param_grads(tape, state);
    }
    return out;
}

}  // namespace

double train_step(const std::vector<const PreparedSample*>& batch, TrainState& state, AdamW& opt,
                  const NoiseSchedule& sched, SeededRng& rng, const TrainConfig& cfg) {
    if (batch.empty()) throw ArgumentError("train_step: empty batch");
    const int n = static_cast<int>(batch.size());

    // Draw (t, eps) serially so results are independent of thread count.
    std::vector<int> steps(static_cast<size_t>(n));
    std::vector<Tensor> noisy(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        steps[static_cast<size_t>(i)] = rng.uniform_int(1, sched.total_steps);
        Tensor eps = rng.normal_tensor(batch[static_cast<size_t>(i)]->gt.shape);
        noisy[static_cast<size_t>(i)] = forward_noise(batch[static_cast<size_t>(i)]->gt,
                                                      steps[static_cast<size_t>(i)], eps, sched);
    }

    std::vector<SampleLossResult> results(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
        results[static_cast<size_t>(i)] =
            sample_loss_and_grads(*batch[static_cast<size_t>(i)], state,
                                  noisy[static_cast<size_t>(i)], steps[static_cast<size_t>(i)],
                                  cfg.fusion, true);
    }

    // Serial reduction in sample order.
    double loss = 0.0;
    std::vector<Tensor> grads = std::move(results[0].grads);
    loss += results[0].loss;
    for (int i = 1; i < n; ++i) {
        loss += results[static_cast<size_t>(i)].loss;
        for (size_t p = 0; p < grads.size(); ++p) {
            const Tensor& g = results[static_cast<size_t>(i)].grads[p];
            for (size_t j = 0; j < grads[p].data.size(); ++j) grads[p].data[j] += g.data[j];
        }
    }
    loss /= n;
    for (auto& g : grads)
        for (auto& v : g.data) v /= n;

    if (!std::isfinite(loss))
        throw NumericError("train_step: non-finite loss (lr " + std::to_string(opt.lr()) + ")");

    opt.step(state, grads);
    return loss;
}

double eval_loss(const std::vector<PreparedSample>& samples, TrainState& state,
                 const NoiseSchedule& sched, uint64_t seed, FusionStrategy strategy) {
    if (samples.empty()) throw ArgumentError("eval_loss: no samples");
    const int n = static_cast<int>(samples.size());
    SeededRng rng(seed);
    std::vector<int> steps(static_cast<size_t>(n));
    std::vector<Tensor> noisy(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        steps[static_cast<size_t>(i)] = rng.uniform_int(1, sched.total_steps);
        Tensor eps = rng.normal_tensor(samples[static_cast<size_t>(i)].gt.shape);
        noisy[static_cast<size_t>(i)] = forward_noise(samples[static_cast<size_t>(i)].gt,
                                                      steps[static_cast<size_t>(i)], eps, sched);
    }
    std::vector<double> losses(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
        losses[static_cast<size_t>(i)] =
            sample_loss_and_grads(samples[static_cast<size_t>(i)], state,
                                  noisy[static_cast<size_t>(i)], steps[static_cast<size_t>(i)],
                                  strategy, false)
                .loss;
    }
    double acc = 0.0;
    for (double l : losses) acc += l;
    return acc / n;
}

Tensor sample_map(const PreparedSample& ps, TrainState& state, const NoiseSchedule& sched,
                  const InferenceConfig& icfg, FusionStrategy strategy) {
    const ModelConfig& mc = state.dit.cfg;
    Tensor cond = condition_values(state, ps, strategy);

    SeededRng rng(icfg.seed);
    Tensor s_t = rng.normal_tensor({mc.map_h, mc.map_w});

    const std::vector<int> times = ddim_times(sched.total_steps, icfg.steps);
    for (size_t i = 0; i + 1 < times.size(); ++i) {
        const int t_now = times[i], t_next = times[i + 1];
        Tape tape;
        BoundModel bm = bind_model(tape, state);
        Var c = tape.value(cond);
        DitForward fwd = dit_forward(tape, s_t, t_now, c, bm.dit, mc);
        s_t = ddim_step(s_t, fwd.map, t_now, t_next, sched);
    }
    for (auto& v : s_t.data) v = std::clamp(v, 0.0, 1.0);
    return s_t;
}

void save_checkpoint(const std::string& path, TrainState& state, const std::string& config_text) {
    io::ByteWriter w;
    w.bytes("TAVD", 4);
    w.u16(1);
    w.str(config_text);

    std::map<std::string, const Tensor*> ordered;
    state.visit([&](const std::string& name, Tensor& t) { ordered[name] = &t; });
    w.u32(static_cast<uint32_t>(ordered.size()));
    for (const auto& [name, t] : ordered) {
        w.str(name);
        w.u32(static_cast<uint32_t>(t->shape.size()));
        for (int d : t->shape) w.u32(static_cast<uint32_t>(d));
        for (double v : t->data) w.f32(static_cast<float>(v));
    }
    io::write_file(path, w.data());
}

LoadedCheckpoint load_checkpoint(const std::string& path, TrainState& state) {
    io::ByteReader r(io::read_file(path));
    char magic[4];
    for (char& ch : magic) ch = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "TAVD") throw DataError("bad checkpoint magic in " + path);
    if (r.u16() != 1) throw DataError("unsupported checkpoint version in " + path);

    LoadedCheckpoint out;
    out.config_text = r.str();

    const uint32_t count = r.u32();
    std::map<std::string, Tensor> loaded;
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        const uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(r.u32());
        Tensor t(shape);
        for (auto& v : t.data) v = static_cast<double>(r.f32());
        loaded.emplace(name, std::move(t));
    }

    size_t used = 0;
    state.visit([&](const std::string& name, Tensor& t) {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw DataError("checkpoint missing parameter " + name);
        if (!(it->second.shape == t.shape))
            throw DataError("checkpoint shape mismatch for " + name);
        t = it->second;
        ++used;
    });
    if (used != loaded.size())
        throw DataError("checkpoint has " + std::to_string(loaded.size() - used) +
                        " unexpected parameters");
    return out;
}

}  // namespace saldiff
