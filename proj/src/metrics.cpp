#include "saldiff/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace saldiff {

namespace {

void check_map(const Tensor& m, const char* what) {
    if (m.rank() != 2) throw MetricError(std::string(what) + ": expected 2-D map");
    for (double v : m.data) {
        if (!std::isfinite(v)) throw MetricError(std::string(what) + ": non-finite value");
        if (v < 0.0) throw MetricError(std::string(what) + ": negative value");
    }
}

void check_fixations(const Tensor& m, const FixationSet& f, const char* what) {
    if (f.points.empty()) throw MetricError(std::string(what) + ": no fixations");
    if (f.map_h != m.rows() || f.map_w != m.cols())
        throw MetricError(std::string(what) + ": fixation set size mismatch");
    for (auto [r, c] : f.points)
        if (r < 0 || r >= m.rows() || c < 0 || c >= m.cols())
            throw MetricError(std::string(what) + ": fixation out of bounds");
}

double mean_of(const Tensor& m) {
    double s = 0.0;
    for (double v : m.data) s += v;
    return s / static_cast<double>(m.numel());
}

double var_of(const Tensor& m, double mean) {
    double s = 0.0;
    for (double v : m.data) s += (v - mean) * (v - mean);
    return s / static_cast<double>(m.numel());
}

}  // namespace

double sim(const Tensor& pred, const Tensor& gt) {
    check_map(pred, "sim");
    check_map(gt, "sim");
    if (!pred.same_shape(gt)) throw MetricError("sim: shape mismatch");
    double sp = 0.0, sg = 0.0;
    for (double v : pred.data) sp += v;
    for (double v : gt.data) sg += v;
    if (sp <= 0.0 || sg <= 0.0) throw MetricError("sim: zero-mass map");
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i)
        acc += std::min(pred.data[i] / sp, gt.data[i] / sg);
    return acc;
}

double cc(const Tensor& pred, const Tensor& gt) {
    check_map(pred, "cc");
    check_map(gt, "cc");
    if (!pred.same_shape(gt)) throw MetricError("cc: shape mismatch");
    const double mp = mean_of(pred), mg = mean_of(gt);
    double cov = 0.0, vp = 0.0, vg = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double dp = pred.data[i] - mp, dg = gt.data[i] - mg;
        cov += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    if (vp == 0.0 || vg == 0.0) throw MetricError("cc: zero-variance map");
    return cov / std::sqrt(vp * vg);
}

double nss(const Tensor& pred, const FixationSet& fix) {
    check_map(pred, "nss");
    check_fixations(pred, fix, "nss");
    const double mean = mean_of(pred);
    const double var = var_of(pred, mean);
    if (var == 0.0) throw MetricError("nss: zero-variance map");
    const double std = std::sqrt(var);
    double acc = 0.0;
    for (auto [r, c] : fix.points) acc += (pred.at(r, c) - mean) / std;
    return acc / static_cast<double>(fix.points.size());
}

double auc_judd(const Tensor& pred, const FixationSet& fix) {
    check_map(pred, "auc_judd");
    check_fixations(pred, fix, "auc_judd");

    const int64_t total = pred.numel();
    std::vector<uint8_t> fixated(static_cast<size_t>(total), 0);
    for (auto [r, c] : fix.points)
        fixated[static_cast<size_t>(r) * pred.cols() + c] = 1;
    int64_t n_fix_pixels = 0;
    for (uint8_t f : fixated) n_fix_pixels += f;
    const int64_t n_neg = total - n_fix_pixels;
    if (n_neg == 0) throw MetricError("auc_judd: every pixel fixated");

    // Thresholds at the fixated saliency values, descending; duplicates in
    // the fixation list contribute to TPR counts but yield the same point.
    std::vector<double> thresholds;
    thresholds.reserve(fix.points.size());
    for (auto [r, c] : fix.points) thresholds.push_back(pred.at(r, c));
    std::stable_sort(thresholds.begin(), thresholds.end(), std::greater<double>());

    const double n_pos = static_cast<double>(fix.points.size());
    std::vector<std::pair<double, double>> curve;  // (fpr, tpr)
    curve.emplace_back(0.0, 0.0);
    for (double tau : thresholds) {
        int64_t tp = 0;
        for (auto [r, c] : fix.points) tp += pred.at(r, c) >= tau ? 1 : 0;
        int64_t fp = 0;
        for (int64_t i = 0; i < total; ++i)
            if (!fixated[static_cast<size_t>(i)] && pred.data[static_cast<size_t>(i)] >= tau) ++fp;
        curve.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                           static_cast<double>(tp) / n_pos);
    }
    curve.emplace_back(1.0, 1.0);

    double area = 0.0;
    for (size_t i = 1; i < curve.size(); ++i)
        area += 0.5 * (curve[i].second + curve[i - 1].second) *
                (curve[i].first - curve[i - 1].first);
    return area;
}

}  // namespace saldiff
