#include "core/perf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "core/errors.hpp"

namespace adsim {

BackendProfile BackendProfile::make(std::string name, std::int64_t max_batch,
                                    std::vector<Anchor> anchors) {
    if (anchors.empty())
        throw std::invalid_argument("profile '" + name + "': needs at least one anchor");
    std::sort(anchors.begin(), anchors.end(),
              [](const Anchor& a, const Anchor& b) { return a.batch_size < b.batch_size; });
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const Anchor& a = anchors[i];
        if (a.batch_size < 1 || !(a.t_ev > 0.0) || !std::isfinite(a.t_ev))
            throw std::invalid_argument("profile '" + name + "': bad anchor");
        if (i > 0 && anchors[i - 1].batch_size == a.batch_size)
            throw std::invalid_argument("profile '" + name + "': duplicate anchor batch size");
    }
    if (max_batch < anchors.back().batch_size)
        throw std::invalid_argument("profile '" + name + "': max_batch below last anchor");
    return BackendProfile{std::move(name), std::move(anchors), max_batch};
}

const BackendProfile& BackendProfile::builtin(const std::string& name) {
    static const BackendProfile cpu_tf =
        BackendProfile::make("cpu-tf", 16384, {{16384, 0.0194}});
    static const BackendProfile gpu_caffe2 =
        BackendProfile::make("gpu-caffe2", 262144, {{262144, 0.060}});
    if (name == "cpu-tf") return cpu_tf;
    if (name == "gpu-caffe2") return gpu_caffe2;
    throw std::invalid_argument("unknown builtin profile '" + name + "'");
}

std::vector<std::string> BackendProfile::builtin_names() {
    return {"cpu-tf", "gpu-caffe2"};
}

void PipelineConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (offset < 1) throw std::invalid_argument("offset must be >= 1");
    if (!(t_limit > 0.0)) throw std::invalid_argument("t_limit must be > 0");
    if (batch_size > profile.max_batch)
        throw std::invalid_argument("batch_size exceeds profile max_batch");
}

double t_ev_lookup(const BackendProfile& profile, std::int64_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (batch_size > profile.max_batch)
        throw std::invalid_argument("batch_size " + std::to_string(batch_size) +
                                    " exceeds max_batch of profile '" + profile.name + "'");
    const auto& a = profile.anchors;
    if (batch_size <= a.front().batch_size) {
        // Below the first anchor there is no measurement; scale at the first
        // anchor's per-item cost.
        return a.front().t_ev * static_cast<double>(batch_size) /
               static_cast<double>(a.front().batch_size);
    }
    if (batch_size >= a.back().batch_size) {
        return a.back().t_ev * static_cast<double>(batch_size) /
               static_cast<double>(a.back().batch_size);
    }
    auto hi = std::lower_bound(a.begin(), a.end(), batch_size,
                               [](const BackendProfile::Anchor& x, std::int64_t b) {
                                   return x.batch_size < b;
                               });
    if (hi->batch_size == batch_size) return hi->t_ev;
    auto lo = hi - 1;
    double lx = std::log(static_cast<double>(lo->batch_size));
    double hx = std::log(static_cast<double>(hi->batch_size));
    double ly = std::log(lo->t_ev);
    double hy = std::log(hi->t_ev);
    double f = (std::log(static_cast<double>(batch_size)) - lx) / (hx - lx);
    return std::exp(ly + f * (hy - ly));
}

double t_bf(std::int64_t offset, double flow_rate) {
    if (offset < 1) throw std::invalid_argument("offset must be >= 1");
    if (!(flow_rate > 0.0)) throw std::invalid_argument("flow_rate must be > 0");
    return static_cast<double>(offset) / flow_rate;
}

double t_fill(const PipelineConfig& config, double flow_rate) {
    config.validate();
    double fill = static_cast<double>(config.batch_size) * t_bf(config.offset, flow_rate);
    return std::min(config.t_limit, fill);
}

std::pair<double, double> detection_time_bounds(const PipelineConfig& config,
                                                double flow_rate) {
    double ev = t_ev_lookup(config.profile, config.batch_size);
    return {t_bf(config.offset, flow_rate) + ev, t_fill(config, flow_rate) + ev};
}

double mean_detection_time(const PipelineConfig& config, double flow_rate) {
    double ev = t_ev_lookup(config.profile, config.batch_size);
    return 0.5 * (t_bf(config.offset, flow_rate) + t_fill(config, flow_rate)) + ev;
}

double max_sustainable_rate(const PipelineConfig& config) {
    config.validate();
    double ev = t_ev_lookup(config.profile, config.batch_size);
    return static_cast<double>(config.batch_size) * static_cast<double>(config.offset) / ev;
}

} // namespace adsim
