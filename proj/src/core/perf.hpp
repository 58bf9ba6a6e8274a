#ifndef ADSIM_CORE_PERF_HPP
#define ADSIM_CORE_PERF_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace adsim {

/// A compute backend characterized by its batch-size -> evaluation-time
/// curve. Anchors are measured points; queries between anchors interpolate
/// log-log, queries past the last anchor scale at constant per-item cost.
struct BackendProfile {
    struct Anchor {
        std::int64_t batch_size;
        double t_ev; // seconds
    };

    std::string name;
    std::vector<Anchor> anchors; // strictly increasing batch_size
    std::int64_t max_batch = 0;

    static BackendProfile make(std::string name, std::int64_t max_batch,
                               std::vector<Anchor> anchors);

    /// Shipped profiles: "cpu-tf" (16384 -> 0.0194 s) and
    /// "gpu-caffe2" (262144 -> 0.060 s).
    static const BackendProfile& builtin(const std::string& name);
    static std::vector<std::string> builtin_names();
};

struct PipelineConfig {
    BackendProfile profile;
    std::int64_t batch_size = 1;
    std::int64_t offset = 1;
    double t_limit = 5.0; // seconds

    void validate() const;
};

/// Batch evaluation time for the given size.
double t_ev_lookup(const BackendProfile& profile, std::int64_t batch_size);

/// Mean time between consecutive feature emissions: offset / flow_rate.
double t_bf(std::int64_t offset, double flow_rate);

/// Time to fill a feature batch, clamped by the forced-flush limit:
/// min(t_limit, batch_size * offset / flow_rate).
double t_fill(const PipelineConfig& config, double flow_rate);

/// [t_bf + t_ev, t_fill + t_ev]: bounds on the lag between an anomalous
/// flow arriving and its batch evaluation completing.
std::pair<double, double> detection_time_bounds(const PipelineConfig& config,
                                                double flow_rate);

/// (t_bf + t_fill) / 2 + t_ev: mean lag assuming the anomaly lands at a
/// uniformly distributed batch position.
double mean_detection_time(const PipelineConfig& config, double flow_rate);

/// Highest flow rate the configuration sustains, i.e. the rate at which the
/// batch fill time equals the batch evaluation time.
double max_sustainable_rate(const PipelineConfig& config);

} // namespace adsim

#endif
