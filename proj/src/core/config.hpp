#ifndef ADSIM_CORE_CONFIG_HPP
#define ADSIM_CORE_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/orchestration.hpp"
#include "core/perf.hpp"
#include "core/policy.hpp"
#include "core/scenario.hpp"

namespace adsim {

/// Anomalous-flow injection: a fraction of flows in [start, end) (model time
/// units) carries the ANOMALOUS ground-truth label of the given kind.
struct InjectionWindow {
    double start_units = 0.0;
    double end_units = 0.0;
    double fraction = 0.0;
    std::string kind = "binary";
};

struct VmLoadPoint {
    double t_units = 0.0;
    double used_gb = 0.0;
};

/// Scripted RAM consumption of one VM, linearly interpolated between points
/// and clamped outside them.
struct VmLoadSchedule {
    std::string vm_id;
    std::vector<VmLoadPoint> points;

    double used_gb_at(double t_units) const;
};

struct ModelRelease {
    double t_units = 0.0;
    int version = 1;
    bool improved = true;
};

struct ScenarioConfig {
    std::string kind = "sigmoid"; // sigmoid | constant
    ScenarioModel model;
    double constant_rate = 1000.0; // flows/s, kind == constant
    double sample_period_units = 0.05;
    double flow_gen_cutoff = 1e4; // flows/s; above it flows aggregate per block
    std::string ran = "ran-a";
    std::vector<InjectionWindow> injections;

    double rate_at_seconds(double t_s) const;
    double duration_seconds() const { return model.duration * model.time_unit; }
    double sample_period_seconds() const { return sample_period_units * model.time_unit; }
};

struct ClassifierConfig {
    std::string type = "oracle"; // oracle | model | seeded
    std::string model_path;
    std::vector<std::int64_t> layers;
    std::uint64_t seed = 7;
    double threshold = 0.5;
};

struct NadConfig {
    std::int64_t k = 3;
    double horizon = 10.0; // seconds
};

struct PipelineInit {
    std::int64_t offset = 1;
    std::int64_t window_size = 0; // 0 -> offset
    std::int64_t batch_size = 16384;
    double t_limit = 5.0;
    std::int64_t feature_dim = 288;
    std::string initial_backend = "cpu-tf";
    ClassifierConfig classifier;
    NadConfig nad;
};

struct InitialApp {
    std::string id;
    AppKind kind = AppKind::SERVICES;
    std::string profile;
    std::int64_t batch_size = 1;
    double threshold = 0.5;
};

struct InitialVm {
    std::string id;
    std::string ran;
    int cpus = 1;
    double ram_gb = 1.0;
    bool gpu = false;
    std::vector<InitialApp> apps;
};

struct SimConfig {
    ScenarioConfig scenario;
    std::vector<BackendProfile> profiles;
    PipelineInit pipeline;
    LatencyConfig latencies;
    std::vector<Ran> rans;
    std::vector<InitialVm> vms;
    std::vector<Policy> policies;
    std::map<std::string, double> thresholds;
    std::vector<VmLoadSchedule> vm_load;
    std::vector<ModelRelease> model_releases;
    std::string scale_up_mode = "replace_vm"; // replace_vm | augment_vm
    std::uint64_t default_seed = 1;

    const BackendProfile& profile(const std::string& name) const;
    void validate() const;

    static SimConfig from_json_text(const std::string& text);
    static SimConfig load_file(const std::string& path);
    /// "sigmoid-default" (proactive autoscaling) or "usecase-demo"
    /// (four-concern script).
    static SimConfig builtin(const std::string& name);
    static std::string builtin_text(const std::string& name);
};

} // namespace adsim

#endif
