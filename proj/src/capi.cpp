#include "adsim/adsim.h"

#include <cstring>
#include <string>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/perf.hpp"
#include "core/sim.hpp"

namespace {

thread_local std::string g_last_error;

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
adsim_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const adsim::ParseError& e) {
        g_last_error = e.what();
        return ADSIM_ERR_PARSE;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return ADSIM_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return ADSIM_ERR_RUNTIME;
    }
}

adsim_status invalid(const char* msg) {
    g_last_error = msg;
    return ADSIM_ERR_INVALID_ARGUMENT;
}

} // namespace

struct adsim_profile {
    adsim::BackendProfile profile;
    bool finalized = false; // anchors sorted/validated
};

struct adsim_config {
    adsim::SimConfig config;
};

struct adsim_sim {
    adsim::Simulation sim;
};

extern "C" {

const char* adsim_version(void) { return "1.0.0"; }

const char* adsim_last_error(void) { return g_last_error.c_str(); }

void adsim_string_free(char* s) { std::free(s); }

adsim_status adsim_profile_builtin(const char* name, adsim_profile** out) {
    if (name == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = new adsim_profile{adsim::BackendProfile::builtin(name), true};
        return ADSIM_OK;
    });
}

adsim_status adsim_profile_create(const char* name, int64_t max_batch,
                                  adsim_profile** out) {
    if (name == nullptr || out == nullptr) return invalid("null argument");
    if (max_batch < 1) return invalid("max_batch must be >= 1");
    auto* p = new adsim_profile;
    p->profile.name = name;
    p->profile.max_batch = max_batch;
    *out = p;
    return ADSIM_OK;
}

adsim_status adsim_profile_add_anchor(adsim_profile* profile, int64_t batch_size,
                                      double t_ev) {
    if (profile == nullptr) return invalid("null profile");
    return guarded([&] {
        auto anchors = profile->profile.anchors;
        anchors.push_back({batch_size, t_ev});
        profile->profile = adsim::BackendProfile::make(profile->profile.name,
                                                       profile->profile.max_batch,
                                                       std::move(anchors));
        profile->finalized = true;
        return ADSIM_OK;
    });
}

void adsim_profile_free(adsim_profile* profile) { delete profile; }

namespace {

adsim_status check_profile(const adsim_profile* p) {
    if (p == nullptr) return invalid("null profile");
    if (!p->finalized || p->profile.anchors.empty())
        return invalid("profile has no anchors");
    return ADSIM_OK;
}

} // namespace

adsim_status adsim_estimate_t_ev(const adsim_profile* profile, int64_t batch_size,
                                 double* out) {
    if (out == nullptr) return invalid("null output");
    if (adsim_status s = check_profile(profile); s != ADSIM_OK) return s;
    return guarded([&] {
        *out = adsim::t_ev_lookup(profile->profile, batch_size);
        return ADSIM_OK;
    });
}

adsim_status adsim_estimate_t_bf(int64_t offset, double flow_rate, double* out) {
    if (out == nullptr) return invalid("null output");
    return guarded([&] {
        *out = adsim::t_bf(offset, flow_rate);
        return ADSIM_OK;
    });
}

adsim_status adsim_estimate_t_fill(int64_t batch_size, int64_t offset, double t_limit,
                                   double flow_rate, double* out) {
    if (out == nullptr) return invalid("null output");
    return guarded([&] {
        // A one-anchor throwaway profile: t_fill never consults the curve.
        adsim::PipelineConfig pc{
            adsim::BackendProfile::make("tmp", batch_size, {{batch_size, 1.0}}),
            batch_size, offset, t_limit};
        *out = adsim::t_fill(pc, flow_rate);
        return ADSIM_OK;
    });
}

adsim_status adsim_estimate_bounds(const adsim_profile* profile, int64_t batch_size,
                                   int64_t offset, double t_limit, double flow_rate,
                                   double* lower, double* upper) {
    if (lower == nullptr || upper == nullptr) return invalid("null output");
    if (adsim_status s = check_profile(profile); s != ADSIM_OK) return s;
    return guarded([&] {
        adsim::PipelineConfig pc{profile->profile, batch_size, offset, t_limit};
        auto [lo, hi] = adsim::detection_time_bounds(pc, flow_rate);
        *lower = lo;
        *upper = hi;
        return ADSIM_OK;
    });
}

adsim_status adsim_estimate_mean_detection(const adsim_profile* profile,
                                           int64_t batch_size, int64_t offset,
                                           double t_limit, double flow_rate,
                                           double* out) {
    if (out == nullptr) return invalid("null output");
    if (adsim_status s = check_profile(profile); s != ADSIM_OK) return s;
    return guarded([&] {
        adsim::PipelineConfig pc{profile->profile, batch_size, offset, t_limit};
        *out = adsim::mean_detection_time(pc, flow_rate);
        return ADSIM_OK;
    });
}

adsim_status adsim_estimate_max_rate(const adsim_profile* profile, int64_t batch_size,
                                     int64_t offset, double* out) {
    if (out == nullptr) return invalid("null output");
    if (adsim_status s = check_profile(profile); s != ADSIM_OK) return s;
    return guarded([&] {
        adsim::PipelineConfig pc{profile->profile, batch_size, offset, 5.0};
        *out = adsim::max_sustainable_rate(pc);
        return ADSIM_OK;
    });
}

adsim_status adsim_config_load_file(const char* path, adsim_config** out) {
    if (path == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = new adsim_config{adsim::SimConfig::load_file(path)};
        return ADSIM_OK;
    });
}

adsim_status adsim_config_load_string(const char* json_text, adsim_config** out) {
    if (json_text == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = new adsim_config{adsim::SimConfig::from_json_text(json_text)};
        return ADSIM_OK;
    });
}

adsim_status adsim_config_builtin(const char* name, adsim_config** out) {
    if (name == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = new adsim_config{adsim::SimConfig::builtin(name)};
        return ADSIM_OK;
    });
}

adsim_status adsim_config_builtin_text(const char* name, char** out) {
    if (name == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = copy_string(adsim::SimConfig::builtin_text(name));
        return *out != nullptr ? ADSIM_OK : ADSIM_ERR_RUNTIME;
    });
}

void adsim_config_free(adsim_config* config) { delete config; }

adsim_status adsim_sim_create(const adsim_config* config, uint64_t seed,
                              adsim_sim** out) {
    if (config == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = new adsim_sim{adsim::Simulation(config->config, seed)};
        return ADSIM_OK;
    });
}

adsim_status adsim_sim_run(adsim_sim* sim, double until_units) {
    if (sim == nullptr) return invalid("null sim");
    return guarded([&] {
        sim->sim.run_until_units(until_units);
        return ADSIM_OK;
    });
}

adsim_status adsim_sim_metrics_csv(const adsim_sim* sim, char** out) {
    if (sim == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = copy_string(sim->sim.csv());
        return *out != nullptr ? ADSIM_OK : ADSIM_ERR_RUNTIME;
    });
}

adsim_status adsim_sim_workflow_log(const adsim_sim* sim, char** out) {
    if (sim == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = copy_string(sim->sim.workflow_text());
        return *out != nullptr ? ADSIM_OK : ADSIM_ERR_RUNTIME;
    });
}

adsim_status adsim_sim_summary_json(const adsim_sim* sim, char** out) {
    if (sim == nullptr || out == nullptr) return invalid("null argument");
    return guarded([&] {
        *out = copy_string(sim->sim.summary());
        return *out != nullptr ? ADSIM_OK : ADSIM_ERR_RUNTIME;
    });
}

adsim_status adsim_sim_write_outputs(const adsim_sim* sim, const char* dir) {
    if (sim == nullptr || dir == nullptr) return invalid("null argument");
    return guarded([&] {
        sim->sim.write_outputs(dir);
        return ADSIM_OK;
    });
}

void adsim_sim_free(adsim_sim* sim) { delete sim; }

} // extern "C"
