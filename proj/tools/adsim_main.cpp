// adsim command-line front end. Everything goes through the C API in
// adsim/adsim.h; the core library is loaded as a shared object.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "adsim/adsim.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int fail(adsim_status status) {
    std::fprintf(stderr, "error: %s\n", adsim_last_error());
    return status == ADSIM_ERR_PARSE || status == ADSIM_ERR_INVALID_ARGUMENT
               ? kExitConfig
               : kExitRuntime;
}

struct ProfileHandle {
    adsim_profile* p = nullptr;
    ~ProfileHandle() { adsim_profile_free(p); }
};

struct ConfigHandle {
    adsim_config* c = nullptr;
    ~ConfigHandle() { adsim_config_free(c); }
};

struct SimHandle {
    adsim_sim* s = nullptr;
    ~SimHandle() { adsim_sim_free(s); }
};

std::string output_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    const char* env = std::getenv("ADSIM_OUT");
    return env != nullptr && env[0] != '\0' ? env : ".";
}

int run_simulation(adsim_config* config, std::uint64_t seed, double until,
                   const std::string& out_dir) {
    SimHandle sim;
    if (adsim_status s = adsim_sim_create(config, seed, &sim.s); s != ADSIM_OK)
        return fail(s);
    if (adsim_status s = adsim_sim_run(sim.s, until); s != ADSIM_OK) return fail(s);
    if (adsim_status s = adsim_sim_write_outputs(sim.s, out_dir.c_str()); s != ADSIM_OK)
        return fail(s);
    std::printf("wrote %s/metrics.csv, %s/workflow.log, %s/summary.json\n",
                out_dir.c_str(), out_dir.c_str(), out_dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adsim — anomaly-detection management simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", adsim_version());

    // run
    auto* run = app.add_subcommand("run", "run a scenario config and write logs");
    std::string run_config;
    std::uint64_t run_seed = 1;
    std::string run_out;
    double run_until = -1.0;
    run->add_option("config", run_config, "scenario config (JSON)")->required();
    run->add_option("--seed", run_seed, "simulation seed");
    run->add_option("--out", run_out, "output directory (default $ADSIM_OUT or .)");
    run->add_option("--until", run_until, "stop after this many model time units");

    // estimate
    auto* est = app.add_subcommand("estimate",
                                   "print throughput and detection-time estimates");
    std::string est_profile = "cpu-tf";
    std::int64_t est_batch = 16384;
    std::int64_t est_offset = 1;
    double est_rate = 0.0;
    double est_tlimit = 5.0;
    est->add_option("--profile", est_profile, "backend profile (cpu-tf | gpu-caffe2)");
    est->add_option("--batch", est_batch, "feature batch size")->required();
    est->add_option("--offset", est_offset, "flows per feature");
    est->add_option("--rate", est_rate, "flow rate (flows/s)")->required();
    est->add_option("--t-limit", est_tlimit, "forced-flush limit in seconds");

    // validate
    auto* val = app.add_subcommand("validate", "parse a config and report diagnostics");
    std::string val_config;
    val->add_option("config", val_config, "scenario config (JSON)")->required();

    // demo-usecase
    auto* demo = app.add_subcommand("demo-usecase",
                                    "run the four-concern management script");
    std::uint64_t demo_seed = 1;
    std::string demo_out;
    demo->add_option("--seed", demo_seed, "simulation seed");
    demo->add_option("--out", demo_out, "output directory (default $ADSIM_OUT or .)");

    // dump-config
    auto* dump = app.add_subcommand("dump-config", "print a builtin config as JSON");
    std::string dump_name = "sigmoid-default";
    dump->add_option("name", dump_name, "sigmoid-default | usecase-demo");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        ConfigHandle config;
        if (adsim_status s = adsim_config_load_file(run_config.c_str(), &config.c);
            s != ADSIM_OK)
            return fail(s);
        return run_simulation(config.c, run_seed, run_until, output_dir(run_out));
    }

    if (est->parsed()) {
        ProfileHandle profile;
        if (adsim_status s = adsim_profile_builtin(est_profile.c_str(), &profile.p);
            s != ADSIM_OK)
            return fail(s);
        double t_ev = 0.0, tbf = 0.0, tfill = 0.0, lo = 0.0, hi = 0.0, mean = 0.0,
               max_rate = 0.0;
        adsim_status s = adsim_estimate_t_ev(profile.p, est_batch, &t_ev);
        if (s == ADSIM_OK) s = adsim_estimate_t_bf(est_offset, est_rate, &tbf);
        if (s == ADSIM_OK)
            s = adsim_estimate_t_fill(est_batch, est_offset, est_tlimit, est_rate, &tfill);
        if (s == ADSIM_OK)
            s = adsim_estimate_bounds(profile.p, est_batch, est_offset, est_tlimit,
                                      est_rate, &lo, &hi);
        if (s == ADSIM_OK)
            s = adsim_estimate_mean_detection(profile.p, est_batch, est_offset, est_tlimit,
                                              est_rate, &mean);
        if (s == ADSIM_OK)
            s = adsim_estimate_max_rate(profile.p, est_batch, est_offset, &max_rate);
        if (s != ADSIM_OK) return fail(s);
        std::printf("profile               %s\n", est_profile.c_str());
        std::printf("batch_size            %lld\n", static_cast<long long>(est_batch));
        std::printf("offset                %lld\n", static_cast<long long>(est_offset));
        std::printf("flow_rate             %.10g\n", est_rate);
        std::printf("t_ev                  %.10g\n", t_ev);
        std::printf("t_bf                  %.10g\n", tbf);
        std::printf("t_fill                %.10g\n", tfill);
        std::printf("detection_lower       %.10g\n", lo);
        std::printf("detection_upper       %.10g\n", hi);
        std::printf("mean_detection_time   %.10g\n", mean);
        std::printf("max_sustainable_rate  %.10g\n", max_rate);
        return kExitOk;
    }

    if (val->parsed()) {
        ConfigHandle config;
        if (adsim_status s = adsim_config_load_file(val_config.c_str(), &config.c);
            s != ADSIM_OK)
            return fail(s);
        std::printf("%s: ok\n", val_config.c_str());
        return kExitOk;
    }

    if (demo->parsed()) {
        ConfigHandle config;
        if (adsim_status s = adsim_config_builtin("usecase-demo", &config.c);
            s != ADSIM_OK)
            return fail(s);
        return run_simulation(config.c, demo_seed, -1.0, output_dir(demo_out));
    }

    if (dump->parsed()) {
        char* text = nullptr;
        if (adsim_status s = adsim_config_builtin_text(dump_name.c_str(), &text);
            s != ADSIM_OK)
            return fail(s);
        std::fputs(text, stdout);
        adsim_string_free(text);
        return kExitOk;
    }
    return kExitOk;
}
