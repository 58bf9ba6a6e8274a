#include "core/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/flow.hpp"

namespace adsim {

using nlohmann::json;

double VmLoadSchedule::used_gb_at(double t_units) const {
    if (points.empty()) return 0.0;
    if (t_units <= points.front().t_units) return points.front().used_gb;
    if (t_units >= points.back().t_units) return points.back().used_gb;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (t_units <= points[i].t_units) {
            const VmLoadPoint& a = points[i - 1];
            const VmLoadPoint& b = points[i];
            double f = (t_units - a.t_units) / (b.t_units - a.t_units);
            return a.used_gb + f * (b.used_gb - a.used_gb);
        }
    }
    return points.back().used_gb;
}

double ScenarioConfig::rate_at_seconds(double t_s) const {
    if (kind == "constant") return constant_rate;
    return flow_rate_at(model, t_s / model.time_unit);
}

const BackendProfile& SimConfig::profile(const std::string& name) const {
    for (const BackendProfile& p : profiles)
        if (p.name == name) return p;
    throw ParseError("unknown backend profile '" + name + "'");
}

namespace {

AppKind parse_app_kind(const std::string& s) {
    if (s == "flow_collector") return AppKind::FLOW_COLLECTOR;
    if (s == "asd_cpu") return AppKind::ASD_CPU;
    if (s == "asd_gpu") return AppKind::ASD_GPU;
    if (s == "nad") return AppKind::NAD;
    if (s == "dpi") return AppKind::DPI;
    if (s == "services") return AppKind::SERVICES;
    throw ParseError("unknown app kind '" + s + "'");
}

// The four management policies exercised by the use-case script: RAM relief,
// model update, GPU scale-up on measured flow rate, DPI on suspicious C&C.
const char* kUsecasePolicies = R"(# Use-case management policies.

policy vi-ram-relief {
  family VI
  when app.kind == 'asd_cpu' && vm.ram_usage >= $RamUsageMax
  then increase_ram ram_delta_gb=2
  priority 10
  cooldown 60
}

policy adf-model-update {
  family ADF
  when app.is_asd == 1 && app.model_lag >= 1
  then update_model
  priority 8
  cooldown 60
}

policy meapp-gpu-scaleup {
  family MEAPP
  when app.kind == 'asd_cpu' && app.num_net_flows_per_s >= $NetFlowsMaxForCpu
  then deploy_me_app app_kind=asd_gpu profile=gpu-caffe2 batch_size=262144
  priority 20
  cooldown 60
}

policy meapp-dpi-on-cc {
  family MEAPP
  when nad_output.anomaly_type == 'suspicious_cc'
  then deploy_dpi app_image=snort-cc
  priority 15
  cooldown 60
}
)";

// Forecast-driven variants: scale before the load arrives. Utilization
// headroom keeps the request early enough for the enactment lead time.
const char* kProactivePolicies = R"(# Proactive autoscaling policies.

policy meapp-gpu-scaleup-forecast {
  family MEAPP
  when app.kind == 'asd_cpu' && app.forecast_load_fraction >= $ScaleHeadroom
  then deploy_me_app app_kind=asd_gpu profile=gpu-caffe2 batch_size=262144
  priority 20
  cooldown 60
}

policy adf-offset-double {
  family ADF
  when app.kind == 'asd_gpu' && app.forecast_load_fraction >= $ScaleHeadroom
  then set_offset factor=2
  priority 10
  cooldown 60
}
)";

json base_infra() {
    json j;
    j["profiles"] = json::array({
        {{"name", "cpu-tf"}, {"max_batch", 16384}, {"anchors", json::array({json::array({16384, 0.0194})})}},
        {{"name", "gpu-caffe2"}, {"max_batch", 262144}, {"anchors", json::array({json::array({262144, 0.060})})}},
    });
    j["pipeline"] = {
        {"offset", 1},         {"window_size", 1}, {"batch_size", 16384},
        {"t_limit", 5.0},      {"feature_dim", 288}, {"initial_backend", "cpu-tf"},
        {"classifier", {{"type", "oracle"}}},
        {"nad", {{"k", 3}, {"horizon", 10.0}}},
    };
    j["latencies"] = {{"t_d", 30.0},      {"t_of", 3.0},        {"t_app", 3.0},
                      {"t_reconf", 2.0},  {"t_dismantle", 2.0}, {"msg", 0.05}};
    j["rans"] = json::array({{{"id", "ran-a"}, {"cpus", 32}, {"ram_gb", 128.0}, {"gpu_slots", 1}}});
    j["vms"] = json::array({
        {{"id", "vm1"}, {"ran", "ran-a"}, {"cpus", 2}, {"ram_gb", 4.0},
         {"apps", json::array({{{"id", "svc1"}, {"kind", "services"}}})}},
        {{"id", "vm2"}, {"ran", "ran-a"}, {"cpus", 4}, {"ram_gb", 8.0},
         {"apps", json::array({{{"id", "fc1"}, {"kind", "flow_collector"}}})}},
        {{"id", "vm3"}, {"ran", "ran-a"}, {"cpus", 4}, {"ram_gb", 4.0},
         {"apps", json::array({{{"id", "asd-cpu1"}, {"kind", "asd_cpu"}, {"profile", "cpu-tf"},
                                {"batch_size", 16384}, {"threshold", 0.5}}})}},
    });
    j["thresholds"] = {{"RamUsageMax", 0.85}, {"ScaleHeadroom", 0.7}};
    j["scale_up_mode"] = "replace_vm";
    j["seed"] = 1;
    return j;
}

json builtin_json(const std::string& name) {
    json j = base_infra();
    if (name == "sigmoid-default") {
        j["scenario"] = {{"kind", "sigmoid"},      {"saturation", 1e7},
                         {"midpoint", 5.2933},     {"floor_check", 5e4},
                         {"duration", 10.0},       {"time_unit", 60.0},
                         {"sample_period", 0.05},  {"flow_gen_cutoff", 1e4},
                         {"ran", "ran-a"}};
        j["policies"] = {{"inline", kProactivePolicies}};
    } else if (name == "usecase-demo") {
        j["scenario"] = {{"kind", "sigmoid"},      {"saturation", 1e7},
                         {"midpoint", 5.2933},     {"floor_check", 5e4},
                         {"duration", 4.5},        {"time_unit", 60.0},
                         {"sample_period", 0.05},  {"flow_gen_cutoff", 1e4},
                         {"ran", "ran-a"},
                         {"injections", json::array({{{"start", 3.8}, {"end", 4.2},
                                                      {"fraction", 0.005},
                                                      {"kind", "suspicious_cc"}}})}};
        j["policies"] = {{"inline", kUsecasePolicies}};
        j["vm_load_schedule"] = json::array(
            {{{"vm", "vm3"},
              {"points", json::array({json::array({0.5, 2.7}), json::array({1.5, 3.9})})}}});
        j["model_releases"] =
            json::array({{{"time", 2.0}, {"version", 2}, {"improved", true}}});
    } else {
        throw ParseError("unknown builtin config '" + name + "'");
    }
    return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

SimConfig parse_config(const json& j, const std::string& base_dir) {
    SimConfig c;

    if (!j.contains("scenario")) throw ParseError("config needs a 'scenario' block");
    const json& sc = j.at("scenario");
    c.scenario.kind = get_or<std::string>(sc, "kind", "sigmoid");
    if (c.scenario.kind != "sigmoid" && c.scenario.kind != "constant")
        throw ParseError("scenario.kind must be sigmoid or constant");
    c.scenario.model.saturation = get_or<double>(sc, "saturation", 1e7);
    c.scenario.model.midpoint = get_or<double>(sc, "midpoint", 5.2933);
    c.scenario.model.floor_check = get_or<double>(sc, "floor_check", 5e4);
    c.scenario.model.duration = get_or<double>(sc, "duration", 10.0);
    c.scenario.model.time_unit = get_or<double>(sc, "time_unit", 60.0);
    c.scenario.constant_rate = get_or<double>(sc, "constant_rate", 1000.0);
    c.scenario.sample_period_units = get_or<double>(sc, "sample_period", 0.05);
    c.scenario.flow_gen_cutoff = get_or<double>(sc, "flow_gen_cutoff", 1e4);
    c.scenario.ran = get_or<std::string>(sc, "ran", "ran-a");
    if (sc.contains("injections")) {
        for (const json& ij : sc.at("injections")) {
            InjectionWindow w;
            w.start_units = ij.at("start").get<double>();
            w.end_units = ij.at("end").get<double>();
            w.fraction = ij.at("fraction").get<double>();
            w.kind = get_or<std::string>(ij, "kind", "binary");
            if (w.end_units <= w.start_units) throw ParseError("injection window is empty");
            if (w.fraction < 0.0 || w.fraction > 1.0)
                throw ParseError("injection fraction out of [0, 1]");
            c.scenario.injections.push_back(w);
        }
    }

    if (!j.contains("profiles")) throw ParseError("config needs 'profiles'");
    for (const json& pj : j.at("profiles")) {
        std::vector<BackendProfile::Anchor> anchors;
        for (const json& aj : pj.at("anchors"))
            anchors.push_back({aj.at(0).get<std::int64_t>(), aj.at(1).get<double>()});
        c.profiles.push_back(BackendProfile::make(pj.at("name").get<std::string>(),
                                                  pj.at("max_batch").get<std::int64_t>(),
                                                  std::move(anchors)));
    }

    const json& pl = j.contains("pipeline") ? j.at("pipeline") : json::object();
    c.pipeline.offset = get_or<std::int64_t>(pl, "offset", 1);
    c.pipeline.window_size = get_or<std::int64_t>(pl, "window_size", 0);
    c.pipeline.batch_size = get_or<std::int64_t>(pl, "batch_size", 16384);
    c.pipeline.t_limit = get_or<double>(pl, "t_limit", 5.0);
    c.pipeline.feature_dim = get_or<std::int64_t>(pl, "feature_dim", 288);
    c.pipeline.initial_backend = get_or<std::string>(pl, "initial_backend", "cpu-tf");
    if (pl.contains("classifier")) {
        const json& cj = pl.at("classifier");
        c.pipeline.classifier.type = get_or<std::string>(cj, "type", "oracle");
        c.pipeline.classifier.model_path = get_or<std::string>(cj, "model_path", "");
        c.pipeline.classifier.seed = get_or<std::uint64_t>(cj, "seed", 7);
        c.pipeline.classifier.threshold = get_or<double>(cj, "threshold", 0.5);
        if (cj.contains("layers"))
            c.pipeline.classifier.layers = cj.at("layers").get<std::vector<std::int64_t>>();
    }
    if (pl.contains("nad")) {
        c.pipeline.nad.k = get_or<std::int64_t>(pl.at("nad"), "k", 3);
        c.pipeline.nad.horizon = get_or<double>(pl.at("nad"), "horizon", 10.0);
    }

    if (j.contains("latencies")) {
        const json& lj = j.at("latencies");
        c.latencies.t_d = get_or<double>(lj, "t_d", 30.0);
        c.latencies.t_of = get_or<double>(lj, "t_of", 3.0);
        c.latencies.t_app = get_or<double>(lj, "t_app", 3.0);
        c.latencies.t_reconf = get_or<double>(lj, "t_reconf", 2.0);
        c.latencies.t_dismantle = get_or<double>(lj, "t_dismantle", 2.0);
        c.latencies.msg = get_or<double>(lj, "msg", 0.05);
    }

    if (!j.contains("rans")) throw ParseError("config needs 'rans'");
    for (const json& rj : j.at("rans")) {
        Ran r;
        r.id = rj.at("id").get<std::string>();
        r.capacity.cpus = get_or<int>(rj, "cpus", 16);
        r.capacity.ram_gb = get_or<double>(rj, "ram_gb", 64.0);
        r.capacity.gpu_slots = get_or<int>(rj, "gpu_slots", 1);
        c.rans.push_back(std::move(r));
    }

    if (j.contains("vms")) {
        for (const json& vj : j.at("vms")) {
            InitialVm vm;
            vm.id = vj.at("id").get<std::string>();
            vm.ran = vj.at("ran").get<std::string>();
            vm.cpus = get_or<int>(vj, "cpus", 1);
            vm.ram_gb = get_or<double>(vj, "ram_gb", 1.0);
            vm.gpu = get_or<bool>(vj, "gpu", false);
            if (vj.contains("apps")) {
                for (const json& aj : vj.at("apps")) {
                    InitialApp app;
                    app.id = aj.at("id").get<std::string>();
                    app.kind = parse_app_kind(aj.at("kind").get<std::string>());
                    app.profile = get_or<std::string>(aj, "profile", "");
                    app.batch_size = get_or<std::int64_t>(aj, "batch_size", 1);
                    app.threshold = get_or<double>(aj, "threshold", 0.5);
                    vm.apps.push_back(std::move(app));
                }
            }
            c.vms.push_back(std::move(vm));
        }
    }

    if (j.contains("policies")) {
        const json& pj = j.at("policies");
        std::string text;
        if (pj.contains("inline")) {
            text = pj.at("inline").get<std::string>();
        } else if (pj.contains("file")) {
            std::string path = pj.at("file").get<std::string>();
            if (!path.empty() && path.front() != '/' && !base_dir.empty())
                path = base_dir + "/" + path;
            std::ifstream in(path);
            if (!in) throw ParseError("cannot open policy file '" + path + "'");
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        } else {
            throw ParseError("policies block needs 'inline' or 'file'");
        }
        c.policies = parse_policies(text);
    }

    if (j.contains("thresholds"))
        for (auto it = j.at("thresholds").begin(); it != j.at("thresholds").end(); ++it)
            c.thresholds[it.key()] = it.value().get<double>();

    if (j.contains("vm_load_schedule")) {
        for (const json& sj : j.at("vm_load_schedule")) {
            VmLoadSchedule s;
            s.vm_id = sj.at("vm").get<std::string>();
            for (const json& pjj : sj.at("points"))
                s.points.push_back({pjj.at(0).get<double>(), pjj.at(1).get<double>()});
            c.vm_load.push_back(std::move(s));
        }
    }

    if (j.contains("model_releases")) {
        for (const json& mj : j.at("model_releases")) {
            ModelRelease r;
            r.t_units = mj.at("time").get<double>();
            r.version = mj.at("version").get<int>();
            r.improved = get_or<bool>(mj, "improved", true);
            c.model_releases.push_back(r);
        }
    }

    c.scale_up_mode = get_or<std::string>(j, "scale_up_mode", "replace_vm");
    c.default_seed = get_or<std::uint64_t>(j, "seed", 1);
    c.validate();
    return c;
}

} // namespace

void SimConfig::validate() const {
    if (scenario.model.saturation <= 0.0) throw ParseError("scenario saturation must be > 0");
    if (scenario.model.duration <= 0.0) throw ParseError("scenario duration must be > 0");
    if (scenario.model.time_unit <= 0.0) throw ParseError("scenario time_unit must be > 0");
    if (scenario.sample_period_units <= 0.0) throw ParseError("sample_period must be > 0");
    if (scenario.kind == "constant" && scenario.constant_rate <= 0.0)
        throw ParseError("constant_rate must be > 0");
    if (profiles.empty()) throw ParseError("at least one backend profile is required");
    if (rans.empty()) throw ParseError("at least one RAN is required");

    bool ran_found = false;
    for (const Ran& r : rans) ran_found |= r.id == scenario.ran;
    if (!ran_found) throw ParseError("scenario ran '" + scenario.ran + "' is not declared");

    profile(pipeline.initial_backend); // must resolve
    if (pipeline.offset < 1) throw ParseError("pipeline offset must be >= 1");
    if (pipeline.window_size != 0 && pipeline.window_size < pipeline.offset)
        throw ParseError("pipeline window_size must be >= offset");
    if (pipeline.batch_size < 1) throw ParseError("pipeline batch_size must be >= 1");
    if (pipeline.batch_size > profile(pipeline.initial_backend).max_batch)
        throw ParseError("pipeline batch_size exceeds initial backend max_batch");
    if (pipeline.feature_dim < kFeatureSchemaSlots)
        throw ParseError("feature_dim must be >= " + std::to_string(kFeatureSchemaSlots));
    if (!(pipeline.t_limit > 0.0)) throw ParseError("t_limit must be > 0");
    if (pipeline.nad.k < 1 || pipeline.nad.horizon <= 0.0)
        throw ParseError("nad parameters out of range");
    const std::string& ct = pipeline.classifier.type;
    if (ct != "oracle" && ct != "model" && ct != "seeded")
        throw ParseError("classifier type must be oracle, model or seeded");
    if (ct == "model" && pipeline.classifier.model_path.empty())
        throw ParseError("classifier type 'model' needs model_path");
    if (ct == "seeded" && pipeline.classifier.layers.size() < 2)
        throw ParseError("classifier type 'seeded' needs layers");
    latencies.validate();
    if (scale_up_mode != "replace_vm" && scale_up_mode != "augment_vm")
        throw ParseError("scale_up_mode must be replace_vm or augment_vm");

    bool collector = false, asd = false;
    for (const InitialVm& vm : vms) {
        bool vm_ran = false;
        for (const Ran& r : rans) vm_ran |= r.id == vm.ran;
        if (!vm_ran) throw ParseError("vm '" + vm.id + "' references unknown ran");
        for (const InitialApp& app : vm.apps) {
            if (vm.ran != scenario.ran) continue;
            collector |= app.kind == AppKind::FLOW_COLLECTOR;
            if (app.kind == AppKind::ASD_CPU || app.kind == AppKind::ASD_GPU) {
                asd = true;
                profile(app.profile);
            }
        }
    }
    if (!collector)
        throw ParseError("scenario ran needs a flow_collector app");
    if (!asd) throw ParseError("scenario ran needs an ASD app");

    // Every named threshold the policies reference must resolve (after the
    // derived defaults are added by effective_thresholds in the simulator).
    for (const Policy& p : policies)
        for (const Predicate& c : p.conditions)
            if (c.value.type == PredicateValue::Type::NAMED &&
                thresholds.find(c.value.text) == thresholds.end() &&
                c.value.text != "NetFlowsMaxForCpu")
                throw ParseError("policy '" + p.id + "' references undefined threshold $" +
                                 c.value.text);
}

SimConfig SimConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j, "");
}

SimConfig SimConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    std::string base_dir;
    std::size_t slash = path.find_last_of('/');
    if (slash != std::string::npos) base_dir = path.substr(0, slash);
    return parse_config(j, base_dir);
}

SimConfig SimConfig::builtin(const std::string& name) {
    return parse_config(builtin_json(name), "");
}

std::string SimConfig::builtin_text(const std::string& name) {
    return builtin_json(name).dump(2) + "\n";
}

} // namespace adsim
