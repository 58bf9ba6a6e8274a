#include "core/orchestration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adsim {

void LatencyConfig::validate() const {
    for (double v : {t_d, t_of, t_app, t_reconf, t_dismantle, msg})
        if (v < 0.0 || !std::isfinite(v))
            throw std::invalid_argument("latencies must be finite and >= 0");
}

VmInstance& World::vm(const std::string& id) {
    auto it = vms.find(id);
    if (it == vms.end()) throw RuntimeFault("unknown VM '" + id + "'");
    return it->second;
}

AppInstance& World::app(const std::string& id) {
    auto it = apps.find(id);
    if (it == apps.end()) throw RuntimeFault("unknown app '" + id + "'");
    return it->second;
}

const VmInstance& World::vm(const std::string& id) const {
    return const_cast<World*>(this)->vm(id);
}

const AppInstance& World::app(const std::string& id) const {
    return const_cast<World*>(this)->app(id);
}

RanCapacity World::used(const std::string& ran_id) const {
    RanCapacity u{0, 0.0, 0};
    for (const auto& [id, vm] : vms) {
        // REQUESTED VMs have not been admitted by the VIM yet; they count
        // only from the capacity check onward.
        if (vm.ran_id != ran_id || vm.state == VmState::GONE ||
            vm.state == VmState::REQUESTED)
            continue;
        u.cpus += vm.cpus;
        u.ram_gb += vm.ram_gb;
        if (vm.gpu) ++u.gpu_slots;
    }
    return u;
}

bool World::fits(const std::string& ran_id, int cpus, double ram_gb, bool gpu) const {
    auto it = rans.find(ran_id);
    if (it == rans.end()) return false;
    RanCapacity u = used(ran_id);
    const RanCapacity& cap = it->second.capacity;
    return u.cpus + cpus <= cap.cpus && u.ram_gb + ram_gb <= cap.ram_gb &&
           u.gpu_slots + (gpu ? 1 : 0) <= cap.gpu_slots;
}

const AppInstance* World::active_asd(const std::string& ran_id) const {
    auto it = fc_target.find(ran_id);
    if (it == fc_target.end() || it->second.empty()) return nullptr;
    auto app_it = apps.find(it->second);
    return app_it == apps.end() ? nullptr : &app_it->second;
}

std::string World::new_vm_id() { return "vm-" + std::to_string(++vm_counter); }

std::string World::new_app_id(const std::string& stem) {
    return stem + "-" + std::to_string(++app_counter);
}

MonitoringSnapshot snapshot(const World& world, double now) {
    MonitoringSnapshot snap;
    snap.time = now;
    snap.schema = MonitoringSnapshot::default_schema();
    snap.model = world.model_registry;

    for (const auto& [id, vm] : world.vms) {
        if (vm.state == VmState::GONE) continue;
        VmMetrics m;
        m.id = vm.id;
        m.ran_id = vm.ran_id;
        m.cpus = vm.cpus;
        m.ram_gb = vm.ram_gb;
        m.gpu = vm.gpu;
        m.state = vm.state;
        auto cpu = world.vm_cpu_usage.find(id);
        m.cpu_usage = cpu == world.vm_cpu_usage.end() ? 0.2 : cpu->second;
        auto used = world.vm_ram_used_gb.find(id);
        double used_gb = used == world.vm_ram_used_gb.end() ? 0.3 * vm.ram_gb : used->second;
        m.ram_usage = vm.ram_gb > 0.0 ? std::min(1.0, used_gb / vm.ram_gb) : 0.0;
        for (const std::string& app_id : vm.app_ids) {
            auto a = world.apps.find(app_id);
            if (a != world.apps.end() && a->second.state != AppState::STOPPED) ++m.hosted_apps;
        }
        snap.vms.push_back(std::move(m));
    }

    for (const auto& [id, app] : world.apps) {
        if (app.state == AppState::STOPPED) continue;
        AppMetrics m;
        m.id = app.id;
        m.vm_id = app.vm_id;
        m.ran_id = app.ran_id;
        m.kind = app.kind;
        m.state = app.state;
        if (app.kind == AppKind::ASD_CPU || app.kind == AppKind::ASD_GPU) {
            AsdMetrics am;
            am.backend = app.profile;
            am.batch_size = app.batch_size;
            am.model_version = app.model_version;
            am.threshold = app.threshold;
            auto t = world.asd_telemetry.find(id);
            if (t != world.asd_telemetry.end()) {
                am.offset = t->second.offset;
                am.measured_feature_rate = t->second.measured_feature_rate;
                am.num_net_flows_per_s = t->second.num_net_flows_per_s;
                am.forecast_net_flows_per_s = t->second.forecast_net_flows_per_s;
                am.forecast_feature_rate = t->second.forecast_feature_rate;
                am.forecast_load_fraction = t->second.forecast_load_fraction;
            }
            if (world.model_registry.improved &&
                world.model_registry.available_version > app.model_version)
                am.model_lag = world.model_registry.available_version - app.model_version;
            m.asd = am;
        }
        snap.apps.push_back(std::move(m));
    }

    for (const auto& [id, ran] : world.rans) {
        RanMetrics m;
        m.id = id;
        auto t = world.ran_telemetry.find(id);
        if (t != world.ran_telemetry.end()) {
            m.flow_rate = t->second.flow_rate;
            m.forecast_rate = t->second.forecast_rate;
        }
        snap.rans.push_back(std::move(m));
    }

    snap.nad_outputs = world.recent_anomalies;
    return snap;
}

// ---------------------------------------------------------------------------
// Orchestrator

namespace {

double param_number(const ActionRequest& a, const std::string& key, double fallback) {
    auto it = a.params.find(key);
    if (it == a.params.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw RuntimeFault("action param '" + key + "' is not a number: " + it->second);
    }
}

std::string param_string(const ActionRequest& a, const std::string& key,
                         const std::string& fallback) {
    auto it = a.params.find(key);
    return it == a.params.end() ? fallback : it->second;
}

} // namespace

Orchestrator::Orchestrator(World& world, LatencyConfig latencies, ScaleUpMode mode)
    : world_(world), latencies_(latencies), mode_(mode) {
    latencies_.validate();
}

void Orchestrator::log(double time, const WorkflowState& wf, int step,
                       const std::string& actor, const std::string& description) {
    events_.push_back({time, wf.id, step, actor, description});
}

void Orchestrator::finish(WorkflowState& wf, WorkflowStatus status) {
    wf.status = status;
    wf.locks.clear();
}

WorkflowState& Orchestrator::workflow(const std::string& id) {
    auto it = workflows_.find(id);
    if (it == workflows_.end()) throw RuntimeFault("unknown workflow '" + id + "'");
    return it->second;
}

std::set<std::string> Orchestrator::locked_resources() const {
    std::set<std::string> locked;
    for (const auto& [id, wf] : workflows_)
        if (wf.status == WorkflowStatus::RUNNING)
            locked.insert(wf.locks.begin(), wf.locks.end());
    return locked;
}

std::vector<std::string> Orchestrator::touched_resources(const ActionRequest& a) const {
    std::vector<std::string> out;
    switch (a.kind) {
        case ActionKind::INCREASE_RAM:
            out.push_back("vm:" + a.target_vm);
            break;
        case ActionKind::UPDATE_MODEL:
            out.push_back("app:" + a.target_app);
            break;
        case ActionKind::DEPLOY_ME_APP: {
            out.push_back("fc:" + a.target_ran);
            const AppInstance* current = world_.active_asd(a.target_ran);
            if (current != nullptr) {
                out.push_back("app:" + current->id);
                out.push_back("vm:" + current->vm_id);
            }
            break;
        }
        case ActionKind::DISMANTLE_VM:
            out.push_back("vm:" + a.target_vm);
            break;
        case ActionKind::RECONFIGURE_FC:
        case ActionKind::SET_OFFSET:
            out.push_back("fc:" + a.target_ran);
            break;
        case ActionKind::DEPLOY_DPI:
            out.push_back("dpi:" + a.target_ran);
            break;
    }
    return out;
}

WorkflowState& Orchestrator::make_workflow(const ActionRequest& action) {
    std::string id = "wf-" + std::to_string(++wf_counter_);
    WorkflowState wf;
    wf.id = id;
    wf.action = action;
    auto [it, inserted] = workflows_.emplace(id, std::move(wf));
    return it->second;
}

WorkflowState& Orchestrator::enact(const ActionRequest& action, double now,
                                   const std::string& policy_id) {
    std::set<std::string> locked = locked_resources();
    for (const std::string& r : touched_resources(action))
        if (locked.count(r) != 0)
            throw RuntimeFault("resource '" + r + "' is locked by a running workflow");

    WorkflowState& wf = make_workflow(action);
    wf.policy_id = policy_id;
    wf.started_at = now;
    wf.ran_id = action.target_ran;

    const double d = latencies_.msg;
    auto plan = [&](double time, int number, const char* actor, std::string descr) {
        wf.plan.push_back({time, number, actor, std::move(descr)});
    };
    std::string via = policy_id.empty() ? "" : " (policy " + policy_id + ")";

    switch (action.kind) {
        case ActionKind::DEPLOY_ME_APP: {
            const AppInstance* current = world_.active_asd(action.target_ran);
            std::string requested_kind = param_string(action, "app_kind", "asd_gpu");
            if (current != nullptr && to_string(current->kind) == requested_kind) {
                wf.status = WorkflowStatus::SKIPPED;
                log(now, wf, 1, "DECISION",
                    "deploy of " + requested_kind + " skipped: already active" + via);
                return wf;
            }
            wf.kind = mode_ == ScaleUpMode::REPLACE_VM ? WorkflowKind::REPLACE_ASD
                                                       : WorkflowKind::AUGMENT_ASD;
            if (current != nullptr) {
                wf.old_app_id = current->id;
                wf.old_vm_id = current->vm_id;
            }
            wf.new_app_id = world_.new_app_id(requested_kind);
            wf.locks.insert("fc:" + action.target_ran);
            wf.locks.insert("app:" + wf.new_app_id);
            if (!wf.old_app_id.empty()) wf.locks.insert("app:" + wf.old_app_id);
            if (!wf.old_vm_id.empty()) wf.locks.insert("vm:" + wf.old_vm_id);

            if (wf.kind == WorkflowKind::REPLACE_ASD) {
                wf.new_vm_id = world_.new_vm_id();
                wf.locks.insert("vm:" + wf.new_vm_id);
                double t3 = now + 2 * d;
                double t5 = t3 + latencies_.t_d;
                double t6 = t5 + d;
                double t8 = t6 + latencies_.t_app;
                double t9 = t8 + d;
                double t11 = t9 + latencies_.t_reconf;
                plan(now, 1, "DECISION", "deploy " + requested_kind + " on " +
                                             action.target_ran + via);
                plan(now + d, 2, "ORCH", "decision received by orchestrator");
                plan(t3, 3, "ORCH", "VM instantiation requested from VIM");
                plan(t3 + 0.5 * latencies_.t_d, 4, "VIM",
                     "capacity checked; instantiating " + wf.new_vm_id + " in the VI");
                plan(t5, 5, "VIM", wf.new_vm_id + " running; details reported");
                plan(t6, 6, "ORCH", "app start ordered via MEP Manager");
                plan(t6 + 0.5 * latencies_.t_app, 7, "MEPM",
                     "starting " + wf.new_app_id + " on " + wf.new_vm_id);
                plan(t8, 8, "APP", wf.new_app_id + " reports OK");
                if (!wf.old_app_id.empty()) {
                    double t12 = t11 + d;
                    plan(t9, 9, "ORCH", "FC reconfiguration ordered via MEP Manager");
                    plan(t9 + 0.5 * latencies_.t_reconf, 10, "MEPM",
                         "FC output redirected to " + wf.new_app_id);
                    plan(t11, 11, "MEPM", "reconfiguration confirmed");
                    plan(t12, 12, "ORCH", "dismantle of " + wf.old_vm_id +
                                              " requested from VIM");
                    plan(t12 + 0.5 * latencies_.t_dismantle, 13, "VIM",
                         "dismantling " + wf.old_vm_id);
                    plan(t12 + latencies_.t_dismantle, 14, "VIM", "dismantle confirmed");
                } else {
                    plan(t9, 9, "ORCH", "FC reconfiguration ordered via MEP Manager");
                    plan(t9 + 0.5 * latencies_.t_reconf, 10, "MEPM",
                         "FC output directed to " + wf.new_app_id);
                    plan(t11, 11, "MEPM", "reconfiguration confirmed");
                }
            } else {
                if (wf.old_vm_id.empty())
                    throw RuntimeFault("augment scale-up needs a running ASD VM");
                wf.new_vm_id = wf.old_vm_id;
                double t3 = now + 2 * d;
                double t4 = t3 + latencies_.t_of;
                double t5 = t4 + d;
                double t7 = t5 + latencies_.t_app;
                double t8 = t7 + d;
                double t10 = t8 + latencies_.t_reconf;
                plan(now, 1, "DECISION", "deploy " + requested_kind + " on " +
                                             action.target_ran + " (augment)" + via);
                plan(now + d, 2, "ORCH", "decision received by orchestrator");
                plan(t3, 3, "ORCH", "resource augmentation requested from VIM");
                plan(t4, 4, "VIM", "GPU and RAM assigned to " + wf.old_vm_id);
                plan(t5, 5, "ORCH", "app start ordered via MEP Manager");
                plan(t5 + 0.5 * latencies_.t_app, 6, "MEPM",
                     "starting " + wf.new_app_id + " on " + wf.old_vm_id);
                plan(t7, 7, "APP", wf.new_app_id + " reports OK");
                plan(t8, 8, "ORCH", "FC reconfiguration ordered via MEP Manager");
                plan(t8 + 0.5 * latencies_.t_reconf, 9, "MEPM",
                     "FC output redirected to " + wf.new_app_id);
                plan(t10, 10, "MEPM", "reconfiguration confirmed");
                plan(t10 + d, 11, "MEPM", wf.old_app_id + " stopped");
            }
            break;
        }
        case ActionKind::INCREASE_RAM: {
            wf.kind = WorkflowKind::INCREASE_RAM;
            wf.locks.insert("vm:" + action.target_vm);
            double t3 = now + 2 * d;
            plan(now, 1, "DECISION", "increase RAM of " + action.target_vm + via);
            plan(now + d, 2, "ORCH", "decision received by orchestrator");
            plan(t3, 3, "ORCH", "RAM increase requested from VIM");
            plan(t3 + latencies_.t_of, 4, "VI", "RAM assigned to " + action.target_vm);
            break;
        }
        case ActionKind::UPDATE_MODEL: {
            wf.kind = WorkflowKind::UPDATE_MODEL;
            wf.locks.insert("app:" + action.target_app);
            double t3 = now + 2 * d;
            plan(now, 1, "DECISION", "update detection model of " + action.target_app + via);
            plan(now + d, 2, "ORCH", "decision received by orchestrator");
            plan(t3, 3, "ORCH", "model update ordered via MEP Manager");
            plan(t3 + latencies_.t_of, 4, "APP", "detection model applied");
            break;
        }
        case ActionKind::SET_OFFSET: {
            wf.kind = WorkflowKind::SET_OFFSET;
            wf.locks.insert("fc:" + action.target_ran);
            double t3 = now + 2 * d;
            plan(now, 1, "DECISION", "change collector offset on " + action.target_ran + via);
            plan(now + d, 2, "ORCH", "decision received by orchestrator");
            plan(t3, 3, "ORCH", "offset change ordered via MEP Manager");
            plan(t3 + latencies_.t_of, 4, "APP", "collector offset applied");
            break;
        }
        case ActionKind::RECONFIGURE_FC: {
            wf.kind = WorkflowKind::RECONFIGURE_FC;
            wf.locks.insert("fc:" + action.target_ran);
            double t3 = now + 2 * d;
            plan(now, 1, "DECISION", "reconfigure FC on " + action.target_ran + via);
            plan(now + d, 2, "ORCH", "decision received by orchestrator");
            plan(t3, 3, "ORCH", "FC reconfiguration ordered via MEP Manager");
            plan(t3 + latencies_.t_reconf, 4, "MEPM", "FC reconfiguration applied");
            break;
        }
        case ActionKind::DISMANTLE_VM: {
            wf.kind = WorkflowKind::DISMANTLE_VM;
            wf.locks.insert("vm:" + action.target_vm);
            double t3 = now + 2 * d;
            plan(now, 1, "DECISION", "dismantle " + action.target_vm + via);
            plan(now + d, 2, "ORCH", "decision received by orchestrator");
            plan(t3, 3, "ORCH", "dismantle requested from VIM");
            plan(t3 + 0.5 * latencies_.t_dismantle, 4, "VIM",
                 "dismantling " + action.target_vm);
            plan(t3 + latencies_.t_dismantle, 5, "VIM", "dismantle confirmed");
            break;
        }
        case ActionKind::DEPLOY_DPI: {
            for (const auto& [id, app] : world_.apps) {
                if (app.ran_id == action.target_ran && app.kind == AppKind::DPI &&
                    app.state != AppState::STOPPED) {
                    wf.status = WorkflowStatus::SKIPPED;
                    log(now, wf, 1, "DECISION",
                        "DPI deploy skipped: already present on " + action.target_ran + via);
                    return wf;
                }
            }
            wf.kind = WorkflowKind::DEPLOY_DPI;
            wf.new_app_id = world_.new_app_id("dpi");
            // Prefer the services VM, fall back to any running VM on the RAN.
            for (const auto& [id, vm] : world_.vms) {
                if (vm.ran_id != action.target_ran || vm.state != VmState::RUNNING) continue;
                bool services = false;
                for (const std::string& app_id : vm.app_ids) {
                    auto a = world_.apps.find(app_id);
                    services |= a != world_.apps.end() && a->second.kind == AppKind::SERVICES;
                }
                if (wf.new_vm_id.empty() || services) wf.new_vm_id = vm.id;
                if (services) break;
            }
            if (wf.new_vm_id.empty())
                throw RuntimeFault("no running VM on " + action.target_ran + " to host DPI");
            wf.locks.insert("dpi:" + action.target_ran);
            wf.locks.insert("app:" + wf.new_app_id);
            double t3 = now + 2 * d;
            plan(now, 1, "DECISION", "deploy DPI app on " + action.target_ran + via);
            plan(now + d, 2, "ORCH", "decision received by orchestrator");
            plan(t3, 3, "ORCH", "DPI app start ordered via MEP Manager");
            plan(t3 + 0.5 * latencies_.t_app, 4, "MEPM",
                 "starting " + wf.new_app_id + " on " + wf.new_vm_id);
            plan(t3 + latencies_.t_app, 5, "APP", wf.new_app_id + " reports OK");
            break;
        }
    }
    wf.deadline = wf.plan.empty() ? now : wf.plan.back().time;
    return wf;
}

std::vector<StepEffect> Orchestrator::execute_step(const std::string& workflow_id,
                                                   int step_index, double now) {
    WorkflowState& wf = workflow(workflow_id);
    if (wf.status != WorkflowStatus::RUNNING) return {};
    if (step_index < 0 || step_index >= static_cast<int>(wf.plan.size()))
        throw RuntimeFault("workflow step index out of range");
    const WorkflowState::PlannedStep& step = wf.plan[static_cast<std::size_t>(step_index)];
    log(now, wf, step.number, step.actor, step.description);
    wf.last_step = step.number;

    std::vector<StepEffect> effects;
    auto effect = [&](StepEffect e) { effects.push_back(std::move(e)); };
    bool final_step = step_index + 1 == static_cast<int>(wf.plan.size());

    switch (wf.kind) {
        case WorkflowKind::REPLACE_ASD: {
            const ActionRequest& a = wf.action;
            if (step.number == 3) {
                VmInstance vm;
                vm.id = wf.new_vm_id;
                vm.ran_id = wf.ran_id;
                vm.cpus = static_cast<int>(param_number(a, "cpus", 4));
                vm.ram_gb = param_number(a, "ram_gb", 16.0);
                vm.gpu = param_string(a, "app_kind", "asd_gpu") == "asd_gpu";
                vm.state = VmState::REQUESTED;
                world_.vms[vm.id] = vm;
            } else if (step.number == 4) {
                VmInstance& vm = world_.vm(wf.new_vm_id);
                // Step 4 is where the VIM verifies physical resources.
                if (!world_.fits(wf.ran_id, vm.cpus, vm.ram_gb, vm.gpu)) {
                    wf.failure = "insufficient capacity on " + wf.ran_id;
                    log(now, wf, 4, "VIM", "instantiation failed: " + wf.failure);
                    world_.vms.erase(wf.new_vm_id);
                    finish(wf, WorkflowStatus::FAILED);
                    effect({.kind = StepEffect::Kind::WORKFLOW_FAILED, .ran_id = wf.ran_id});
                    return effects;
                }
                vm.state = VmState::DEPLOYING;
            } else if (step.number == 5) {
                world_.vm(wf.new_vm_id).state = VmState::RUNNING;
            } else if (step.number == 7) {
                AppInstance app;
                app.id = wf.new_app_id;
                app.vm_id = wf.new_vm_id;
                app.ran_id = wf.ran_id;
                app.kind = param_string(a, "app_kind", "asd_gpu") == "asd_gpu"
                               ? AppKind::ASD_GPU
                               : AppKind::ASD_CPU;
                app.state = AppState::STARTING;
                app.profile = param_string(a, "profile", "gpu-caffe2");
                app.batch_size = static_cast<std::int64_t>(param_number(a, "batch_size", 1));
                app.threshold = param_number(a, "threshold", 0.5);
                // New deployments ship with the newest published model.
                app.model_version = world_.model_registry.available_version;
                world_.apps[app.id] = app;
                world_.vm(wf.new_vm_id).app_ids.push_back(app.id);
            } else if (step.number == 8) {
                world_.app(wf.new_app_id).state = AppState::OK;
                effect({.kind = StepEffect::Kind::ASD_AVAILABLE,
                        .ran_id = wf.ran_id,
                        .app_id = wf.new_app_id,
                        .vm_id = wf.new_vm_id});
            } else if (step.number == 11) {
                world_.fc_target[wf.ran_id] = wf.new_app_id;
                effect({.kind = StepEffect::Kind::FC_REDIRECTED,
                        .ran_id = wf.ran_id,
                        .app_id = wf.new_app_id});
            } else if (step.number == 13) {
                VmInstance& old_vm = world_.vm(wf.old_vm_id);
                old_vm.state = VmState::DISMANTLING;
                for (const std::string& app_id : old_vm.app_ids) {
                    world_.app(app_id).state = AppState::STOPPED;
                    effect({.kind = StepEffect::Kind::ASD_STOPPED,
                            .ran_id = wf.ran_id,
                            .app_id = app_id,
                            .vm_id = wf.old_vm_id});
                }
            } else if (step.number == 14) {
                world_.vm(wf.old_vm_id).state = VmState::GONE;
            }
            break;
        }
        case WorkflowKind::AUGMENT_ASD: {
            const ActionRequest& a = wf.action;
            if (step.number == 4) {
                VmInstance& vm = world_.vm(wf.old_vm_id);
                double extra = param_number(a, "ram_gb", 16.0);
                if (!world_.fits(wf.ran_id, 0, extra, !vm.gpu)) {
                    wf.failure = "insufficient capacity on " + wf.ran_id;
                    log(now, wf, 4, "VIM", "augmentation failed: " + wf.failure);
                    finish(wf, WorkflowStatus::FAILED);
                    effect({.kind = StepEffect::Kind::WORKFLOW_FAILED, .ran_id = wf.ran_id});
                    return effects;
                }
                vm.gpu = true;
                vm.ram_gb += extra;
            } else if (step.number == 6) {
                AppInstance app;
                app.id = wf.new_app_id;
                app.vm_id = wf.old_vm_id;
                app.ran_id = wf.ran_id;
                app.kind = AppKind::ASD_GPU;
                app.state = AppState::STARTING;
                app.profile = param_string(a, "profile", "gpu-caffe2");
                app.batch_size = static_cast<std::int64_t>(param_number(a, "batch_size", 1));
                app.threshold = param_number(a, "threshold", 0.5);
                app.model_version = world_.model_registry.available_version;
                world_.apps[app.id] = app;
                world_.vm(wf.old_vm_id).app_ids.push_back(app.id);
            } else if (step.number == 7) {
                world_.app(wf.new_app_id).state = AppState::OK;
                effect({.kind = StepEffect::Kind::ASD_AVAILABLE,
                        .ran_id = wf.ran_id,
                        .app_id = wf.new_app_id,
                        .vm_id = wf.old_vm_id});
            } else if (step.number == 10) {
                world_.fc_target[wf.ran_id] = wf.new_app_id;
                effect({.kind = StepEffect::Kind::FC_REDIRECTED,
                        .ran_id = wf.ran_id,
                        .app_id = wf.new_app_id});
            } else if (step.number == 11) {
                world_.app(wf.old_app_id).state = AppState::STOPPED;
                effect({.kind = StepEffect::Kind::ASD_STOPPED,
                        .ran_id = wf.ran_id,
                        .app_id = wf.old_app_id,
                        .vm_id = wf.old_vm_id});
            }
            break;
        }
        case WorkflowKind::INCREASE_RAM: {
            if (step.number == 4) {
                VmInstance& vm = world_.vm(wf.action.target_vm);
                double delta = param_number(wf.action, "ram_delta_gb", 2.0);
                if (!world_.fits(vm.ran_id, 0, delta, false)) {
                    wf.failure = "insufficient RAM capacity on " + vm.ran_id;
                    log(now, wf, 4, "VI", "RAM increase failed: " + wf.failure);
                    finish(wf, WorkflowStatus::FAILED);
                    effect({.kind = StepEffect::Kind::WORKFLOW_FAILED, .ran_id = vm.ran_id});
                    return effects;
                }
                vm.ram_gb += delta;
                effect({.kind = StepEffect::Kind::RAM_INCREASED,
                        .ran_id = vm.ran_id,
                        .vm_id = vm.id});
            }
            break;
        }
        case WorkflowKind::UPDATE_MODEL: {
            if (step.number == 4) {
                AppInstance& app = world_.app(wf.action.target_app);
                if (app.state == AppState::STOPPED)
                    throw RuntimeFault("cannot update model of a stopped app");
                int version = static_cast<int>(param_number(wf.action, "version", 0));
                if (version <= 0) version = world_.model_registry.available_version;
                app.model_version = version;
                StepEffect e;
                e.kind = StepEffect::Kind::MODEL_APPLIED;
                e.ran_id = app.ran_id;
                e.app_id = app.id;
                e.new_model_version = version;
                effect(e);
                auto t = wf.action.params.find("new_threshold");
                if (t != wf.action.params.end()) {
                    app.threshold = param_number(wf.action, "new_threshold", app.threshold);
                    StepEffect te;
                    te.kind = StepEffect::Kind::THRESHOLD_APPLIED;
                    te.ran_id = app.ran_id;
                    te.app_id = app.id;
                    te.new_threshold = app.threshold;
                    effect(te);
                }
            }
            break;
        }
        case WorkflowKind::SET_OFFSET: {
            if (step.number == 4) {
                StepEffect e;
                e.kind = StepEffect::Kind::OFFSET_APPLIED;
                e.ran_id = wf.ran_id;
                e.new_offset =
                    static_cast<std::int64_t>(param_number(wf.action, "new_offset", 0));
                e.offset_factor =
                    static_cast<std::int64_t>(param_number(wf.action, "factor", 0));
                effect(e);
            }
            break;
        }
        case WorkflowKind::RECONFIGURE_FC:
            break; // opaque reconfiguration, no pipeline effect
        case WorkflowKind::DISMANTLE_VM: {
            if (step.number == 4) {
                VmInstance& vm = world_.vm(wf.action.target_vm);
                vm.state = VmState::DISMANTLING;
                for (const std::string& app_id : vm.app_ids) {
                    world_.app(app_id).state = AppState::STOPPED;
                    effect({.kind = StepEffect::Kind::ASD_STOPPED,
                            .ran_id = vm.ran_id,
                            .app_id = app_id,
                            .vm_id = vm.id});
                }
            } else if (step.number == 5) {
                world_.vm(wf.action.target_vm).state = VmState::GONE;
            }
            break;
        }
        case WorkflowKind::DEPLOY_DPI: {
            if (step.number == 4) {
                AppInstance app;
                app.id = wf.new_app_id;
                app.vm_id = wf.new_vm_id;
                app.ran_id = wf.ran_id;
                app.kind = AppKind::DPI;
                app.state = AppState::STARTING;
                world_.apps[app.id] = app;
                world_.vm(wf.new_vm_id).app_ids.push_back(app.id);
            } else if (step.number == 5) {
                world_.app(wf.new_app_id).state = AppState::OK;
                effect({.kind = StepEffect::Kind::DPI_STARTED,
                        .ran_id = wf.ran_id,
                        .app_id = wf.new_app_id,
                        .vm_id = wf.new_vm_id});
            }
            break;
        }
    }

    if (final_step) {
        finish(wf, WorkflowStatus::SUCCEEDED);
        effect({.kind = StepEffect::Kind::WORKFLOW_DONE, .ran_id = wf.ran_id});
    }
    return effects;
}

} // namespace adsim
