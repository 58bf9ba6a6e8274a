#include <doctest.h>

#include <algorithm>

#include "core/orchestration.hpp"
#include "core/rng.hpp"

using namespace adsim;

namespace {

World small_world() {
    World w;
    w.rans["ran-a"] = {"ran-a", {32, 128.0, 1}};

    VmInstance vm2;
    vm2.id = "vm2";
    vm2.ran_id = "ran-a";
    vm2.cpus = 4;
    vm2.ram_gb = 8.0;
    VmInstance vm3;
    vm3.id = "vm3";
    vm3.ran_id = "ran-a";
    vm3.cpus = 4;
    vm3.ram_gb = 4.0;

    AppInstance fc;
    fc.id = "fc1";
    fc.vm_id = "vm2";
    fc.ran_id = "ran-a";
    fc.kind = AppKind::FLOW_COLLECTOR;
    AppInstance asd;
    asd.id = "asd-cpu1";
    asd.vm_id = "vm3";
    asd.ran_id = "ran-a";
    asd.kind = AppKind::ASD_CPU;
    asd.profile = "cpu-tf";
    asd.batch_size = 16384;
    vm2.app_ids.push_back(fc.id);
    vm3.app_ids.push_back(asd.id);

    w.vms["vm2"] = vm2;
    w.vms["vm3"] = vm3;
    w.apps["fc1"] = fc;
    w.apps["asd-cpu1"] = asd;
    w.fc_target["ran-a"] = "asd-cpu1";
    w.model_registry = {1, false};
    return w;
}

ActionRequest gpu_deploy() {
    ActionRequest a;
    a.kind = ActionKind::DEPLOY_ME_APP;
    a.target_ran = "ran-a";
    a.target_app = "asd-cpu1";
    a.target_vm = "vm3";
    a.params = {{"app_kind", "asd_gpu"}, {"profile", "gpu-caffe2"},
                {"batch_size", "262144"}};
    return a;
}

/// Runs all planned steps of a workflow in time order, checking the
/// detection-continuity invariant after each one. Returns the effects seen.
std::vector<StepEffect> drive(Orchestrator& orch, World& world, WorkflowState& wf,
                              std::vector<std::string>* violations = nullptr) {
    std::vector<StepEffect> all;
    for (std::size_t i = 0; i < wf.plan.size(); ++i) {
        auto effects = orch.execute_step(wf.id, static_cast<int>(i), wf.plan[i].time);
        all.insert(all.end(), effects.begin(), effects.end());
        if (violations != nullptr) {
            auto target = world.fc_target.find("ran-a");
            bool ok = target != world.fc_target.end() &&
                      world.apps.count(target->second) != 0 &&
                      world.apps[target->second].state == AppState::OK;
            if (!ok)
                violations->push_back("continuity broken at step " +
                                      std::to_string(wf.plan[i].number));
        }
    }
    return all;
}

} // namespace

TEST_CASE("happy-path scale-up runs steps 1..14 in strictly increasing time") {
    World w = small_world();
    Orchestrator orch(w, LatencyConfig{});
    WorkflowState& wf = orch.enact(gpu_deploy(), 100.0);
    REQUIRE(wf.plan.size() == 14);

    std::vector<std::string> violations;
    drive(orch, w, wf, &violations);
    CHECK(violations.empty());
    CHECK(wf.status == WorkflowStatus::SUCCEEDED);

    const auto& events = orch.events();
    REQUIRE(events.size() == 14);
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].step == static_cast<int>(i + 1));
        if (i > 0) CHECK(events[i].time > events[i - 1].time);
    }
    // 3 -> 5 spans t_d, 6 -> 8 spans t_app, 9 -> 11 spans t_reconf.
    CHECK(events[4].time - events[2].time == doctest::Approx(30.0));
    CHECK(events[7].time - events[5].time == doctest::Approx(3.0));
    CHECK(events[10].time - events[8].time == doctest::Approx(2.0));
    CHECK(events[13].time - events[11].time == doctest::Approx(2.0));

    // End state: new GPU ASD targeted, old VM gone.
    CHECK(w.fc_target["ran-a"] == wf.new_app_id);
    CHECK(w.apps[wf.new_app_id].kind == AppKind::ASD_GPU);
    CHECK(w.apps[wf.new_app_id].state == AppState::OK);
    CHECK(w.vms["vm3"].state == VmState::GONE);
    CHECK(w.apps["asd-cpu1"].state == AppState::STOPPED);
    CHECK(orch.locked_resources().empty());
}

TEST_CASE("the old VM is dismantled only after the redirect confirmation") {
    World w = small_world();
    Orchestrator orch(w, LatencyConfig{});
    WorkflowState& wf = orch.enact(gpu_deploy(), 0.0);
    double t11 = 0.0, t12 = 0.0;
    for (const auto& step : wf.plan) {
        if (step.number == 11) t11 = step.time;
        if (step.number == 12) t12 = step.time;
    }
    CHECK(t11 > 0.0);
    CHECK(t12 > t11);

    // Before step 11 executes, the target must still be the CPU ASD.
    for (std::size_t i = 0; i < 10; ++i)
        orch.execute_step(wf.id, static_cast<int>(i), wf.plan[i].time);
    CHECK(w.fc_target["ran-a"] == "asd-cpu1");
    CHECK(w.vms["vm3"].state == VmState::RUNNING);
    orch.execute_step(wf.id, 10, wf.plan[10].time); // step 11
    CHECK(w.fc_target["ran-a"] == wf.new_app_id);
}

TEST_CASE("capacity shortage fails the workflow at step 4 and keeps the old pipeline") {
    World w = small_world();
    w.rans["ran-a"].capacity = {10, 14.0, 1}; // no headroom for a 16 GB VM
    Orchestrator orch(w, LatencyConfig{});
    WorkflowState& wf = orch.enact(gpu_deploy(), 0.0);
    std::vector<StepEffect> effects = drive(orch, w, wf);
    CHECK(wf.status == WorkflowStatus::FAILED);
    CHECK(wf.failure.find("capacity") != std::string::npos);
    bool failed_effect = false;
    for (const auto& e : effects)
        failed_effect |= e.kind == StepEffect::Kind::WORKFLOW_FAILED;
    CHECK(failed_effect);

    CHECK(w.fc_target["ran-a"] == "asd-cpu1");
    CHECK(w.apps["asd-cpu1"].state == AppState::OK);
    CHECK(w.vms["vm3"].state == VmState::RUNNING);
    CHECK(w.vms.count(wf.new_vm_id) == 0);
    CHECK(orch.locked_resources().empty());
    // The failure is visible in the log at step 4.
    bool saw_failure_line = false;
    for (const auto& e : orch.events())
        saw_failure_line |= e.step == 4 && e.description.find("failed") != std::string::npos;
    CHECK(saw_failure_line);
}

TEST_CASE("increase_ram applies after t_of without touching apps") {
    World w = small_world();
    LatencyConfig lat;
    lat.t_of = 7.0;
    Orchestrator orch(w, lat);
    ActionRequest a;
    a.kind = ActionKind::INCREASE_RAM;
    a.target_vm = "vm3";
    a.target_ran = "ran-a";
    a.params = {{"ram_delta_gb", "2"}};
    WorkflowState& wf = orch.enact(a, 10.0);
    drive(orch, w, wf);
    CHECK(wf.status == WorkflowStatus::SUCCEEDED);
    CHECK(w.vms["vm3"].ram_gb == doctest::Approx(6.0));
    CHECK(w.apps["asd-cpu1"].state == AppState::OK);
    double applied_at = 0.0;
    for (const auto& e : orch.events())
        if (e.step == 4) applied_at = e.time;
    CHECK(applied_at == doctest::Approx(10.0 + 2 * lat.msg + 7.0));
}

TEST_CASE("model update bumps the version at now + t_of") {
    World w = small_world();
    w.model_registry = {4, true};
    Orchestrator orch(w, LatencyConfig{});
    ActionRequest a;
    a.kind = ActionKind::UPDATE_MODEL;
    a.target_app = "asd-cpu1";
    a.target_ran = "ran-a";
    WorkflowState& wf = orch.enact(a, 0.0);
    auto effects = drive(orch, w, wf);
    CHECK(w.apps["asd-cpu1"].model_version == 4);
    bool saw_model = false;
    for (const auto& e : effects)
        if (e.kind == StepEffect::Kind::MODEL_APPLIED) {
            saw_model = true;
            CHECK(e.new_model_version == 4);
        }
    CHECK(saw_model);
}

TEST_CASE("set_offset reports the factor for the simulator to resolve") {
    World w = small_world();
    Orchestrator orch(w, LatencyConfig{});
    ActionRequest a;
    a.kind = ActionKind::SET_OFFSET;
    a.target_ran = "ran-a";
    a.params = {{"factor", "2"}};
    WorkflowState& wf = orch.enact(a, 0.0);
    auto effects = drive(orch, w, wf);
    REQUIRE(effects.size() >= 1);
    bool saw = false;
    for (const auto& e : effects)
        if (e.kind == StepEffect::Kind::OFFSET_APPLIED) {
            saw = true;
            CHECK(e.offset_factor == 2);
            CHECK(e.new_offset == 0);
        }
    CHECK(saw);
}

TEST_CASE("locked resources reject a second workflow") {
    World w = small_world();
    Orchestrator orch(w, LatencyConfig{});
    orch.enact(gpu_deploy(), 0.0);
    CHECK_THROWS_AS(orch.enact(gpu_deploy(), 1.0), RuntimeFault);

    ActionRequest offset;
    offset.kind = ActionKind::SET_OFFSET;
    offset.target_ran = "ran-a";
    offset.params = {{"factor", "2"}};
    CHECK_THROWS_AS(orch.enact(offset, 1.0), RuntimeFault); // fc path locked
}

TEST_CASE("deploying the kind that is already active is skipped") {
    World w = small_world();
    w.apps["asd-cpu1"].kind = AppKind::ASD_GPU; // pretend GPU already serves
    Orchestrator orch(w, LatencyConfig{});
    WorkflowState& wf = orch.enact(gpu_deploy(), 5.0);
    CHECK(wf.status == WorkflowStatus::SKIPPED);
    CHECK(wf.plan.empty());
    CHECK(orch.locked_resources().empty());
}

TEST_CASE("dpi deploys onto the services VM when present") {
    World w = small_world();
    VmInstance vm1;
    vm1.id = "vm1";
    vm1.ran_id = "ran-a";
    vm1.cpus = 2;
    vm1.ram_gb = 4.0;
    AppInstance svc;
    svc.id = "svc1";
    svc.vm_id = "vm1";
    svc.ran_id = "ran-a";
    svc.kind = AppKind::SERVICES;
    vm1.app_ids.push_back(svc.id);
    w.vms["vm1"] = vm1;
    w.apps["svc1"] = svc;

    Orchestrator orch(w, LatencyConfig{});
    ActionRequest a;
    a.kind = ActionKind::DEPLOY_DPI;
    a.target_ran = "ran-a";
    a.params = {{"app_image", "snort-cc"}};
    WorkflowState& wf = orch.enact(a, 0.0);
    drive(orch, w, wf);
    CHECK(wf.status == WorkflowStatus::SUCCEEDED);
    CHECK(w.apps[wf.new_app_id].kind == AppKind::DPI);
    CHECK(w.apps[wf.new_app_id].vm_id == "vm1");
    CHECK(w.apps[wf.new_app_id].state == AppState::OK);

    // A second DPI deploy on the same RAN is a no-op.
    WorkflowState& again = orch.enact(a, 50.0);
    CHECK(again.status == WorkflowStatus::SKIPPED);
}

TEST_CASE("augment mode keeps the VM and stops the old app last") {
    World w = small_world();
    Orchestrator orch(w, LatencyConfig{}, Orchestrator::ScaleUpMode::AUGMENT_VM);
    WorkflowState& wf = orch.enact(gpu_deploy(), 0.0);
    std::vector<std::string> violations;
    drive(orch, w, wf, &violations);
    CHECK(violations.empty());
    CHECK(wf.status == WorkflowStatus::SUCCEEDED);
    CHECK(w.vms["vm3"].state == VmState::RUNNING);
    CHECK(w.vms["vm3"].gpu);
    CHECK(w.vms["vm3"].ram_gb > 4.0);
    CHECK(w.apps["asd-cpu1"].state == AppState::STOPPED);
    CHECK(w.fc_target["ran-a"] == wf.new_app_id);
}

TEST_CASE("snapshot reflects the world at the call instant") {
    World empty;
    MonitoringSnapshot s0 = snapshot(empty, 12.5);
    CHECK(s0.time == 12.5);
    CHECK(s0.vms.empty());
    CHECK(s0.apps.empty());
    CHECK(s0.nad_outputs.empty());

    World w = small_world();
    w.ran_telemetry["ran-a"] = {1000.0, 1200.0};
    w.asd_telemetry["asd-cpu1"].measured_feature_rate = 499.0;
    w.asd_telemetry["asd-cpu1"].offset = 2;
    w.vm_ram_used_gb["vm3"] = 3.0;
    MonitoringSnapshot s = snapshot(w, 55.0);
    CHECK(s.time == 55.0);
    REQUIRE(s.rans.size() == 1);
    CHECK(s.rans[0].flow_rate == doctest::Approx(1000.0));
    CHECK(s.rans[0].forecast_rate == doctest::Approx(1200.0));
    bool found = false;
    for (const auto& a : s.apps)
        if (a.id == "asd-cpu1") {
            found = true;
            REQUIRE(a.asd.has_value());
            CHECK(a.asd->measured_feature_rate == doctest::Approx(499.0));
            CHECK(a.asd->offset == 2);
        }
    CHECK(found);
    for (const auto& vm : s.vms)
        if (vm.id == "vm3") CHECK(vm.ram_usage == doctest::Approx(0.75));
}

TEST_CASE("randomized latencies keep ordering and continuity invariants") {
    Rng rng(2024);
    for (int run = 0; run < 100; ++run) {
        World w = small_world();
        LatencyConfig lat;
        lat.t_d = rng.uniform(0.05, 60.0);
        lat.t_app = rng.uniform(0.01, 10.0);
        lat.t_reconf = rng.uniform(0.01, 10.0);
        lat.t_dismantle = rng.uniform(0.01, 10.0);
        lat.msg = rng.uniform(0.001, 1.0);
        Orchestrator orch(w, lat);
        WorkflowState& wf = orch.enact(gpu_deploy(), rng.uniform(0.0, 1000.0));
        std::vector<std::string> violations;
        drive(orch, w, wf, &violations);
        CHECK(violations.empty());
        CHECK(wf.status == WorkflowStatus::SUCCEEDED);
        const auto& events = orch.events();
        REQUIRE(events.size() == 14);
        double t11 = 0.0, t12 = 0.0;
        for (std::size_t i = 0; i < 14; ++i) {
            CHECK(events[i].step == static_cast<int>(i + 1));
            if (i > 0) CHECK(events[i].time > events[i - 1].time);
            if (events[i].step == 11) t11 = events[i].time;
            if (events[i].step == 12) t12 = events[i].time;
        }
        CHECK(t12 > t11);
    }
}
