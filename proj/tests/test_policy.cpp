#include <doctest.h>

#include <map>

#include "core/policy.hpp"
#include "core/rng.hpp"

using namespace adsim;

namespace {

const char* kRamPolicy = R"(
policy vi-ram-relief {
  family VI
  when app.kind == 'asd_cpu' && vm.ram_usage >= $RamUsageMax
  then increase_ram ram_delta_gb=2
  priority 10
  cooldown 60
}
)";

MonitoringSnapshot base_snapshot(double now = 100.0) {
    MonitoringSnapshot snap;
    snap.time = now;
    snap.schema = MonitoringSnapshot::default_schema();

    VmMetrics vm;
    vm.id = "vm3";
    vm.ran_id = "ran-a";
    vm.cpu_usage = 0.4;
    vm.ram_usage = 0.92;
    vm.ram_gb = 4.0;
    vm.hosted_apps = 1;
    snap.vms.push_back(vm);

    AppMetrics app;
    app.id = "asd-cpu1";
    app.vm_id = "vm3";
    app.ran_id = "ran-a";
    app.kind = AppKind::ASD_CPU;
    app.state = AppState::OK;
    AsdMetrics asd;
    asd.backend = "cpu-tf";
    asd.offset = 1;
    asd.batch_size = 16384;
    asd.num_net_flows_per_s = 900000.0;
    asd.measured_feature_rate = 900000.0;
    asd.model_version = 3;
    asd.model_lag = 0;
    app.asd = asd;
    snap.apps.push_back(app);

    RanMetrics ran;
    ran.id = "ran-a";
    ran.flow_rate = 900000.0;
    ran.forecast_rate = 950000.0;
    snap.rans.push_back(ran);
    snap.model = {3, false};
    return snap;
}

std::map<std::string, double> thresholds() {
    return {{"RamUsageMax", 0.85}, {"NetFlowsMaxForCpu", 842600.0}, {"ScaleHeadroom", 0.7}};
}

} // namespace

TEST_CASE("the RAM policy parses into the expected structure") {
    Policy p = parse_policy(kRamPolicy);
    CHECK(p.id == "vi-ram-relief");
    CHECK(p.family == PolicyFamily::VI);
    REQUIRE(p.conditions.size() == 2);
    CHECK(p.conditions[1].subject == "vm");
    CHECK(p.conditions[1].metric == "ram_usage");
    CHECK(p.conditions[1].cmp == Comparator::GE);
    CHECK(p.conditions[1].value.type == PredicateValue::Type::NAMED);
    CHECK(p.conditions[1].value.text == "RamUsageMax");
    REQUIRE(p.actions.size() == 1);
    CHECK(p.actions[0].kind == ActionKind::INCREASE_RAM);
    CHECK(p.actions[0].params.at("ram_delta_gb") == "2");
    CHECK(p.priority == 10);
    CHECK(p.cooldown == 60.0);
}

TEST_CASE("parse rejects malformed policies") {
    CHECK_THROWS_AS(parse_policy("policy x {\n family VI\n when vm.ram_usage >= 0.8\n}\n"),
                    ParseError); // no actions
    CHECK_THROWS_AS(parse_policy("policy x {\n family VI\n then increase_ram ram_delta_gb=1\n}\n"),
                    ParseError); // no conditions
    CHECK_THROWS_AS(
        parse_policy("policy x {\n family VI\n when vm.nope >= 1\n then increase_ram ram_delta_gb=1\n}\n"),
        ParseError); // unknown metric
    CHECK_THROWS_AS(
        parse_policy("policy x {\n family VI\n when vm.ram_usage >= 1\n then explode\n}\n"),
        ParseError); // unknown action kind
    CHECK_THROWS_AS(
        parse_policy("policy x {\n family VI\n when app.kind >= 3\n then increase_ram ram_delta_gb=1\n}\n"),
        ParseError); // string metric with numeric comparator
    CHECK_THROWS_AS(
        parse_policy("policy x {\n family VI\n when vm.ram_usage >= 1\n then increase_ram\n}\n"),
        ParseError); // missing required param
    CHECK_THROWS_AS(
        parse_policy("policy x {\n family ADF\n when nad_output.anomaly_type == 'x' && app.is_asd == 1\n then deploy_dpi app_image=y\n}\n"),
        ParseError); // nad_output mixed with app subject
    CHECK_THROWS_AS(
        parse_policy("policy x {\n family VI\n when vm.ram_usage >= 1\n then set_offset new_offset=2 factor=2\n}\n"),
        ParseError); // both offset forms
}

TEST_CASE("parse -> serialize -> parse is the identity") {
    const char* texts[] = {
        kRamPolicy,
        R"(policy adf-model-update {
  family ADF
  when app.is_asd == 1 && app.model_lag >= 1
  then update_model
  priority 8
  cooldown 60
})",
        R"(policy meapp-gpu-scaleup {
  family MEAPP
  when app.kind == 'asd_cpu' && app.num_net_flows_per_s >= $NetFlowsMaxForCpu
  then deploy_me_app app_kind=asd_gpu batch_size=262144 profile=gpu-caffe2
  priority 20
  cooldown 60
})",
        R"(policy meapp-dpi-on-cc {
  family MEAPP
  when nad_output.anomaly_type == 'suspicious_cc'
  then deploy_dpi app_image=snort-cc
  priority 15
  cooldown 60
})",
        R"(policy windowed {
  family VI
  when vm.cpu_usage in [0.25, 0.75]
  where ran=ran-b
  within 10..20
  then increase_ram ram_delta_gb=1
  then dismantle_vm
  priority -3
  cooldown 0.5
})",
    };
    for (const char* text : texts) {
        Policy once = parse_policy(text);
        Policy twice = parse_policy(serialize_policy(once));
        CHECK(once == twice);
    }
}

TEST_CASE("RAM policy fires on the overloaded VM") {
    Policy p = parse_policy(kRamPolicy);
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    auto actions = evaluate_policy(p, base_snapshot(), ctx);
    REQUIRE(actions.size() == 1);
    CHECK(actions[0].kind == ActionKind::INCREASE_RAM);
    CHECK(actions[0].target_vm == "vm3");
    CHECK(actions[0].target_ran == "ran-a");

    MonitoringSnapshot calm = base_snapshot();
    calm.vms[0].ram_usage = 0.5;
    CHECK(evaluate_policy(p, calm, ctx).empty());
}

TEST_CASE("scale-up policy fires above the named flow threshold") {
    Policy p = parse_policy(R"(
policy meapp-gpu-scaleup {
  family MEAPP
  when app.kind == 'asd_cpu' && app.num_net_flows_per_s >= $NetFlowsMaxForCpu
  then deploy_me_app app_kind=asd_gpu profile=gpu-caffe2 batch_size=262144
  priority 20
})");
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    auto actions = evaluate_policy(p, base_snapshot(), ctx);
    REQUIRE(actions.size() == 1);
    CHECK(actions[0].kind == ActionKind::DEPLOY_ME_APP);
    CHECK(actions[0].target_ran == "ran-a");
    CHECK(actions[0].target_app == "asd-cpu1");

    MonitoringSnapshot low = base_snapshot();
    low.apps[0].asd->num_net_flows_per_s = 500000.0;
    CHECK(evaluate_policy(p, low, ctx).empty());
}

TEST_CASE("model update policy compares versions through model_lag") {
    Policy p = parse_policy(R"(
policy adf-model-update {
  family ADF
  when app.is_asd == 1 && app.model_lag >= 1
  then update_model
})");
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    MonitoringSnapshot snap = base_snapshot();
    snap.model = {4, true};
    snap.apps[0].asd->model_version = 3;
    snap.apps[0].asd->model_lag = 1;
    auto actions = evaluate_policy(p, snap, ctx);
    REQUIRE(actions.size() == 1);
    CHECK(actions[0].kind == ActionKind::UPDATE_MODEL);
    CHECK(actions[0].target_app == "asd-cpu1");
    snap.apps[0].asd->model_lag = 0;
    CHECK(evaluate_policy(p, snap, ctx).empty());
}

TEST_CASE("DPI policy binds each suspicious NAD output") {
    Policy p = parse_policy(R"(
policy meapp-dpi-on-cc {
  family MEAPP
  when nad_output.anomaly_type == 'suspicious_cc'
  then deploy_dpi app_image=snort-cc
})");
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    MonitoringSnapshot snap = base_snapshot();
    CHECK(evaluate_policy(p, snap, ctx).empty());
    snap.nad_outputs.push_back({"suspicious_cc", "ran-a", 99.0});
    snap.nad_outputs.push_back({"binary", "ran-b", 99.5});
    auto actions = evaluate_policy(p, snap, ctx);
    REQUIRE(actions.size() == 1);
    CHECK(actions[0].target_ran == "ran-a");
}

TEST_CASE("cooldown, active window and location filter suppress firing") {
    Policy p = parse_policy(kRamPolicy);
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    MonitoringSnapshot snap = base_snapshot(100.0);

    ctx.last_fired = 70.0; // 30 s ago, cooldown 60
    CHECK(evaluate_policy(p, snap, ctx).empty());
    ctx.last_fired = 30.0;
    CHECK(evaluate_policy(p, snap, ctx).size() == 1);

    Policy windowed = p;
    windowed.active_window = {{0.0, 50.0}};
    PolicyContext fresh;
    fresh.thresholds = &t;
    CHECK(evaluate_policy(windowed, snap, fresh).empty());
    windowed.active_window = {{0.0, 200.0}};
    CHECK(evaluate_policy(windowed, snap, fresh).size() == 1);

    Policy elsewhere = p;
    elsewhere.location = "ran-z";
    CHECK(evaluate_policy(elsewhere, snap, fresh).empty());
}

TEST_CASE("a policy with cooldown c fires at most once per c seconds") {
    Policy p = parse_policy(kRamPolicy);
    auto t = thresholds();
    std::optional<double> last_fired;
    int fired = 0;
    for (double now = 0.0; now < 300.0; now += 3.0) {
        PolicyContext ctx;
        ctx.thresholds = &t;
        ctx.last_fired = last_fired;
        if (!evaluate_policy(p, base_snapshot(now), ctx).empty()) {
            if (last_fired) CHECK(now - *last_fired >= p.cooldown);
            last_fired = now;
            ++fired;
        }
    }
    CHECK(fired == 5); // 0, 60, 120, 180, 240
}

TEST_CASE("missing schema metric is an error, not a false condition") {
    Policy p = parse_policy(kRamPolicy);
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    MonitoringSnapshot snap = base_snapshot();
    snap.schema.erase("vm.ram_usage");
    CHECK_THROWS_AS(evaluate_policy(p, snap, ctx), MetricError);

    // An unknown named threshold is likewise an error.
    MonitoringSnapshot ok = base_snapshot();
    std::map<std::string, double> missing{{"NetFlowsMaxForCpu", 1.0}};
    PolicyContext ctx2;
    ctx2.thresholds = &missing;
    CHECK_THROWS_AS(evaluate_policy(p, ok, ctx2), MetricError);
}

TEST_CASE("GE predicates are monotone in the metric value") {
    Policy p = parse_policy(kRamPolicy);
    auto t = thresholds();
    PolicyContext ctx;
    ctx.thresholds = &t;
    Rng rng(55);
    for (int i = 0; i < 100; ++i) {
        double v = rng.uniform(0.0, 1.0);
        MonitoringSnapshot snap = base_snapshot();
        snap.vms[0].ram_usage = v;
        bool fired = !evaluate_policy(p, snap, ctx).empty();
        if (fired) {
            snap.vms[0].ram_usage = std::min(1.0, v + rng.uniform(0.0, 1.0 - v));
            CHECK(!evaluate_policy(p, snap, ctx).empty());
        }
    }
}

// ---------------------------------------------------------------------------
// resolve_actions

namespace {

ActionRequest request(ActionKind kind, const std::string& vm, const std::string& ran,
                      std::map<std::string, std::string> params = {}) {
    ActionRequest a;
    a.kind = kind;
    a.target_vm = vm;
    a.target_ran = ran;
    a.params = std::move(params);
    return a;
}

std::vector<std::string> touched(const ActionRequest& a) {
    switch (a.kind) {
        case ActionKind::INCREASE_RAM:
        case ActionKind::DISMANTLE_VM: return {"vm:" + a.target_vm};
        case ActionKind::UPDATE_MODEL: return {"app:" + a.target_app};
        case ActionKind::DEPLOY_ME_APP: return {"fc:" + a.target_ran, "vm:" + a.target_vm};
        case ActionKind::SET_OFFSET:
        case ActionKind::RECONFIGURE_FC: return {"fc:" + a.target_ran};
        default: return {"dpi:" + a.target_ran};
    }
}

} // namespace

TEST_CASE("identical actions deduplicate to one") {
    ActionRequest a = request(ActionKind::INCREASE_RAM, "vm3", "ran-a",
                              {{"ram_delta_gb", "2"}});
    ResolveResult r = resolve_actions({{"p1", 5, a}, {"p2", 1, a}}, touched, {});
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].policy_id == "p1"); // higher priority kept
}

TEST_CASE("conflicting deploy and dismantle resolve by priority") {
    ActionRequest deploy = request(ActionKind::DEPLOY_ME_APP, "vm3", "ran-a",
                                   {{"app_kind", "asd_gpu"}});
    ActionRequest dismantle = request(ActionKind::DISMANTLE_VM, "vm3", "ran-a");
    ResolveResult r =
        resolve_actions({{"low", 1, dismantle}, {"high", 9, deploy}}, touched, {});
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].action.kind == ActionKind::DEPLOY_ME_APP);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].find("conflicts with") != std::string::npos);
}

TEST_CASE("locked resources drop their actions") {
    ActionRequest a = request(ActionKind::SET_OFFSET, "", "ran-a", {{"factor", "2"}});
    ResolveResult r = resolve_actions({{"p", 0, a}}, touched, {"fc:ran-a"});
    CHECK(r.actions.empty());
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].find("mid-workflow") != std::string::npos);
    CHECK(resolve_actions({}, touched, {}).actions.empty());
}

TEST_CASE("conflict resolution matches its enumeration oracle") {
    // Oracle: enumerate every ordered kind pair on overlapping resources and
    // derive keep/drop from the declared exclusion rule.
    const ActionKind kinds[] = {
        ActionKind::INCREASE_RAM,  ActionKind::UPDATE_MODEL, ActionKind::DEPLOY_ME_APP,
        ActionKind::DISMANTLE_VM,  ActionKind::RECONFIGURE_FC, ActionKind::SET_OFFSET,
        ActionKind::DEPLOY_DPI,
    };
    auto oracle_conflicts = [](ActionKind a, ActionKind b) {
        if (a == b) return true;
        if (a == ActionKind::DISMANTLE_VM || b == ActionKind::DISMANTLE_VM) return true;
        auto fc = [](ActionKind k) {
            return k == ActionKind::DEPLOY_ME_APP || k == ActionKind::SET_OFFSET ||
                   k == ActionKind::RECONFIGURE_FC;
        };
        return fc(a) && fc(b);
    };
    auto all_touch_same = [](const ActionRequest&) {
        return std::vector<std::string>{"res:shared"};
    };
    for (ActionKind ka : kinds) {
        for (ActionKind kb : kinds) {
            CHECK(actions_conflict(ka, kb) == oracle_conflicts(ka, kb));
            ActionRequest a = request(ka, "vm1", "ran-a", {{"x", "1"}});
            ActionRequest b = request(kb, "vm1", "ran-a", {{"x", "2"}});
            ResolveResult r =
                resolve_actions({{"p1", 9, a}, {"p2", 1, b}}, all_touch_same, {});
            if (oracle_conflicts(ka, kb)) {
                REQUIRE(r.actions.size() == 1);
                CHECK(r.actions[0].policy_id == "p1");
            } else {
                CHECK(r.actions.size() == 2);
            }
        }
    }
}

TEST_CASE("resolution orders by priority then policy id") {
    ActionRequest a = request(ActionKind::INCREASE_RAM, "vm1", "ran-a",
                              {{"ram_delta_gb", "1"}});
    ActionRequest b = request(ActionKind::INCREASE_RAM, "vm2", "ran-a",
                              {{"ram_delta_gb", "1"}});
    ActionRequest c = request(ActionKind::UPDATE_MODEL, "vm3", "ran-a");
    c.target_app = "asd";
    ResolveResult r = resolve_actions(
        {{"zeta", 1, a}, {"alpha", 1, b}, {"mid", 7, c}}, touched, {});
    REQUIRE(r.actions.size() == 3);
    CHECK(r.actions[0].policy_id == "mid");
    CHECK(r.actions[1].policy_id == "alpha");
    CHECK(r.actions[2].policy_id == "zeta");
}
