#ifndef ADSIM_CORE_POLICY_HPP
#define ADSIM_CORE_POLICY_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "core/errors.hpp"

namespace adsim {

enum class PolicyFamily { VI, ADF, MEAPP };
enum class Comparator { GT, GE, LT, LE, EQ, IN_RANGE };
enum class ActionKind {
    INCREASE_RAM,
    UPDATE_MODEL,
    DEPLOY_ME_APP,
    DISMANTLE_VM,
    RECONFIGURE_FC,
    SET_OFFSET,
    DEPLOY_DPI,
};

const char* to_string(PolicyFamily f);
const char* to_string(ActionKind k);
const char* to_string(Comparator c);

struct PredicateValue {
    enum class Type { NUMBER, STRING, NAMED, RANGE };
    Type type = Type::NUMBER;
    double number = 0.0;
    std::string text; // STRING literal or NAMED threshold name
    double lo = 0.0, hi = 0.0;

    bool operator==(const PredicateValue&) const = default;
};

/// One conjunct: <subject>.<metric> <comparator> <value>.
struct Predicate {
    std::string subject; // vm | app | model | nad_output
    std::string metric;
    Comparator cmp = Comparator::GE;
    PredicateValue value;

    bool operator==(const Predicate&) const = default;
};

struct ActionTemplate {
    ActionKind kind = ActionKind::INCREASE_RAM;
    std::map<std::string, std::string> params;

    bool operator==(const ActionTemplate&) const = default;
};

/// A fully bound action produced by policy evaluation.
struct ActionRequest {
    ActionKind kind = ActionKind::INCREASE_RAM;
    std::string target_vm;
    std::string target_app;
    std::string target_ran;
    std::map<std::string, std::string> params;

    bool operator==(const ActionRequest&) const = default;
};

struct Policy {
    std::string id;
    PolicyFamily family = PolicyFamily::VI;
    std::vector<Predicate> conditions;
    std::optional<std::string> location; // RAN filter
    std::optional<std::pair<double, double>> active_window; // seconds, [start, end)
    std::vector<ActionTemplate> actions;
    int priority = 0;
    double cooldown = 0.0; // seconds

    bool operator==(const Policy&) const = default;
};

// ---------------------------------------------------------------------------
// Monitoring snapshot

enum class VmState { REQUESTED, DEPLOYING, RUNNING, DISMANTLING, GONE };
enum class AppKind { FLOW_COLLECTOR, ASD_CPU, ASD_GPU, NAD, DPI, SERVICES };
enum class AppState { STARTING, OK, STOPPED };

const char* to_string(VmState s);
const char* to_string(AppKind k);
const char* to_string(AppState s);

struct VmMetrics {
    std::string id;
    std::string ran_id;
    double cpu_usage = 0.0; // fraction
    double ram_usage = 0.0; // fraction
    double ram_gb = 0.0;
    int cpus = 0;
    bool gpu = false;
    int hosted_apps = 0;
    VmState state = VmState::RUNNING;
};

/// Extra metrics present only for ASD apps.
struct AsdMetrics {
    std::string backend; // profile name
    std::int64_t offset = 1;
    std::int64_t batch_size = 1;
    double measured_feature_rate = 0.0;
    double num_net_flows_per_s = 0.0;
    double forecast_net_flows_per_s = 0.0;
    double forecast_feature_rate = 0.0;
    double forecast_load_fraction = 0.0; // forecast feature rate / capacity
    int model_version = 1;
    int model_lag = 0; // versions behind the newest improved release
    double threshold = 0.5;
};

struct AppMetrics {
    std::string id;
    std::string vm_id;
    std::string ran_id;
    AppKind kind = AppKind::SERVICES;
    AppState state = AppState::OK;
    std::optional<AsdMetrics> asd;
};

struct RanMetrics {
    std::string id;
    double flow_rate = 0.0;     // measured flows/s
    double forecast_rate = 0.0; // forecast at horizon t_d
};

struct ModelRegistryMetrics {
    int available_version = 1;
    bool improved = false;
};

struct NadOutputMetrics {
    std::string anomaly_type;
    std::string ran_id;
    double time = 0.0;
};

struct MonitoringSnapshot {
    double time = 0.0;
    std::vector<VmMetrics> vms;
    std::vector<AppMetrics> apps;
    std::vector<RanMetrics> rans;
    ModelRegistryMetrics model;
    std::vector<NadOutputMetrics> nad_outputs;
    /// Metric names ("subject.metric") this snapshot can answer. Populated
    /// with the full registry by default_schema().
    std::set<std::string> schema;

    static std::set<std::string> default_schema();
};

/// Referencing a metric the snapshot cannot answer at all; deliberately
/// distinct from a condition evaluating false.
class MetricError : public RuntimeFault {
public:
    using RuntimeFault::RuntimeFault;
};

// ---------------------------------------------------------------------------
// Operations

/// Parses one policy block; rejects unknown subjects/metrics/action kinds and
/// incomplete action params.
Policy parse_policy(const std::string& document);
/// Parses a whole policy file (any number of blocks).
std::vector<Policy> parse_policies(const std::string& document);
std::string serialize_policy(const Policy& policy);

struct PolicyContext {
    const std::map<std::string, double>* thresholds = nullptr; // named values
    std::optional<double> last_fired; // simulated seconds
};

/// Evaluates the policy against a snapshot: one bound action set per
/// matching resource binding; empty when conditions are unmet, the location
/// is excluded, the snapshot time is outside the active window, or the
/// policy is still cooling down.
std::vector<ActionRequest> evaluate_policy(const Policy& policy,
                                           const MonitoringSnapshot& snapshot,
                                           const PolicyContext& ctx);

struct PolicyFiring {
    std::string policy_id;
    int priority = 0;
    ActionRequest action;
};

struct ResolveResult {
    std::vector<PolicyFiring> actions;
    std::vector<std::string> dropped; // human-readable drop reasons
};

/// Deduplicates identical actions, orders by priority descending then policy
/// id, drops losers of conflicting pairs and actions touching locked
/// resources. `touched` maps an action to the resource ids it would modify.
ResolveResult resolve_actions(
    const std::vector<PolicyFiring>& fired,
    const std::function<std::vector<std::string>(const ActionRequest&)>& touched,
    const std::set<std::string>& locked);

/// True when the two kinds cannot proceed on overlapping resources.
bool actions_conflict(ActionKind a, ActionKind b);

} // namespace adsim

#endif
