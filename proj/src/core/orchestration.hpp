#ifndef ADSIM_CORE_ORCHESTRATION_HPP
#define ADSIM_CORE_ORCHESTRATION_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/policy.hpp"

namespace adsim {

/// Enactment latencies, all in seconds.
struct LatencyConfig {
    double t_d = 30.0;        // VM instantiation (steps 3-5)
    double t_of = 3.0;        // offset / config change
    double t_app = 3.0;       // app start (steps 6-8)
    double t_reconf = 2.0;    // FC redirect (steps 9-11)
    double t_dismantle = 2.0; // steps 12-14
    double msg = 0.05;        // one management-plane message hop

    void validate() const;
};

struct AppInstance {
    std::string id;
    std::string vm_id;
    std::string ran_id;
    AppKind kind = AppKind::SERVICES;
    AppState state = AppState::OK;
    // ASD configuration (meaningful for ASD_CPU / ASD_GPU only).
    std::string profile;
    std::int64_t batch_size = 1;
    double threshold = 0.5;
    int model_version = 1;
};

struct VmInstance {
    std::string id;
    std::string ran_id;
    int cpus = 1;
    double ram_gb = 1.0;
    bool gpu = false;
    VmState state = VmState::RUNNING;
    std::vector<std::string> app_ids;
};

struct RanCapacity {
    int cpus = 16;
    double ram_gb = 64.0;
    int gpu_slots = 1;
};

struct Ran {
    std::string id;
    RanCapacity capacity;
};

/// Rate telemetry the simulator refreshes before each snapshot.
struct RanTelemetry {
    double flow_rate = 0.0;
    double forecast_rate = 0.0;
};

struct AsdTelemetry {
    double measured_feature_rate = 0.0;
    double num_net_flows_per_s = 0.0;
    double forecast_net_flows_per_s = 0.0;
    double forecast_feature_rate = 0.0;
    double forecast_load_fraction = 0.0;
    std::int64_t offset = 1;
};

/// Full infrastructure state of the simulated edge deployment.
struct World {
    std::map<std::string, Ran> rans;
    std::map<std::string, VmInstance> vms;
    std::map<std::string, AppInstance> apps;
    std::map<std::string, std::string> fc_target; // ran -> ASD app receiving features
    ModelRegistryMetrics model_registry;

    std::map<std::string, RanTelemetry> ran_telemetry;
    std::map<std::string, AsdTelemetry> asd_telemetry;
    std::map<std::string, double> vm_ram_used_gb; // absolute GB in use
    std::map<std::string, double> vm_cpu_usage;   // fraction
    std::vector<NadOutputMetrics> recent_anomalies;

    int vm_counter = 0;
    int app_counter = 0;

    VmInstance& vm(const std::string& id);
    AppInstance& app(const std::string& id);
    const VmInstance& vm(const std::string& id) const;
    const AppInstance& app(const std::string& id) const;

    /// Resources used by non-GONE VMs in a RAN.
    RanCapacity used(const std::string& ran_id) const;
    bool fits(const std::string& ran_id, int cpus, double ram_gb, bool gpu) const;

    /// Current ASD app targeted by the RAN's collector, if any.
    const AppInstance* active_asd(const std::string& ran_id) const;

    std::string new_vm_id();
    std::string new_app_id(const std::string& stem);
};

/// Consistent point-in-time view for policy evaluation.
MonitoringSnapshot snapshot(const World& world, double now);

/// One line of the machine-parsable workflow event log.
struct WorkflowEvent {
    double time = 0.0;
    std::string workflow_id;
    int step = 0;
    std::string actor; // DECISION | ORCH | VIM | MEPM | VI | APP
    std::string description;
};

enum class WorkflowStatus { RUNNING, SUCCEEDED, FAILED, SKIPPED };

/// Pipeline-level side effects the embedding simulator must apply when a
/// step executes; infrastructure state is already updated by then.
struct StepEffect {
    enum class Kind {
        NONE,
        ASD_AVAILABLE,  // new ASD app reached OK
        FC_REDIRECTED,  // collector output now feeds target_app
        ASD_STOPPED,    // previous ASD app stopped
        RAM_INCREASED,
        OFFSET_APPLIED, // new_offset carries the resolved value
        MODEL_APPLIED,
        THRESHOLD_APPLIED,
        DPI_STARTED,
        WORKFLOW_FAILED,
        WORKFLOW_DONE,
    };
    Kind kind = Kind::NONE;
    std::string ran_id;
    std::string app_id;
    std::string vm_id;
    std::int64_t new_offset = 0;    // absolute, when > 0
    std::int64_t offset_factor = 0; // multiply current offset, when > 0
    int new_model_version = 0;
    double new_threshold = 0.0;
};

enum class WorkflowKind {
    REPLACE_ASD,
    AUGMENT_ASD,
    INCREASE_RAM,
    UPDATE_MODEL,
    SET_OFFSET,
    RECONFIGURE_FC,
    DISMANTLE_VM,
    DEPLOY_DPI,
};

struct WorkflowState {
    struct PlannedStep {
        double time = 0.0;
        int number = 0;
        std::string actor;
        std::string description;
    };

    std::string id;
    ActionRequest action;
    WorkflowKind kind = WorkflowKind::INCREASE_RAM;
    std::string policy_id;
    WorkflowStatus status = WorkflowStatus::RUNNING;
    double started_at = 0.0;
    double deadline = 0.0; // planned completion time
    int last_step = 0;
    std::vector<PlannedStep> plan;
    std::set<std::string> locks;
    std::string failure;

    // Bound resources (scale-up workflows).
    std::string ran_id;
    std::string old_app_id, old_vm_id;
    std::string new_app_id, new_vm_id;
};

/// Simulated ME Orchestrator + VIM + ME Platform Manager: turns resolved
/// policy actions into timed multi-step workflows over the world.
class Orchestrator {
public:
    enum class ScaleUpMode { REPLACE_VM, AUGMENT_VM };

    Orchestrator(World& world, LatencyConfig latencies,
                 ScaleUpMode mode = ScaleUpMode::REPLACE_VM);

    /// Plans the workflow and locks its resources. The caller schedules
    /// execute_step at each planned time. Throws RuntimeFault when a target
    /// resource is locked by another running workflow.
    WorkflowState& enact(const ActionRequest& action, double now,
                         const std::string& policy_id = "");

    std::vector<StepEffect> execute_step(const std::string& workflow_id, int step_index,
                                         double now);

    const std::map<std::string, WorkflowState>& workflows() const { return workflows_; }
    WorkflowState& workflow(const std::string& id);
    std::set<std::string> locked_resources() const;
    const std::vector<WorkflowEvent>& events() const { return events_; }

    /// Resource tokens an action would need; used by resolve_actions.
    std::vector<std::string> touched_resources(const ActionRequest& action) const;

    LatencyConfig& latencies() { return latencies_; }

private:
    WorkflowState& make_workflow(const ActionRequest& action);
    void log(double time, const WorkflowState& wf, int step, const std::string& actor,
             const std::string& description);
    void finish(WorkflowState& wf, WorkflowStatus status);

    World& world_;
    LatencyConfig latencies_;
    ScaleUpMode mode_;
    std::map<std::string, WorkflowState> workflows_;
    std::vector<WorkflowEvent> events_;
    int wf_counter_ = 0;
};

} // namespace adsim

#endif
