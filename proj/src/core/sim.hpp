#ifndef ADSIM_CORE_SIM_HPP
#define ADSIM_CORE_SIM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "core/batch.hpp"
#include "core/config.hpp"
#include "core/flow.hpp"
#include "core/nad.hpp"
#include "core/neural.hpp"
#include "core/orchestration.hpp"
#include "core/perf.hpp"
#include "core/rng.hpp"
#include "core/scenario.hpp"

namespace adsim {

enum class EventKind {
    FLOW_ARRIVAL_BLOCK,
    FEATURE_EMIT,
    BATCH_EVAL_DONE,
    SNAPSHOT_TICK,
    POLICY_TICK,
    WORKFLOW_STEP,
    FLUSH_TIMER,
};

struct Event {
    double time = 0.0;
    std::uint64_t seq = 0; // tie-break, assigned by the queue
    EventKind kind = EventKind::SNAPSHOT_TICK;
    std::string ran;         // pipeline events
    std::string workflow_id; // WORKFLOW_STEP
    int step_index = 0;      // WORKFLOW_STEP
    std::int64_t batch_id = 0;   // BATCH_EVAL_DONE
    std::uint64_t flush_epoch = 0; // FLUSH_TIMER staleness guard
};

/// Deterministic min-queue ordered by (time, seq); equal-time events pop in
/// scheduling order. Scheduling into the past is an error.
class EventQueue {
public:
    void schedule(Event e);
    std::optional<Event> pop();
    double clock() const { return clock_; }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    const Event* peek() const;

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    double clock_ = 0.0;
    std::uint64_t next_seq_ = 0;
};

/// One evaluated (or pending) classifier batch.
struct BatchLogRecord {
    std::int64_t id = 0;
    std::string ran;
    std::string app_id;
    double fill_start = 0.0;
    double fill_end = 0.0;
    std::int64_t count = 0;
    bool forced = false;
    std::int64_t tainted = 0; // ground-truth anomalous vectors
    double eval_start = 0.0;
    double eval_done = 0.0;
    std::int64_t symptoms = 0;
    bool delivered = false; // false once the owning ASD stopped first
    std::string anomaly_kind = "binary";
};

struct TickRow {
    double time = 0.0; // seconds
    double model_flow_rate = 0.0;
    double measured_flow_rate = 0.0;
    double forecast_flow_rate = 0.0;
    double feature_rate_in = 0.0;
    std::string active_backend;
    std::int64_t offset = 1;
    std::int64_t batch_size = 1;
    double t_fill = 0.0;
    double t_ev = 0.0;
    double mean_detection_time = 0.0;
    double capacity_feature_rate = 0.0;
    std::int64_t queue_depth = 0;
    std::int64_t symptoms_total = 0;
    std::int64_t anomalies_total = 0;
};

struct PolicyFireRecord {
    double time = 0.0;
    std::string policy_id;
    std::string action;
    std::string target;
    std::string workflow_id;
};

struct MetricsLog {
    std::uint64_t seed = 0;
    double duration_s = 0.0;
    std::vector<TickRow> rows;
    std::vector<BatchLogRecord> batches;
    std::vector<WorkflowEvent> workflow_events;
    std::vector<PolicyFireRecord> policy_firings;
    std::vector<NetworkAnomaly> anomalies;
    std::vector<std::string> resolver_drops;
    std::vector<std::string> continuity_violations;

    std::int64_t flows_injected = 0;
    std::int64_t flows_ingested = 0;
    std::int64_t features_emitted = 0;
    std::int64_t batches_evaluated = 0;
    std::int64_t symptoms_total = 0;
    std::int64_t anomalies_total = 0;
};

std::string metrics_csv(const MetricsLog& log);
std::vector<TickRow> parse_metrics_csv(const std::string& text);
std::string workflow_log_text(const MetricsLog& log);
std::string summary_json(const MetricsLog& log);
/// format: "csv" | "summary" | "workflow"; anything else is an error.
std::string report(const MetricsLog& log, const std::string& format);

/// Closed-loop discrete-event simulation of the managed detection pipeline.
class Simulation {
public:
    Simulation(SimConfig config, std::uint64_t seed);
    // The orchestrator keeps a reference into world_; pinning the object is
    // simpler than rewiring it.
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Runs to the configured scenario duration.
    void run();
    /// Runs until t_units (model time units); callable repeatedly.
    void run_until_units(double t_units);
    void run_until_seconds(double t_s);

    const MetricsLog& log() const { return log_; }
    const SimConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }
    double now() const { return queue_.clock(); }

    std::string csv() const { return metrics_csv(log_); }
    std::string workflow_text() const { return workflow_log_text(log_); }
    std::string summary() const;
    /// Writes metrics.csv, workflow.log and summary.json under dir.
    void write_outputs(const std::string& dir) const;

    World& world() { return world_; }
    Orchestrator& orchestrator() { return *orchestrator_; }

private:
    struct EvalState {
        double busy_until = 0.0;
        std::int64_t queued = 0;
        std::int64_t submitted = 0;
        std::int64_t evaluated = 0;
        double busy_accum = 0.0; // busy seconds, for cpu usage
    };

    /// Count-only mirror of the collector cadence for aggregate-mode blocks.
    struct CountingCollector {
        std::int64_t offset = 1;
        std::int64_t window_size = 1;
        std::int64_t in_window = 0;
        bool primed = false;
        std::int64_t since = 0;

        std::int64_t add(std::int64_t flows);
        void set_offset(std::int64_t new_offset);
    };

    struct Pipeline {
        std::string ran_id;
        std::string target_app_id; // ASD currently receiving this FC's output
        FlowCollector collector;
        FeatureBatcher batcher;
        CountingCollector counting;
        bool aggregate_mode = false;
        std::uint64_t flush_epoch = 0;
        bool timer_armed = false;
        // Aggregate batch state.
        std::int64_t agg_open = 0;
        std::int64_t agg_open_tainted = 0;
        double agg_fill_start = 0.0;
        // Carries for deterministic block generation.
        double flow_carry = 0.0;
        double anomaly_carry = 0.0;
        // Per-sample-period counters.
        std::int64_t flows_window = 0;
        std::int64_t features_window = 0;
        std::vector<RateSample> rate_samples;
        // Classifier.
        std::optional<NeuralNet> net;
        double threshold = 0.5;
        std::string active_injection_kind = "binary";

        Pipeline(CollectorConfig cc, std::string ran);
    };

    void seed_initial_events();
    void handle(const Event& e);
    void handle_flow_block(const Event& e);
    void handle_snapshot_tick();
    void handle_policy_tick();
    void handle_workflow_step(const Event& e);
    void handle_flush_timer(const Event& e);
    void handle_eval_done(const Event& e);

    void generate_individual(Pipeline& pipe, double t0, double t1, std::int64_t flows,
                             std::int64_t anomalous, const std::string& kind);
    void generate_aggregate(Pipeline& pipe, double t0, double t1, std::int64_t flows,
                            std::int64_t anomalous, const std::string& kind);
    void emit_aggregate_batch(Pipeline& pipe, double fill_end, std::int64_t count,
                              std::int64_t tainted, bool forced);
    void dispatch_batch(Pipeline& pipe, FeatureBatch batch);
    void submit_batch(Pipeline& pipe, BatchLogRecord record);
    void arm_flush_timer(Pipeline& pipe);
    void switch_pipeline_target(Pipeline& pipe, const std::string& app_id, double now);
    void apply_effects(const std::vector<StepEffect>& effects, double now);
    void audit_continuity(double now);
    const AppInstance* pipeline_target(const Pipeline& pipe) const;
    double injection_fraction(double t_units, std::string* kind) const;
    std::map<std::string, double> effective_thresholds() const;

    SimConfig config_;
    std::uint64_t seed_;
    Rng rng_;
    EventQueue queue_;
    World world_;
    std::unique_ptr<Orchestrator> orchestrator_;
    std::map<std::string, Pipeline> pipelines_;
    std::map<std::string, EvalState> evals_;
    std::map<std::string, double> policy_last_fired_;
    SymptomAggregator nad_;
    MetricsLog log_;
    std::map<std::int64_t, BatchLogRecord> pending_batches_;
    std::map<std::int64_t, std::vector<FeatureVector>> pending_vectors_;
    std::int64_t batch_counter_ = 0;
    double netflows_max_default_ = 0.0;
    double sample_period_s_;
    double duration_s_;
    double block_horizon_ = 0.0; // next block not yet scheduled beyond this
    std::size_t workflow_events_seen_ = 0;
};

} // namespace adsim

#endif
