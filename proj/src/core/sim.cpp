#include "core/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "core/errors.hpp"

namespace adsim {

// ---------------------------------------------------------------------------
// Event queue

void EventQueue::schedule(Event e) {
    if (e.time < clock_)
        throw RuntimeFault("cannot schedule event at " + std::to_string(e.time) +
                           " before clock " + std::to_string(clock_));
    e.seq = next_seq_++;
    heap_.push(std::move(e));
}

std::optional<Event> EventQueue::pop() {
    if (heap_.empty()) return std::nullopt;
    Event e = heap_.top();
    heap_.pop();
    clock_ = e.time;
    return e;
}

const Event* EventQueue::peek() const {
    return heap_.empty() ? nullptr : &heap_.top();
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* kCsvHeader =
    "time,model_flow_rate,measured_flow_rate,forecast_flow_rate,feature_rate_in,"
    "active_backend,offset,batch_size,t_fill,t_ev,mean_detection_time,"
    "capacity_feature_rate,queue_depth,symptoms_total,anomalies_total";

} // namespace

std::string metrics_csv(const MetricsLog& log) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    for (const TickRow& r : log.rows) {
        out << fmt_double(r.time) << ',' << fmt_double(r.model_flow_rate) << ','
            << fmt_double(r.measured_flow_rate) << ',' << fmt_double(r.forecast_flow_rate)
            << ',' << fmt_double(r.feature_rate_in) << ',' << r.active_backend << ','
            << r.offset << ',' << r.batch_size << ',' << fmt_double(r.t_fill) << ','
            << fmt_double(r.t_ev) << ',' << fmt_double(r.mean_detection_time) << ','
            << fmt_double(r.capacity_feature_rate) << ',' << r.queue_depth << ','
            << r.symptoms_total << ',' << r.anomalies_total << '\n';
    }
    return out.str();
}

std::vector<TickRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty metrics document");
    if (line != kCsvHeader) throw ParseError("unexpected metrics header");
    std::vector<TickRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 15) throw ParseError("bad metrics row", lineno);
        TickRow r;
        r.time = std::stod(f[0]);
        r.model_flow_rate = std::stod(f[1]);
        r.measured_flow_rate = std::stod(f[2]);
        r.forecast_flow_rate = std::stod(f[3]);
        r.feature_rate_in = std::stod(f[4]);
        r.active_backend = f[5];
        r.offset = std::stoll(f[6]);
        r.batch_size = std::stoll(f[7]);
        r.t_fill = std::stod(f[8]);
        r.t_ev = std::stod(f[9]);
        r.mean_detection_time = std::stod(f[10]);
        r.capacity_feature_rate = std::stod(f[11]);
        r.queue_depth = std::stoll(f[12]);
        r.symptoms_total = std::stoll(f[13]);
        r.anomalies_total = std::stoll(f[14]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string workflow_log_text(const MetricsLog& log) {
    std::ostringstream out;
    for (const WorkflowEvent& e : log.workflow_events)
        out << fmt_double(e.time) << '\t' << e.workflow_id << '\t' << e.step << '\t'
            << e.actor << '\t' << e.description << '\n';
    return out.str();
}

std::string summary_json(const MetricsLog& log) {
    nlohmann::json j;
    j["seed"] = log.seed;
    j["duration_s"] = log.duration_s;
    j["totals"] = {{"flows_injected", log.flows_injected},
                   {"flows_ingested", log.flows_ingested},
                   {"features_emitted", log.features_emitted},
                   {"batches_evaluated", log.batches_evaluated},
                   {"symptoms", log.symptoms_total},
                   {"anomalies", log.anomalies_total}};

    double max_mdt = 0.0;
    for (const TickRow& r : log.rows) max_mdt = std::max(max_mdt, r.mean_detection_time);
    j["max_mean_detection_time"] = max_mdt;

    nlohmann::json switches = nlohmann::json::array();
    nlohmann::json offsets = nlohmann::json::array();
    for (std::size_t i = 1; i < log.rows.size(); ++i) {
        if (log.rows[i].active_backend != log.rows[i - 1].active_backend)
            switches.push_back({{"time", log.rows[i].time},
                                {"from", log.rows[i - 1].active_backend},
                                {"to", log.rows[i].active_backend}});
        if (log.rows[i].offset != log.rows[i - 1].offset)
            offsets.push_back({{"time", log.rows[i].time},
                               {"from", log.rows[i - 1].offset},
                               {"to", log.rows[i].offset}});
    }
    j["backend_switches"] = switches;
    j["offset_changes"] = offsets;

    nlohmann::json firings = nlohmann::json::array();
    for (const PolicyFireRecord& f : log.policy_firings)
        firings.push_back({{"time", f.time},
                           {"policy", f.policy_id},
                           {"action", f.action},
                           {"target", f.target},
                           {"workflow", f.workflow_id}});
    j["policy_firings"] = firings;

    std::map<std::string, nlohmann::json> wfs;
    for (const WorkflowEvent& e : log.workflow_events) {
        auto& w = wfs[e.workflow_id];
        if (w.is_null()) w = {{"id", e.workflow_id}, {"started", e.time}, {"steps", 0}};
        w["finished"] = e.time;
        w["steps"] = w["steps"].get<int>() + 1;
    }
    nlohmann::json wf_list = nlohmann::json::array();
    for (auto& [id, w] : wfs) wf_list.push_back(w);
    j["workflows"] = wf_list;

    nlohmann::json anomalies = nlohmann::json::array();
    for (const NetworkAnomaly& a : log.anomalies)
        anomalies.push_back({{"type", a.anomaly_type},
                             {"rans", a.ran_ids},
                             {"window_start", a.window_start},
                             {"window_end", a.window_end}});
    j["network_anomalies"] = anomalies;
    j["continuity_violations"] = log.continuity_violations;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Counting collector

std::int64_t Simulation::CountingCollector::add(std::int64_t flows) {
    std::int64_t features = 0;
    if (!primed) {
        std::int64_t need = window_size - in_window;
        if (flows < need) {
            in_window += flows;
            return 0;
        }
        primed = true;
        in_window = window_size;
        flows -= need;
        features = 1;
        since = 0;
    }
    features += (since + flows) / offset;
    since = (since + flows) % offset;
    return features;
}

void Simulation::CountingCollector::set_offset(std::int64_t new_offset) {
    offset = new_offset;
    if (window_size < new_offset) window_size = new_offset;
    if (since >= offset) since = offset - 1;
}

// ---------------------------------------------------------------------------
// Simulation setup

Simulation::Pipeline::Pipeline(CollectorConfig cc, std::string ran)
    : ran_id(std::move(ran)),
      collector(cc, ran_id),
      batcher(cc.batch_size, cc.t_limit) {
    counting.offset = cc.offset;
    counting.window_size = cc.window_size;
}

Simulation::Simulation(SimConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      rng_(seed ^ 0xadb055ULL),
      nad_(config_.pipeline.nad.k, config_.pipeline.nad.horizon) {
    config_.validate();
    sample_period_s_ = config_.scenario.sample_period_seconds();
    duration_s_ = config_.scenario.duration_seconds();

    for (const Ran& r : config_.rans) world_.rans[r.id] = r;
    for (const InitialVm& v : config_.vms) {
        VmInstance vm;
        vm.id = v.id;
        vm.ran_id = v.ran;
        vm.cpus = v.cpus;
        vm.ram_gb = v.ram_gb;
        vm.gpu = v.gpu;
        vm.state = VmState::RUNNING;
        for (const InitialApp& a : v.apps) {
            AppInstance app;
            app.id = a.id;
            app.vm_id = v.id;
            app.ran_id = v.ran;
            app.kind = a.kind;
            app.state = AppState::OK;
            app.profile = a.profile;
            app.batch_size = a.batch_size;
            app.threshold = a.threshold;
            app.model_version = 1;
            world_.apps[app.id] = app;
            vm.app_ids.push_back(app.id);
        }
        world_.vms[vm.id] = vm;
    }
    world_.model_registry = {1, false};

    log_.seed = seed_;
    log_.duration_s = duration_s_;

    orchestrator_ = std::make_unique<Orchestrator>(
        world_, config_.latencies,
        config_.scale_up_mode == "augment_vm" ? Orchestrator::ScaleUpMode::AUGMENT_VM
                                              : Orchestrator::ScaleUpMode::REPLACE_VM);

    // One pipeline per RAN hosting a flow collector; the initial ASD on the
    // same RAN becomes the collector's target.
    for (const auto& [ran_id, ran] : world_.rans) {
        std::string collector_app, asd_app;
        for (const auto& [app_id, app] : world_.apps) {
            if (app.ran_id != ran_id) continue;
            if (app.kind == AppKind::FLOW_COLLECTOR) collector_app = app_id;
            if (asd_app.empty() &&
                (app.kind == AppKind::ASD_CPU || app.kind == AppKind::ASD_GPU))
                asd_app = app_id;
        }
        if (collector_app.empty()) continue;
        if (asd_app.empty())
            throw ParseError("ran '" + ran_id + "' has a collector but no ASD app");
        const AppInstance& asd = world_.apps[asd_app];

        CollectorConfig cc;
        cc.offset = config_.pipeline.offset;
        cc.window_size = config_.pipeline.window_size > 0 ? config_.pipeline.window_size
                                                          : config_.pipeline.offset;
        cc.batch_size = asd.batch_size;
        cc.t_limit = config_.pipeline.t_limit;
        cc.feature_dim = config_.pipeline.feature_dim;
        auto [it, inserted] = pipelines_.emplace(ran_id, Pipeline(cc, ran_id));
        Pipeline& pipe = it->second;
        pipe.target_app_id = asd_app;
        world_.fc_target[ran_id] = asd_app;
        pipe.threshold = config_.pipeline.classifier.threshold;

        const ClassifierConfig& cls = config_.pipeline.classifier;
        if (cls.type == "model") {
            pipe.net = load_model_file(cls.model_path);
            pipe.threshold = pipe.net->threshold();
        } else if (cls.type == "seeded") {
            pipe.net = NeuralNet(cls.layers, cls.seed);
            pipe.net->set_threshold(cls.threshold);
        }
        evals_[asd_app] = EvalState{};
    }

    for (const VmLoadSchedule& s : config_.vm_load)
        world_.vm_ram_used_gb[s.vm_id] = s.used_gb_at(0.0);

    // Default threshold for the scale-up policy: the sustainable rate of the
    // initial CPU configuration.
    const AppInstance* asd = world_.active_asd(config_.scenario.ran);
    if (asd != nullptr) {
        PipelineConfig pc{config_.profile(asd->profile), asd->batch_size,
                          config_.pipeline.offset, config_.pipeline.t_limit};
        netflows_max_default_ = max_sustainable_rate(pc);
    }

    seed_initial_events();
}

void Simulation::seed_initial_events() {
    Event snap;
    snap.time = 0.0;
    snap.kind = EventKind::SNAPSHOT_TICK;
    queue_.schedule(snap);
    Event pol;
    pol.time = 0.0;
    pol.kind = EventKind::POLICY_TICK;
    queue_.schedule(pol);
    for (const auto& [ran_id, pipe] : pipelines_) {
        if (ran_id != config_.scenario.ran) continue;
        Event block;
        block.time = 0.0;
        block.kind = EventKind::FLOW_ARRIVAL_BLOCK;
        block.ran = ran_id;
        queue_.schedule(block);
    }
}

std::map<std::string, double> Simulation::effective_thresholds() const {
    std::map<std::string, double> t = config_.thresholds;
    t.try_emplace("RamUsageMax", 0.85);
    t.try_emplace("ScaleHeadroom", 0.7);
    t.try_emplace("NetFlowsMaxForCpu", netflows_max_default_);
    return t;
}

double Simulation::injection_fraction(double t_units, std::string* kind) const {
    for (const InjectionWindow& w : config_.scenario.injections) {
        if (t_units >= w.start_units && t_units < w.end_units) {
            if (kind != nullptr) *kind = w.kind;
            return w.fraction;
        }
    }
    return 0.0;
}

const AppInstance* Simulation::pipeline_target(const Pipeline& pipe) const {
    auto it = world_.apps.find(pipe.target_app_id);
    return it == world_.apps.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Run loop

void Simulation::run() { run_until_seconds(duration_s_); }

void Simulation::run_until_units(double t_units) {
    run_until_seconds(t_units < 0.0 ? duration_s_
                                    : t_units * config_.scenario.model.time_unit);
}

void Simulation::run_until_seconds(double t_s) {
    while (const Event* next = queue_.peek()) {
        if (next->time > t_s) break;
        std::optional<Event> e = queue_.pop();
        handle(*e);
        while (workflow_events_seen_ < orchestrator_->events().size())
            log_.workflow_events.push_back(
                orchestrator_->events()[workflow_events_seen_++]);
    }
}

void Simulation::handle(const Event& e) {
    switch (e.kind) {
        case EventKind::FLOW_ARRIVAL_BLOCK: handle_flow_block(e); break;
        case EventKind::SNAPSHOT_TICK: handle_snapshot_tick(); break;
        case EventKind::POLICY_TICK: handle_policy_tick(); break;
        case EventKind::WORKFLOW_STEP: handle_workflow_step(e); break;
        case EventKind::FLUSH_TIMER: handle_flush_timer(e); break;
        case EventKind::BATCH_EVAL_DONE: handle_eval_done(e); break;
        case EventKind::FEATURE_EMIT: break; // features are emitted inline
    }
}

// ---------------------------------------------------------------------------
// Flow generation

void Simulation::handle_flow_block(const Event& e) {
    auto it = pipelines_.find(e.ran);
    if (it == pipelines_.end()) return;
    Pipeline& pipe = it->second;

    double t0 = e.time;
    double t1 = t0 + sample_period_s_;
    double unit = config_.scenario.model.time_unit;

    // Flow mass over the block (trapezoid over the scenario curve) with a
    // carry so long-run totals track the integral exactly.
    double r0 = config_.scenario.rate_at_seconds(t0);
    double r1 = config_.scenario.rate_at_seconds(t1);
    double mass = 0.5 * (r0 + r1) * (t1 - t0) + pipe.flow_carry;
    std::int64_t flows = static_cast<std::int64_t>(std::floor(mass));
    pipe.flow_carry = mass - static_cast<double>(flows);

    std::string kind = "binary";
    double fraction = injection_fraction(0.5 * (t0 + t1) / unit, &kind);
    double amass = fraction * static_cast<double>(flows) + pipe.anomaly_carry;
    std::int64_t anomalous = static_cast<std::int64_t>(std::floor(amass));
    pipe.anomaly_carry = amass - static_cast<double>(anomalous);
    if (anomalous > flows) anomalous = flows;
    pipe.active_injection_kind = kind;

    bool aggregate = flows > 0 &&
                     static_cast<double>(flows) / (t1 - t0) > config_.scenario.flow_gen_cutoff;
    if (aggregate != pipe.aggregate_mode) {
        if (aggregate) {
            // Hand the cadence state over to the counting mirror and flush
            // whatever the real batcher still holds.
            pipe.counting.offset = pipe.collector.config().offset;
            pipe.counting.window_size = pipe.collector.config().window_size;
            pipe.counting.primed = pipe.collector.window_filled();
            pipe.counting.in_window = pipe.collector.window_count();
            pipe.counting.since = pipe.collector.since_emission();
            std::optional<FeatureBatch> open = pipe.batcher.flush(t0);
            if (open) dispatch_batch(pipe, std::move(*open));
        } else {
            // Back to per-flow generation; the window must refill first and
            // the aggregate remainder is flushed out.
            if (pipe.agg_open > 0)
                emit_aggregate_batch(pipe, t0, pipe.agg_open, pipe.agg_open_tainted, true);
            CollectorConfig cc = pipe.collector.config();
            pipe.collector = FlowCollector(cc, pipe.ran_id);
        }
        pipe.aggregate_mode = aggregate;
    }

    if (flows > 0) {
        if (aggregate)
            generate_aggregate(pipe, t0, t1, flows, anomalous, kind);
        else
            generate_individual(pipe, t0, t1, flows, anomalous, kind);
    }

    // An idle or slow stream still flushes at the limit.
    if (pipe.aggregate_mode && pipe.agg_open > 0) {
        double deadline = pipe.agg_fill_start + pipe.batcher.t_limit();
        if (deadline <= t1)
            emit_aggregate_batch(pipe, deadline, pipe.agg_open, pipe.agg_open_tainted, true);
    }

    Event next;
    next.time = t1;
    next.kind = EventKind::FLOW_ARRIVAL_BLOCK;
    next.ran = e.ran;
    queue_.schedule(next);
}

void Simulation::generate_individual(Pipeline& pipe, double t0, double t1,
                                     std::int64_t flows, std::int64_t anomalous,
                                     const std::string& kind) {
    double dt = (t1 - t0) / static_cast<double>(flows);
    std::int64_t anomalous_left = anomalous;
    for (std::int64_t i = 0; i < flows; ++i) {
        double arrival = t0 + static_cast<double>(i + 1) * dt;
        std::int64_t remaining = flows - i;
        bool anomaly = anomalous_left > 0 &&
                       rng_.next_double() <
                           static_cast<double>(anomalous_left) / static_cast<double>(remaining);
        if (anomaly) --anomalous_left;

        FlowRecord f;
        f.timestamp = arrival;
        f.src_id = static_cast<std::uint32_t>(rng_.below(512));
        f.dst_id = static_cast<std::uint32_t>(rng_.below(64));
        f.src_port = static_cast<std::uint16_t>(1024 + rng_.below(60000));
        f.dst_port = anomaly ? static_cast<std::uint16_t>(6667)
                             : static_cast<std::uint16_t>(rng_.below(1024));
        f.protocol = rng_.next_double() < 0.7 ? Protocol::TCP
                     : rng_.next_double() < 0.6 ? Protocol::UDP
                                                : Protocol::ICMP;
        f.packets = 1 + rng_.below(60);
        double per_packet = anomaly ? 90.0 + 40.0 * rng_.next_double()
                                    : 200.0 + 1000.0 * rng_.next_double();
        f.bytes = f.packets + static_cast<std::uint64_t>(
                                  per_packet * static_cast<double>(f.packets));
        f.duration = 0.05 + 2.0 * rng_.next_double();
        f.label = anomaly ? TruthLabel::ANOMALOUS : TruthLabel::NORMAL;

        ++log_.flows_injected;
        ++log_.flows_ingested;
        ++pipe.flows_window;
        std::optional<FeatureVector> fv = pipe.collector.ingest(f);
        if (fv) {
            ++log_.features_emitted;
            ++pipe.features_window;
            std::optional<FeatureBatch> batch = pipe.batcher.push(std::move(*fv), arrival);
            if (batch) dispatch_batch(pipe, std::move(*batch));
            arm_flush_timer(pipe);
        }
    }
    (void)kind;
}

void Simulation::generate_aggregate(Pipeline& pipe, double t0, double t1,
                                    std::int64_t flows, std::int64_t anomalous,
                                    const std::string& kind) {
    log_.flows_injected += flows;
    log_.flows_ingested += flows;
    pipe.flows_window += flows;

    std::int64_t features = pipe.counting.add(flows);
    if (features <= 0) return;
    log_.features_emitted += features;
    pipe.features_window += features;

    // Aggregate approximation: one tainted feature per anomalous flow, capped
    // by the number of features (the per-flow path computes this exactly).
    std::int64_t tainted_total = std::min(features, anomalous);
    double per_feature = static_cast<double>(tainted_total) / static_cast<double>(features);

    double dt = (t1 - t0) / static_cast<double>(features);
    std::int64_t batch_size = pipe.batcher.batch_size();
    double t_limit = pipe.batcher.t_limit();
    std::int64_t consumed = 0;
    double taint_acc = 0.0;
    std::int64_t taint_assigned = 0;

    auto taint_share = [&](std::int64_t m) {
        taint_acc += per_feature * static_cast<double>(m);
        std::int64_t t = static_cast<std::int64_t>(std::floor(taint_acc + 1e-9));
        t = std::min(t, tainted_total - taint_assigned);
        taint_acc -= static_cast<double>(t);
        taint_assigned += t;
        return t;
    };
    (void)kind;

    while (consumed < features) {
        if (pipe.agg_open == 0) {
            pipe.agg_fill_start = t0 + static_cast<double>(consumed + 1) * dt;
            pipe.agg_open_tainted = 0;
        }
        double deadline = pipe.agg_fill_start + t_limit;
        std::int64_t need = batch_size - pipe.agg_open;
        std::int64_t remaining = features - consumed;
        // Highest 0-based feature index arriving by the deadline.
        std::int64_t max_i = static_cast<std::int64_t>(
            std::floor((deadline - t0) / dt - 1.0 + 1e-9));

        if (remaining >= need && consumed + need - 1 <= max_i) {
            double fill_end = t0 + static_cast<double>(consumed + need) * dt;
            std::int64_t tainted = pipe.agg_open_tainted + taint_share(need);
            consumed += need;
            std::int64_t count = batch_size;
            pipe.agg_open = 0;
            pipe.agg_open_tainted = 0;
            emit_aggregate_batch(pipe, fill_end, count, tainted, false);
        } else if (consumed + remaining - 1 <= max_i) {
            pipe.agg_open += remaining;
            pipe.agg_open_tainted += taint_share(remaining);
            consumed += remaining;
        } else {
            std::int64_t take = std::max<std::int64_t>(0, max_i - consumed + 1);
            take = std::min(take, remaining);
            pipe.agg_open += take;
            pipe.agg_open_tainted += taint_share(take);
            consumed += take;
            std::int64_t count = pipe.agg_open;
            std::int64_t tainted = pipe.agg_open_tainted;
            pipe.agg_open = 0;
            pipe.agg_open_tainted = 0;
            emit_aggregate_batch(pipe, deadline, count, tainted, true);
        }
    }
}

void Simulation::emit_aggregate_batch(Pipeline& pipe, double fill_end, std::int64_t count,
                                      std::int64_t tainted, bool forced) {
    if (count <= 0) return;
    pipe.agg_open = 0;
    pipe.agg_open_tainted = 0;
    BatchLogRecord rec;
    rec.id = ++batch_counter_;
    rec.ran = pipe.ran_id;
    rec.fill_start = pipe.agg_fill_start;
    rec.fill_end = fill_end;
    rec.count = count;
    rec.forced = forced;
    rec.tainted = tainted;
    rec.anomaly_kind = pipe.active_injection_kind;
    submit_batch(pipe, std::move(rec));
}

void Simulation::dispatch_batch(Pipeline& pipe, FeatureBatch batch) {
    BatchLogRecord rec;
    rec.id = ++batch_counter_;
    rec.ran = pipe.ran_id;
    rec.fill_start = batch.fill_start;
    rec.fill_end = batch.fill_end;
    rec.count = static_cast<std::int64_t>(batch.vectors.size());
    rec.forced = batch.forced_flush;
    rec.anomaly_kind = pipe.active_injection_kind;
    for (const FeatureVector& fv : batch.vectors)
        if (fv.truth_label == TruthLabel::ANOMALOUS) ++rec.tainted;
    if (pipe.net) pending_vectors_[rec.id] = std::move(batch.vectors);
    pipe.flush_epoch++;
    pipe.timer_armed = false;
    submit_batch(pipe, std::move(rec));
}

void Simulation::submit_batch(Pipeline& pipe, BatchLogRecord rec) {
    const AppInstance* target = pipeline_target(pipe);
    if (target == nullptr) return;
    rec.app_id = target->id;

    EvalState& eval = evals_[target->id];
    const BackendProfile& profile = config_.profile(target->profile);
    double t_ev = t_ev_lookup(profile, std::min(rec.count, profile.max_batch));
    rec.eval_start = std::max(rec.fill_end, eval.busy_until);
    rec.eval_done = rec.eval_start + t_ev;
    eval.busy_until = rec.eval_done;
    eval.busy_accum += t_ev;
    ++eval.queued;
    ++eval.submitted;

    Event e;
    e.time = std::max(rec.eval_done, queue_.clock());
    e.kind = EventKind::BATCH_EVAL_DONE;
    e.ran = pipe.ran_id;
    e.batch_id = rec.id;
    pending_batches_[rec.id] = std::move(rec);
    queue_.schedule(e);
}

void Simulation::arm_flush_timer(Pipeline& pipe) {
    if (pipe.timer_armed || pipe.batcher.pending() == 0) return;
    std::optional<double> deadline = pipe.batcher.flush_deadline();
    if (!deadline) return;
    Event e;
    e.time = std::max(*deadline, queue_.clock());
    e.kind = EventKind::FLUSH_TIMER;
    e.ran = pipe.ran_id;
    e.flush_epoch = pipe.flush_epoch;
    queue_.schedule(e);
    pipe.timer_armed = true;
}

void Simulation::handle_flush_timer(const Event& e) {
    auto it = pipelines_.find(e.ran);
    if (it == pipelines_.end()) return;
    Pipeline& pipe = it->second;
    if (e.flush_epoch != pipe.flush_epoch) return; // batch already emitted
    pipe.timer_armed = false;
    std::optional<FeatureBatch> batch = pipe.batcher.poll_flush(e.time);
    if (batch) dispatch_batch(pipe, std::move(*batch));
    arm_flush_timer(pipe);
}

void Simulation::handle_eval_done(const Event& e) {
    auto it = pending_batches_.find(e.batch_id);
    if (it == pending_batches_.end()) return;
    BatchLogRecord rec = std::move(it->second);
    pending_batches_.erase(it);

    auto eval_it = evals_.find(rec.app_id);
    if (eval_it != evals_.end()) {
        --eval_it->second.queued;
        ++eval_it->second.evaluated;
    }
    ++log_.batches_evaluated;

    auto app_it = world_.apps.find(rec.app_id);
    bool alive = app_it != world_.apps.end() && app_it->second.state != AppState::STOPPED;
    rec.delivered = alive;

    if (alive) {
        std::int64_t symptoms = 0;
        auto vec_it = pending_vectors_.find(rec.id);
        if (vec_it != pending_vectors_.end()) {
            auto pipe_it = pipelines_.find(rec.ran);
            if (pipe_it != pipelines_.end() && pipe_it->second.net) {
                for (const FeatureVector& fv : vec_it->second) {
                    double score = pipe_it->second.net->forward_one(fv.values);
                    if (score >= pipe_it->second.threshold) ++symptoms;
                }
            }
        } else {
            // Oracle / aggregate path: ground-truth pass-through.
            symptoms = rec.tainted;
        }
        rec.symptoms = symptoms;
        log_.symptoms_total += symptoms;

        std::optional<NetworkAnomaly> anomaly =
            nad_.add(rec.ran, rec.eval_done, symptoms, rec.anomaly_kind);
        if (anomaly) {
            world_.recent_anomalies.push_back(
                {anomaly->anomaly_type, rec.ran, rec.eval_done});
            log_.anomalies.push_back(*anomaly);
            ++log_.anomalies_total;
        }
    }
    pending_vectors_.erase(rec.id);
    log_.batches.push_back(std::move(rec));
}

// ---------------------------------------------------------------------------
// Monitoring and policy ticks

void Simulation::handle_snapshot_tick() {
    double now = queue_.clock();
    double unit = config_.scenario.model.time_unit;
    double t_units = now / unit;

    for (const ModelRelease& r : config_.model_releases) {
        if (r.t_units <= t_units && r.version > world_.model_registry.available_version)
            world_.model_registry = {r.version, r.improved};
    }
    for (const VmLoadSchedule& s : config_.vm_load)
        if (world_.vms.count(s.vm_id) != 0)
            world_.vm_ram_used_gb[s.vm_id] = s.used_gb_at(t_units);

    double horizon = config_.pipeline.nad.horizon;
    auto& recent = world_.recent_anomalies;
    recent.erase(std::remove_if(recent.begin(), recent.end(),
                                [&](const NadOutputMetrics& a) {
                                    return a.time < now - horizon;
                                }),
                 recent.end());

    for (auto& [app_id, eval] : evals_) {
        auto app_it = world_.apps.find(app_id);
        if (app_it == world_.apps.end()) continue;
        double usage = std::min(1.0, eval.busy_accum / sample_period_s_);
        eval.busy_accum = 0.0;
        world_.vm_cpu_usage[app_it->second.vm_id] = usage;
    }

    // Rates describe the stream a target currently receives; anything that
    // stopped being a target reads as idle rather than as stale history.
    world_.asd_telemetry.clear();
    for (auto& [ran_id, pipe] : pipelines_) {
        double measured_flow = static_cast<double>(pipe.flows_window) / sample_period_s_;
        double measured_feat = static_cast<double>(pipe.features_window) / sample_period_s_;
        pipe.flows_window = 0;
        pipe.features_window = 0;

        pipe.rate_samples.push_back({now, measured_flow});
        if (pipe.rate_samples.size() > 16)
            pipe.rate_samples.erase(pipe.rate_samples.begin());
        double deriv = 0.0;
        if (pipe.rate_samples.size() >= 2) {
            try {
                deriv = estimate_derivative(pipe.rate_samples, 5);
            } catch (const std::invalid_argument&) {
                deriv = 0.0;
            }
        }
        double fc = forecast(measured_flow, deriv, config_.latencies.t_d);
        world_.ran_telemetry[ran_id] = {measured_flow, fc};

        const AppInstance* target = pipeline_target(pipe);
        if (target != nullptr) {
            AsdTelemetry t;
            std::int64_t offset = pipe.collector.config().offset;
            t.offset = offset;
            t.measured_feature_rate = measured_feat;
            t.num_net_flows_per_s = measured_flow;
            t.forecast_net_flows_per_s = fc;
            t.forecast_feature_rate = fc / static_cast<double>(offset);
            const BackendProfile& profile = config_.profile(target->profile);
            double capacity = static_cast<double>(target->batch_size) /
                              t_ev_lookup(profile, target->batch_size);
            t.forecast_load_fraction = capacity > 0.0 ? t.forecast_feature_rate / capacity
                                                      : 0.0;
            world_.asd_telemetry[target->id] = t;
        }

        if (ran_id == config_.scenario.ran) {
            TickRow row;
            row.time = now;
            row.model_flow_rate = config_.scenario.rate_at_seconds(now);
            row.measured_flow_rate = measured_flow;
            row.forecast_flow_rate = fc;
            row.feature_rate_in = measured_feat;
            if (target != nullptr) {
                const BackendProfile& profile = config_.profile(target->profile);
                row.active_backend = target->profile;
                row.offset = pipe.collector.config().offset;
                row.batch_size = target->batch_size;
                row.t_ev = t_ev_lookup(profile, target->batch_size);
                PipelineConfig pc{profile, target->batch_size, row.offset,
                                  config_.pipeline.t_limit};
                double rate = std::max(row.model_flow_rate, 1e-9);
                row.t_fill = t_fill(pc, rate);
                row.mean_detection_time = mean_detection_time(pc, rate);
                row.capacity_feature_rate =
                    static_cast<double>(target->batch_size) / row.t_ev;
                auto ev = evals_.find(target->id);
                row.queue_depth = ev == evals_.end() ? 0 : ev->second.queued;
            }
            row.symptoms_total = log_.symptoms_total;
            row.anomalies_total = log_.anomalies_total;
            log_.rows.push_back(std::move(row));
        }
    }

    Event next;
    next.time = now + sample_period_s_;
    next.kind = EventKind::SNAPSHOT_TICK;
    queue_.schedule(next);
}

void Simulation::handle_policy_tick() {
    double now = queue_.clock();
    MonitoringSnapshot snap = snapshot(world_, now);
    std::map<std::string, double> thresholds = effective_thresholds();

    std::vector<PolicyFiring> fired;
    for (const Policy& p : config_.policies) {
        PolicyContext ctx;
        ctx.thresholds = &thresholds;
        auto lf = policy_last_fired_.find(p.id);
        if (lf != policy_last_fired_.end()) ctx.last_fired = lf->second;
        for (ActionRequest& a : evaluate_policy(p, snap, ctx))
            fired.push_back({p.id, p.priority, std::move(a)});
    }
    if (fired.empty()) {
        Event next;
        next.time = now + sample_period_s_;
        next.kind = EventKind::POLICY_TICK;
        queue_.schedule(next);
        return;
    }

    auto touched = [this](const ActionRequest& a) {
        return orchestrator_->touched_resources(a);
    };
    ResolveResult resolved = resolve_actions(fired, touched,
                                             orchestrator_->locked_resources());
    for (const std::string& d : resolved.dropped) log_.resolver_drops.push_back(d);

    for (const PolicyFiring& f : resolved.actions) {
        WorkflowState* wf = nullptr;
        try {
            wf = &orchestrator_->enact(f.action, now, f.policy_id);
        } catch (const RuntimeFault& ex) {
            log_.resolver_drops.push_back("enact failed for policy " + f.policy_id + ": " +
                                          ex.what());
            continue;
        }
        policy_last_fired_[f.policy_id] = now;
        std::string target = !f.action.target_app.empty() ? f.action.target_app
                             : !f.action.target_vm.empty() ? f.action.target_vm
                                                           : f.action.target_ran;
        log_.policy_firings.push_back(
            {now, f.policy_id, to_string(f.action.kind), target, wf->id});
        for (std::size_t i = 0; i < wf->plan.size(); ++i) {
            Event e;
            e.time = wf->plan[i].time;
            e.kind = EventKind::WORKFLOW_STEP;
            e.workflow_id = wf->id;
            e.step_index = static_cast<int>(i);
            queue_.schedule(e);
        }
    }

    Event next;
    next.time = now + sample_period_s_;
    next.kind = EventKind::POLICY_TICK;
    queue_.schedule(next);
}

void Simulation::handle_workflow_step(const Event& e) {
    std::vector<StepEffect> effects =
        orchestrator_->execute_step(e.workflow_id, e.step_index, e.time);
    apply_effects(effects, e.time);
    audit_continuity(e.time);
}

void Simulation::switch_pipeline_target(Pipeline& pipe, const std::string& app_id,
                                        double now) {
    // Hand off: whatever is pending was produced before the redirect took
    // effect, so it still belongs to the previous ASD.
    if (pipe.aggregate_mode) {
        if (pipe.agg_open > 0)
            emit_aggregate_batch(pipe, now, pipe.agg_open, pipe.agg_open_tainted, true);
    } else {
        std::optional<FeatureBatch> batch = pipe.batcher.flush(now);
        if (batch) dispatch_batch(pipe, std::move(*batch));
    }
    pipe.target_app_id = app_id;
    auto app_it = world_.apps.find(app_id);
    if (app_it != world_.apps.end()) {
        pipe.batcher.set_batch_size(app_it->second.batch_size);
        pipe.counting.set_offset(pipe.counting.offset); // keep invariants
    }
    pipe.flush_epoch++;
    pipe.timer_armed = false;
}

void Simulation::apply_effects(const std::vector<StepEffect>& effects, double now) {
    for (const StepEffect& eff : effects) {
        auto pipe_it = pipelines_.find(eff.ran_id);
        switch (eff.kind) {
            case StepEffect::Kind::ASD_AVAILABLE:
                evals_.try_emplace(eff.app_id, EvalState{});
                break;
            case StepEffect::Kind::FC_REDIRECTED:
                if (pipe_it != pipelines_.end())
                    switch_pipeline_target(pipe_it->second, eff.app_id, now);
                break;
            case StepEffect::Kind::OFFSET_APPLIED: {
                if (pipe_it == pipelines_.end()) break;
                Pipeline& pipe = pipe_it->second;
                std::int64_t current = pipe.collector.config().offset;
                std::int64_t next = eff.new_offset > 0
                                        ? eff.new_offset
                                        : current * std::max<std::int64_t>(1,
                                                                           eff.offset_factor);
                if (next < 1) next = 1;
                pipe.collector.set_offset(next);
                pipe.counting.set_offset(next);
                break;
            }
            case StepEffect::Kind::THRESHOLD_APPLIED:
                if (pipe_it != pipelines_.end() &&
                    pipe_it->second.target_app_id == eff.app_id)
                    pipe_it->second.threshold = eff.new_threshold;
                break;
            case StepEffect::Kind::ASD_STOPPED:
            case StepEffect::Kind::RAM_INCREASED:
            case StepEffect::Kind::MODEL_APPLIED:
            case StepEffect::Kind::DPI_STARTED:
            case StepEffect::Kind::WORKFLOW_FAILED:
            case StepEffect::Kind::WORKFLOW_DONE:
            case StepEffect::Kind::NONE:
                break;
        }
    }
}

void Simulation::audit_continuity(double now) {
    // Detection must be uninterrupted: the collector's target exists and is
    // OK at every instant.
    for (const auto& [ran_id, pipe] : pipelines_) {
        auto app_it = world_.apps.find(pipe.target_app_id);
        if (app_it == world_.apps.end() || app_it->second.state != AppState::OK) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "t=%.6f ran=%s: FC target '%s' is not an OK ASD", now,
                          ran_id.c_str(), pipe.target_app_id.c_str());
            log_.continuity_violations.push_back(buf);
        }
    }
}

std::string report(const MetricsLog& log, const std::string& format) {
    if (format == "csv") return metrics_csv(log);
    if (format == "summary" || format == "json") return summary_json(log);
    if (format == "workflow") return workflow_log_text(log);
    throw std::invalid_argument("unknown report format '" + format + "'");
}

std::string Simulation::summary() const { return summary_json(log_); }

void Simulation::write_outputs(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        if (!out) throw RuntimeFault("cannot write '" + dir + "/" + name + "'");
        out << text;
    };
    write("metrics.csv", csv());
    write("workflow.log", workflow_text());
    write("summary.json", summary());
}

} // namespace adsim
