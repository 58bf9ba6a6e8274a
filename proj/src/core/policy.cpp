#include "core/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace adsim {

const char* to_string(PolicyFamily f) {
    switch (f) {
        case PolicyFamily::VI: return "VI";
        case PolicyFamily::ADF: return "ADF";
        default: return "MEAPP";
    }
}

const char* to_string(ActionKind k) {
    switch (k) {
        case ActionKind::INCREASE_RAM: return "increase_ram";
        case ActionKind::UPDATE_MODEL: return "update_model";
        case ActionKind::DEPLOY_ME_APP: return "deploy_me_app";
        case ActionKind::DISMANTLE_VM: return "dismantle_vm";
        case ActionKind::RECONFIGURE_FC: return "reconfigure_fc";
        case ActionKind::SET_OFFSET: return "set_offset";
        default: return "deploy_dpi";
    }
}

const char* to_string(Comparator c) {
    switch (c) {
        case Comparator::GT: return ">";
        case Comparator::GE: return ">=";
        case Comparator::LT: return "<";
        case Comparator::LE: return "<=";
        case Comparator::EQ: return "==";
        default: return "in";
    }
}

const char* to_string(VmState s) {
    switch (s) {
        case VmState::REQUESTED: return "requested";
        case VmState::DEPLOYING: return "deploying";
        case VmState::RUNNING: return "running";
        case VmState::DISMANTLING: return "dismantling";
        default: return "gone";
    }
}

const char* to_string(AppKind k) {
    switch (k) {
        case AppKind::FLOW_COLLECTOR: return "flow_collector";
        case AppKind::ASD_CPU: return "asd_cpu";
        case AppKind::ASD_GPU: return "asd_gpu";
        case AppKind::NAD: return "nad";
        case AppKind::DPI: return "dpi";
        default: return "services";
    }
}

const char* to_string(AppState s) {
    switch (s) {
        case AppState::STARTING: return "starting";
        case AppState::OK: return "ok";
        default: return "stopped";
    }
}

// ---------------------------------------------------------------------------
// Metric registry

namespace {

enum class MetricType { NUMBER, STRING };

struct MetricInfo {
    const char* subject;
    const char* name;
    MetricType type;
};

const MetricInfo kMetricRegistry[] = {
    {"vm", "cpu_usage", MetricType::NUMBER},
    {"vm", "ram_usage", MetricType::NUMBER},
    {"vm", "ram_gb", MetricType::NUMBER},
    {"vm", "cpus", MetricType::NUMBER},
    {"vm", "gpu", MetricType::NUMBER},
    {"vm", "hosted_apps", MetricType::NUMBER},
    {"vm", "state", MetricType::STRING},
    {"app", "kind", MetricType::STRING},
    {"app", "state", MetricType::STRING},
    {"app", "is_asd", MetricType::NUMBER},
    {"app", "backend", MetricType::STRING},
    {"app", "offset", MetricType::NUMBER},
    {"app", "batch_size", MetricType::NUMBER},
    {"app", "measured_feature_rate", MetricType::NUMBER},
    {"app", "num_net_flows_per_s", MetricType::NUMBER},
    {"app", "forecast_net_flows_per_s", MetricType::NUMBER},
    {"app", "forecast_feature_rate", MetricType::NUMBER},
    {"app", "forecast_load_fraction", MetricType::NUMBER},
    {"app", "model_version", MetricType::NUMBER},
    {"app", "model_lag", MetricType::NUMBER},
    {"app", "threshold", MetricType::NUMBER},
    {"model", "available_version", MetricType::NUMBER},
    {"model", "is_improved", MetricType::NUMBER},
    {"nad_output", "anomaly_type", MetricType::STRING},
    {"nad_output", "ran", MetricType::STRING},
};

const MetricInfo* find_metric(const std::string& subject, const std::string& name) {
    for (const MetricInfo& m : kMetricRegistry)
        if (subject == m.subject && name == m.name) return &m;
    return nullptr;
}

} // namespace

std::set<std::string> MonitoringSnapshot::default_schema() {
    std::set<std::string> s;
    for (const MetricInfo& m : kMetricRegistry)
        s.insert(std::string(m.subject) + "." + m.name);
    return s;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::vector<std::string> tokenize(const std::string& line, int lineno) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        if (line[i] == '#') break;
        if (line[i] == '\'') {
            std::size_t end = line.find('\'', i + 1);
            if (end == std::string::npos) throw ParseError("unterminated string", lineno);
            tokens.push_back(line.substr(i, end - i + 1));
            i = end + 1;
        } else if (line[i] == '[') {
            std::size_t end = line.find(']', i + 1);
            if (end == std::string::npos) throw ParseError("unterminated range", lineno);
            tokens.push_back(line.substr(i, end - i + 1));
            i = end + 1;
        } else {
            std::size_t end = i;
            while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end])))
                ++end;
            tokens.push_back(line.substr(i, end - i));
            i = end;
        }
    }
    return tokens;
}

double parse_number(const std::string& tok, int lineno) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw ParseError("bad number '" + tok + "'", lineno);
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (...) {
        throw ParseError("bad number '" + tok + "'", lineno);
    }
}

PredicateValue parse_value(const std::string& tok, int lineno) {
    PredicateValue v;
    if (tok.empty()) throw ParseError("missing value", lineno);
    if (tok.front() == '\'') {
        v.type = PredicateValue::Type::STRING;
        v.text = tok.substr(1, tok.size() - 2);
    } else if (tok.front() == '$') {
        if (tok.size() < 2) throw ParseError("empty threshold name", lineno);
        v.type = PredicateValue::Type::NAMED;
        v.text = tok.substr(1);
    } else if (tok.front() == '[') {
        std::string body = tok.substr(1, tok.size() - 2);
        std::size_t comma = body.find(',');
        if (comma == std::string::npos)
            throw ParseError("range needs two comma-separated numbers", lineno);
        v.type = PredicateValue::Type::RANGE;
        v.lo = parse_number(body.substr(0, comma), lineno);
        v.hi = parse_number(body.substr(comma + 1), lineno);
        if (v.hi < v.lo) throw ParseError("range upper bound below lower bound", lineno);
    } else {
        v.type = PredicateValue::Type::NUMBER;
        v.number = parse_number(tok, lineno);
    }
    return v;
}

Comparator parse_comparator(const std::string& tok, int lineno) {
    if (tok == ">") return Comparator::GT;
    if (tok == ">=") return Comparator::GE;
    if (tok == "<") return Comparator::LT;
    if (tok == "<=") return Comparator::LE;
    if (tok == "==") return Comparator::EQ;
    if (tok == "in") return Comparator::IN_RANGE;
    throw ParseError("unknown comparator '" + tok + "'", lineno);
}

ActionKind parse_action_kind(const std::string& tok, int lineno) {
    if (tok == "increase_ram") return ActionKind::INCREASE_RAM;
    if (tok == "update_model") return ActionKind::UPDATE_MODEL;
    if (tok == "deploy_me_app") return ActionKind::DEPLOY_ME_APP;
    if (tok == "dismantle_vm") return ActionKind::DISMANTLE_VM;
    if (tok == "reconfigure_fc") return ActionKind::RECONFIGURE_FC;
    if (tok == "set_offset") return ActionKind::SET_OFFSET;
    if (tok == "deploy_dpi") return ActionKind::DEPLOY_DPI;
    throw ParseError("unknown action kind '" + tok + "'", lineno);
}

Predicate parse_predicate(const std::vector<std::string>& tokens, std::size_t pos,
                          int lineno) {
    const std::string& ref = tokens[pos];
    std::size_t dot = ref.find('.');
    if (dot == std::string::npos)
        throw ParseError("condition must be subject.metric, got '" + ref + "'", lineno);
    Predicate p;
    p.subject = ref.substr(0, dot);
    p.metric = ref.substr(dot + 1);
    const MetricInfo* info = find_metric(p.subject, p.metric);
    if (info == nullptr)
        throw ParseError("unknown metric '" + ref + "'", lineno);
    if (pos + 2 >= tokens.size()) throw ParseError("incomplete condition", lineno);
    p.cmp = parse_comparator(tokens[pos + 1], lineno);
    p.value = parse_value(tokens[pos + 2], lineno);
    if (p.cmp == Comparator::IN_RANGE && p.value.type != PredicateValue::Type::RANGE)
        throw ParseError("'in' needs a [lo, hi] range", lineno);
    if (p.cmp != Comparator::IN_RANGE && p.value.type == PredicateValue::Type::RANGE)
        throw ParseError("ranges only combine with 'in'", lineno);
    bool string_metric = info->type == MetricType::STRING;
    bool string_value = p.value.type == PredicateValue::Type::STRING;
    if (string_metric != string_value) {
        if (string_metric)
            throw ParseError("metric '" + ref + "' is a string; compare with 'value'", lineno);
        throw ParseError("metric '" + ref + "' is numeric", lineno);
    }
    if (string_metric && p.cmp != Comparator::EQ)
        throw ParseError("string metrics only support ==", lineno);
    return p;
}

/// Binding root: the entity kind the policy iterates over.
enum class Root { GLOBAL, VM, APP, NAD_OUTPUT };

Root derive_root(const Policy& p, int lineno) {
    bool has_vm = false, has_app = false, has_nad = false;
    for (const Predicate& c : p.conditions) {
        has_vm |= c.subject == "vm";
        has_app |= c.subject == "app";
        has_nad |= c.subject == "nad_output";
    }
    if (has_nad) {
        if (has_app || has_vm)
            throw ParseError("nad_output conditions cannot mix with vm/app conditions",
                             lineno);
        return Root::NAD_OUTPUT;
    }
    if (has_app) return Root::APP;
    if (has_vm) return Root::VM;
    return Root::GLOBAL;
}

void check_action_params(const ActionTemplate& a, Root root, int lineno) {
    auto need = [&](const char* key) {
        if (a.params.find(key) == a.params.end())
            throw ParseError(std::string(to_string(a.kind)) + " requires param '" + key + "'",
                             lineno);
    };
    auto need_ran = [&] {
        if (root == Root::GLOBAL)
            throw ParseError(std::string(to_string(a.kind)) +
                             " needs a vm/app/nad_output binding to locate a RAN", lineno);
    };
    switch (a.kind) {
        case ActionKind::INCREASE_RAM:
            need("ram_delta_gb");
            if (root != Root::VM && root != Root::APP)
                throw ParseError("increase_ram needs a vm or app binding", lineno);
            break;
        case ActionKind::UPDATE_MODEL:
            if (root != Root::APP)
                throw ParseError("update_model needs an app binding", lineno);
            break;
        case ActionKind::DEPLOY_ME_APP:
            need("app_kind");
            need("profile");
            need("batch_size");
            need_ran();
            break;
        case ActionKind::DISMANTLE_VM:
            if (root != Root::VM && root != Root::APP)
                throw ParseError("dismantle_vm needs a vm or app binding", lineno);
            break;
        case ActionKind::RECONFIGURE_FC:
            need_ran();
            break;
        case ActionKind::SET_OFFSET:
            if (a.params.count("new_offset") == a.params.count("factor"))
                throw ParseError("set_offset needs exactly one of new_offset / factor",
                                 lineno);
            need_ran();
            break;
        case ActionKind::DEPLOY_DPI:
            need("app_image");
            need_ran();
            break;
    }
}

struct BlockLine {
    int lineno;
    std::vector<std::string> tokens;
};

Policy parse_block(const std::vector<BlockLine>& lines, int header_line,
                   const std::string& id) {
    Policy p;
    p.id = id;
    p.cooldown = 0.0;
    bool family_seen = false;
    for (const BlockLine& bl : lines) {
        const auto& t = bl.tokens;
        const std::string& key = t[0];
        if (key == "family") {
            if (t.size() != 2) throw ParseError("family takes one value", bl.lineno);
            if (t[1] == "VI") p.family = PolicyFamily::VI;
            else if (t[1] == "ADF") p.family = PolicyFamily::ADF;
            else if (t[1] == "MEAPP") p.family = PolicyFamily::MEAPP;
            else throw ParseError("unknown family '" + t[1] + "'", bl.lineno);
            family_seen = true;
        } else if (key == "when") {
            std::size_t pos = 1;
            while (pos < t.size()) {
                p.conditions.push_back(parse_predicate(t, pos, bl.lineno));
                pos += 3;
                if (pos < t.size()) {
                    if (t[pos] != "&&")
                        throw ParseError("conditions join with '&&'", bl.lineno);
                    ++pos;
                }
            }
        } else if (key == "where") {
            if (t.size() != 2 || t[1].rfind("ran=", 0) != 0)
                throw ParseError("where expects ran=<id>", bl.lineno);
            p.location = t[1].substr(4);
        } else if (key == "within") {
            if (t.size() != 2) throw ParseError("within expects <start>..<end>", bl.lineno);
            std::size_t dots = t[1].find("..");
            if (dots == std::string::npos)
                throw ParseError("within expects <start>..<end>", bl.lineno);
            double a = parse_number(t[1].substr(0, dots), bl.lineno);
            double b = parse_number(t[1].substr(dots + 2), bl.lineno);
            if (b <= a) throw ParseError("within window is empty", bl.lineno);
            p.active_window = {a, b};
        } else if (key == "then") {
            if (t.size() < 2) throw ParseError("then needs an action kind", bl.lineno);
            ActionTemplate a;
            a.kind = parse_action_kind(t[1], bl.lineno);
            for (std::size_t i = 2; i < t.size(); ++i) {
                std::size_t eq = t[i].find('=');
                if (eq == std::string::npos)
                    throw ParseError("action params are key=value", bl.lineno);
                std::string val = t[i].substr(eq + 1);
                if (!val.empty() && val.front() == '\'') val = val.substr(1, val.size() - 2);
                a.params[t[i].substr(0, eq)] = val;
            }
            p.actions.push_back(std::move(a));
        } else if (key == "priority") {
            if (t.size() != 2) throw ParseError("priority takes one integer", bl.lineno);
            p.priority = static_cast<int>(parse_number(t[1], bl.lineno));
        } else if (key == "cooldown") {
            if (t.size() != 2) throw ParseError("cooldown takes seconds", bl.lineno);
            p.cooldown = parse_number(t[1], bl.lineno);
            if (p.cooldown < 0.0) throw ParseError("cooldown must be >= 0", bl.lineno);
        } else {
            throw ParseError("unknown policy field '" + key + "'", bl.lineno);
        }
    }
    if (!family_seen) throw ParseError("policy '" + id + "' missing family", header_line);
    if (p.conditions.empty())
        throw ParseError("policy '" + id + "' needs at least one condition", header_line);
    if (p.actions.empty())
        throw ParseError("policy '" + id + "' needs at least one action", header_line);
    Root root = derive_root(p, header_line);
    for (const ActionTemplate& a : p.actions) check_action_params(a, root, header_line);
    return p;
}

} // namespace

std::vector<Policy> parse_policies(const std::string& document) {
    std::vector<Policy> policies;
    std::istringstream in(document);
    std::string line;
    int lineno = 0;
    bool in_block = false;
    std::string block_id;
    int header_line = 0;
    std::vector<BlockLine> lines;

    while (std::getline(in, line)) {
        ++lineno;
        std::vector<std::string> tokens = tokenize(line, lineno);
        if (tokens.empty()) continue;
        if (!in_block) {
            if (tokens[0] != "policy" || tokens.size() != 3 || tokens[2] != "{")
                throw ParseError("expected 'policy <id> {'", lineno);
            in_block = true;
            block_id = tokens[1];
            header_line = lineno;
            lines.clear();
        } else if (tokens.size() == 1 && tokens[0] == "}") {
            policies.push_back(parse_block(lines, header_line, block_id));
            in_block = false;
        } else {
            lines.push_back({lineno, std::move(tokens)});
        }
    }
    if (in_block) throw ParseError("unterminated policy block '" + block_id + "'", header_line);

    std::set<std::string> ids;
    for (const Policy& p : policies)
        if (!ids.insert(p.id).second)
            throw ParseError("duplicate policy id '" + p.id + "'");
    return policies;
}

Policy parse_policy(const std::string& document) {
    std::vector<Policy> ps = parse_policies(document);
    if (ps.size() != 1)
        throw ParseError("expected exactly one policy block, found " +
                         std::to_string(ps.size()));
    return ps.front();
}

namespace {

std::string format_number(double v) {
    char buf[40];
    if (v == std::floor(v) && std::abs(v) < 1e15)
        std::snprintf(buf, sizeof(buf), "%.0f", v);
    else
        std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_value(const PredicateValue& v) {
    switch (v.type) {
        case PredicateValue::Type::NUMBER: return format_number(v.number);
        case PredicateValue::Type::STRING: return "'" + v.text + "'";
        case PredicateValue::Type::NAMED: return "$" + v.text;
        default: return "[" + format_number(v.lo) + ", " + format_number(v.hi) + "]";
    }
}

} // namespace

std::string serialize_policy(const Policy& p) {
    std::ostringstream out;
    out << "policy " << p.id << " {\n";
    out << "  family " << to_string(p.family) << "\n";
    out << "  when ";
    for (std::size_t i = 0; i < p.conditions.size(); ++i) {
        const Predicate& c = p.conditions[i];
        if (i > 0) out << " && ";
        out << c.subject << "." << c.metric << " " << to_string(c.cmp) << " "
            << format_value(c.value);
    }
    out << "\n";
    if (p.location) out << "  where ran=" << *p.location << "\n";
    if (p.active_window)
        out << "  within " << format_number(p.active_window->first) << ".."
            << format_number(p.active_window->second) << "\n";
    for (const ActionTemplate& a : p.actions) {
        out << "  then " << to_string(a.kind);
        for (const auto& [k, v] : a.params) out << " " << k << "=" << v;
        out << "\n";
    }
    out << "  priority " << p.priority << "\n";
    out << "  cooldown " << format_number(p.cooldown) << "\n";
    out << "}\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

using MetricValue = std::variant<double, std::string>;

struct Binding {
    const VmMetrics* vm = nullptr;
    const AppMetrics* app = nullptr;
    const NadOutputMetrics* nad = nullptr;
    std::string ran_id;
};

std::optional<MetricValue> lookup_metric(const MonitoringSnapshot& snap,
                                         const Binding& b, const Predicate& pred) {
    const std::string& m = pred.metric;
    if (pred.subject == "vm") {
        if (b.vm == nullptr) return std::nullopt;
        const VmMetrics& vm = *b.vm;
        if (m == "cpu_usage") return MetricValue{vm.cpu_usage};
        if (m == "ram_usage") return MetricValue{vm.ram_usage};
        if (m == "ram_gb") return MetricValue{vm.ram_gb};
        if (m == "cpus") return MetricValue{static_cast<double>(vm.cpus)};
        if (m == "gpu") return MetricValue{vm.gpu ? 1.0 : 0.0};
        if (m == "hosted_apps") return MetricValue{static_cast<double>(vm.hosted_apps)};
        if (m == "state") return MetricValue{std::string(to_string(vm.state))};
    } else if (pred.subject == "app") {
        if (b.app == nullptr) return std::nullopt;
        const AppMetrics& app = *b.app;
        if (m == "kind") return MetricValue{std::string(to_string(app.kind))};
        if (m == "state") return MetricValue{std::string(to_string(app.state))};
        if (m == "is_asd")
            return MetricValue{
                app.kind == AppKind::ASD_CPU || app.kind == AppKind::ASD_GPU ? 1.0 : 0.0};
        if (!app.asd) return std::nullopt; // ASD metrics on a non-ASD app
        const AsdMetrics& a = *app.asd;
        if (m == "backend") return MetricValue{a.backend};
        if (m == "offset") return MetricValue{static_cast<double>(a.offset)};
        if (m == "batch_size") return MetricValue{static_cast<double>(a.batch_size)};
        if (m == "measured_feature_rate") return MetricValue{a.measured_feature_rate};
        if (m == "num_net_flows_per_s") return MetricValue{a.num_net_flows_per_s};
        if (m == "forecast_net_flows_per_s") return MetricValue{a.forecast_net_flows_per_s};
        if (m == "forecast_feature_rate") return MetricValue{a.forecast_feature_rate};
        if (m == "forecast_load_fraction") return MetricValue{a.forecast_load_fraction};
        if (m == "model_version") return MetricValue{static_cast<double>(a.model_version)};
        if (m == "model_lag") return MetricValue{static_cast<double>(a.model_lag)};
        if (m == "threshold") return MetricValue{a.threshold};
    } else if (pred.subject == "model") {
        if (m == "available_version")
            return MetricValue{static_cast<double>(snap.model.available_version)};
        if (m == "is_improved") return MetricValue{snap.model.improved ? 1.0 : 0.0};
    } else if (pred.subject == "nad_output") {
        if (b.nad == nullptr) return std::nullopt;
        if (m == "anomaly_type") return MetricValue{b.nad->anomaly_type};
        if (m == "ran") return MetricValue{b.nad->ran_id};
    }
    return std::nullopt;
}

bool compare(const Predicate& pred, const MetricValue& value,
             const std::map<std::string, double>* thresholds) {
    if (std::holds_alternative<std::string>(value)) {
        // Parse guarantees string metrics only pair with EQ and a literal.
        return std::get<std::string>(value) == pred.value.text;
    }
    double v = std::get<double>(value);
    double target = 0.0;
    if (pred.cmp == Comparator::IN_RANGE)
        return v >= pred.value.lo && v <= pred.value.hi;
    if (pred.value.type == PredicateValue::Type::NAMED) {
        if (thresholds == nullptr)
            throw MetricError("no threshold table for $" + pred.value.text);
        auto it = thresholds->find(pred.value.text);
        if (it == thresholds->end())
            throw MetricError("unknown named threshold $" + pred.value.text);
        target = it->second;
    } else {
        target = pred.value.number;
    }
    switch (pred.cmp) {
        case Comparator::GT: return v > target;
        case Comparator::GE: return v >= target;
        case Comparator::LT: return v < target;
        case Comparator::LE: return v <= target;
        case Comparator::EQ: return v == target;
        default: return false;
    }
}

} // namespace

std::vector<ActionRequest> evaluate_policy(const Policy& policy,
                                           const MonitoringSnapshot& snapshot,
                                           const PolicyContext& ctx) {
    // Schema coverage first: referencing an unanswerable metric is an error,
    // not a false condition.
    for (const Predicate& c : policy.conditions) {
        std::string key = c.subject + "." + c.metric;
        if (snapshot.schema.find(key) == snapshot.schema.end())
            throw MetricError("metric '" + key + "' missing from snapshot schema");
    }

    if (policy.active_window &&
        (snapshot.time < policy.active_window->first ||
         snapshot.time >= policy.active_window->second))
        return {};
    if (ctx.last_fired && policy.cooldown > 0.0 &&
        snapshot.time - *ctx.last_fired < policy.cooldown)
        return {};

    bool uses_app = false, uses_vm = false, uses_nad = false;
    for (const Predicate& c : policy.conditions) {
        uses_app |= c.subject == "app";
        uses_vm |= c.subject == "vm";
        uses_nad |= c.subject == "nad_output";
    }

    std::vector<Binding> bindings;
    if (uses_nad) {
        for (const NadOutputMetrics& o : snapshot.nad_outputs)
            bindings.push_back({nullptr, nullptr, &o, o.ran_id});
    } else if (uses_app) {
        for (const AppMetrics& a : snapshot.apps) {
            const VmMetrics* vm = nullptr;
            for (const VmMetrics& v : snapshot.vms)
                if (v.id == a.vm_id) vm = &v;
            bindings.push_back({vm, &a, nullptr, a.ran_id});
        }
    } else if (uses_vm) {
        for (const VmMetrics& v : snapshot.vms)
            bindings.push_back({&v, nullptr, nullptr, v.ran_id});
    } else {
        bindings.push_back({nullptr, nullptr, nullptr, ""});
    }

    std::vector<ActionRequest> out;
    for (const Binding& b : bindings) {
        if (policy.location && b.ran_id != *policy.location) continue;
        bool all = true;
        for (const Predicate& c : policy.conditions) {
            std::optional<MetricValue> v = lookup_metric(snapshot, b, c);
            if (!v) { // metric not defined for this binding
                all = false;
                break;
            }
            if (!compare(c, *v, ctx.thresholds)) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        for (const ActionTemplate& t : policy.actions) {
            ActionRequest req;
            req.kind = t.kind;
            req.params = t.params;
            req.target_ran = b.ran_id;
            if (b.vm != nullptr) req.target_vm = b.vm->id;
            if (b.app != nullptr) {
                req.target_app = b.app->id;
                if (req.target_vm.empty()) req.target_vm = b.app->vm_id;
            }
            out.push_back(std::move(req));
        }
    }
    return out;
}

bool actions_conflict(ActionKind a, ActionKind b) {
    if (a == b) return true; // same kind, same resources, different params
    auto involves = [&](ActionKind k) { return a == k || b == k; };
    // Dismantling cannot overlap anything else on the same resources, and
    // collector-path reconfigurations are mutually exclusive.
    if (involves(ActionKind::DISMANTLE_VM)) return true;
    bool fc_path_a = a == ActionKind::DEPLOY_ME_APP || a == ActionKind::SET_OFFSET ||
                     a == ActionKind::RECONFIGURE_FC;
    bool fc_path_b = b == ActionKind::DEPLOY_ME_APP || b == ActionKind::SET_OFFSET ||
                     b == ActionKind::RECONFIGURE_FC;
    return fc_path_a && fc_path_b;
}

ResolveResult resolve_actions(
    const std::vector<PolicyFiring>& fired,
    const std::function<std::vector<std::string>(const ActionRequest&)>& touched,
    const std::set<std::string>& locked) {
    std::vector<PolicyFiring> ordered = fired;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const PolicyFiring& a, const PolicyFiring& b) {
                         if (a.priority != b.priority) return a.priority > b.priority;
                         return a.policy_id < b.policy_id;
                     });

    ResolveResult result;
    std::vector<std::vector<std::string>> kept_touched;
    for (const PolicyFiring& f : ordered) {
        bool duplicate = false;
        for (const PolicyFiring& kept : result.actions)
            if (kept.action == f.action) {
                duplicate = true;
                break;
            }
        if (duplicate) continue;

        std::vector<std::string> resources = touched ? touched(f.action)
                                                     : std::vector<std::string>{};
        bool drop = false;
        for (const std::string& r : resources) {
            if (locked.find(r) != locked.end()) {
                result.dropped.push_back("action " + std::string(to_string(f.action.kind)) +
                                         " from policy " + f.policy_id + ": resource '" + r +
                                         "' is mid-workflow");
                drop = true;
                break;
            }
        }
        if (!drop) {
            for (std::size_t k = 0; k < result.actions.size() && !drop; ++k) {
                if (!actions_conflict(result.actions[k].action.kind, f.action.kind)) continue;
                for (const std::string& r : resources) {
                    if (std::find(kept_touched[k].begin(), kept_touched[k].end(), r) !=
                        kept_touched[k].end()) {
                        result.dropped.push_back(
                            "action " + std::string(to_string(f.action.kind)) +
                            " from policy " + f.policy_id + ": conflicts with " +
                            std::string(to_string(result.actions[k].action.kind)) +
                            " from policy " + result.actions[k].policy_id + " on '" + r + "'");
                        drop = true;
                        break;
                    }
                }
            }
        }
        if (!drop) {
            result.actions.push_back(f);
            kept_touched.push_back(std::move(resources));
        }
    }
    return result;
}

} // namespace adsim
