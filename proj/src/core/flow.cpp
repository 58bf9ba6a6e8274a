#include "core/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "core/errors.hpp"

namespace adsim {

const char* to_string(Protocol p) {
    switch (p) {
        case Protocol::TCP: return "TCP";
        case Protocol::UDP: return "UDP";
        case Protocol::ICMP: return "ICMP";
        default: return "OTHER";
    }
}

const char* to_string(TruthLabel l) {
    return l == TruthLabel::ANOMALOUS ? "ANOMALOUS" : "NORMAL";
}

void FlowRecord::validate() const {
    if (packets < 1) throw std::invalid_argument("flow needs at least one packet");
    if (bytes < packets) throw std::invalid_argument("flow bytes below packet count");
    if (duration < 0.0 || !std::isfinite(duration))
        throw std::invalid_argument("flow duration must be >= 0");
    if (!std::isfinite(timestamp)) throw std::invalid_argument("flow timestamp not finite");
}

void CollectorConfig::validate() const {
    if (offset < 1) throw std::invalid_argument("offset must be >= 1");
    if (window_size < offset) throw std::invalid_argument("window_size must be >= offset");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(t_limit > 0.0)) throw std::invalid_argument("t_limit must be > 0");
    if (feature_dim < kFeatureSchemaSlots)
        throw std::invalid_argument("feature_dim must be >= " +
                                    std::to_string(kFeatureSchemaSlots));
}

namespace {

struct Stats {
    double mean, stddev, min, max, median;
};

Stats summarize(std::vector<double>& values) {
    double sum = 0.0, mn = values.front(), mx = values.front();
    for (double v : values) {
        sum += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    double mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size()); // population variance
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    double median = (n % 2 == 1) ? values[n / 2]
                                 : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return {mean, std::sqrt(var), mn, mx, median};
}

template <typename Key>
double entropy_bits(const std::map<Key, std::int64_t>& counts, std::int64_t total) {
    double h = 0.0;
    for (const auto& [key, count] : counts) {
        double p = static_cast<double>(count) / static_cast<double>(total);
        if (p > 0.0) h -= p * std::log2(p);
    }
    // A single-outcome distribution must come out exactly 0.
    return counts.size() <= 1 ? 0.0 : h;
}

} // namespace

FeatureVector compute_features(const std::vector<FlowRecord>& window,
                               const CollectorConfig& config) {
    config.validate();
    if (window.empty()) throw std::invalid_argument("feature window is empty");

    std::size_t n = window.size();
    std::vector<double> bytes(n), packets(n), durations(n);
    std::map<std::uint16_t, std::int64_t> src_ports, dst_ports;
    std::map<std::uint32_t, std::int64_t> src_ids, dst_ids;
    std::int64_t proto_counts[4] = {0, 0, 0, 0};
    bool anomalous = false;

    for (std::size_t i = 0; i < n; ++i) {
        const FlowRecord& f = window[i];
        bytes[i] = static_cast<double>(f.bytes);
        packets[i] = static_cast<double>(f.packets);
        durations[i] = f.duration;
        ++src_ports[f.src_port];
        ++dst_ports[f.dst_port];
        ++src_ids[f.src_id];
        ++dst_ids[f.dst_id];
        ++proto_counts[static_cast<int>(f.protocol)];
        anomalous = anomalous || f.label == TruthLabel::ANOMALOUS;
    }

    FeatureVector fv;
    fv.values.assign(static_cast<std::size_t>(config.feature_dim), 0.0);
    std::size_t slot = 0;
    auto put_stats = [&](std::vector<double>& vals) {
        Stats s = summarize(vals);
        fv.values[slot++] = s.mean;
        fv.values[slot++] = s.stddev;
        fv.values[slot++] = s.min;
        fv.values[slot++] = s.max;
        fv.values[slot++] = s.median;
    };
    put_stats(bytes);
    put_stats(packets);
    put_stats(durations);

    std::int64_t total = static_cast<std::int64_t>(n);
    fv.values[slot++] = entropy_bits(src_ports, total);
    fv.values[slot++] = entropy_bits(dst_ports, total);
    fv.values[slot++] = entropy_bits(src_ids, total);
    fv.values[slot++] = entropy_bits(dst_ids, total);
    for (int p = 0; p < 4; ++p)
        fv.values[slot++] = static_cast<double>(proto_counts[p]) / static_cast<double>(n);

    fv.window_start = window.front().timestamp;
    fv.window_end = window.back().timestamp;
    fv.truth_label = anomalous ? TruthLabel::ANOMALOUS : TruthLabel::NORMAL;
    return fv;
}

FlowCollector::FlowCollector(CollectorConfig config, std::string ran_id)
    : config_(std::move(config)), ran_id_(std::move(ran_id)) {
    config_.validate();
}

std::optional<FeatureVector> FlowCollector::ingest(const FlowRecord& flow) {
    flow.validate();
    if (any_ingested_ && flow.timestamp < last_timestamp_)
        throw RuntimeFault("flow timestamp went backwards: " +
                           std::to_string(flow.timestamp) + " after " +
                           std::to_string(last_timestamp_));
    last_timestamp_ = flow.timestamp;
    any_ingested_ = true;

    window_.push_back(flow);
    if (static_cast<std::int64_t>(window_.size()) > config_.window_size) window_.pop_front();
    ++flows_ingested_;

    if (!window_filled_) {
        if (static_cast<std::int64_t>(window_.size()) < config_.window_size) return std::nullopt;
        window_filled_ = true;
        since_emission_ = 0;
    } else {
        if (++since_emission_ < config_.offset) return std::nullopt;
        since_emission_ = 0;
    }

    std::vector<FlowRecord> snapshot(window_.begin(), window_.end());
    FeatureVector fv = compute_features(snapshot, config_);
    fv.ran_id = ran_id_;
    ++vectors_emitted_;
    return fv;
}

void FlowCollector::set_offset(std::int64_t offset) {
    if (offset < 1) throw std::invalid_argument("offset must be >= 1");
    config_.offset = offset;
    if (config_.window_size < offset) config_.window_size = offset;
    while (static_cast<std::int64_t>(window_.size()) > config_.window_size) window_.pop_front();
    if (since_emission_ >= config_.offset) since_emission_ = config_.offset - 1;
}

namespace {

Protocol parse_protocol(const std::string& token, int line) {
    if (token == "TCP" || token == "tcp") return Protocol::TCP;
    if (token == "UDP" || token == "udp") return Protocol::UDP;
    if (token == "ICMP" || token == "icmp") return Protocol::ICMP;
    if (token == "OTHER" || token == "other") return Protocol::OTHER;
    throw ParseError("unknown protocol '" + token + "'", line);
}

TruthLabel parse_label(const std::string& token, int line) {
    if (token == "NORMAL" || token == "normal") return TruthLabel::NORMAL;
    if (token == "ANOMALOUS" || token == "anomalous") return TruthLabel::ANOMALOUS;
    throw ParseError("unknown label '" + token + "'", line);
}

} // namespace

std::vector<FlowRecord> read_flow_trace(std::istream& in) {
    std::vector<FlowRecord> flows;
    std::string line;
    int lineno = 0;
    double prev_ts = 0.0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            std::size_t b = field.find_first_not_of(" \t\r");
            std::size_t e = field.find_last_not_of(" \t\r");
            fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
        }
        if (fields.size() != 10)
            throw ParseError("expected 10 comma-separated fields, got " +
                             std::to_string(fields.size()), lineno);
        try {
            FlowRecord f;
            f.timestamp = std::stod(fields[0]);
            f.src_id = static_cast<std::uint32_t>(std::stoul(fields[1]));
            f.dst_id = static_cast<std::uint32_t>(std::stoul(fields[2]));
            f.src_port = static_cast<std::uint16_t>(std::stoul(fields[3]));
            f.dst_port = static_cast<std::uint16_t>(std::stoul(fields[4]));
            f.protocol = parse_protocol(fields[5], lineno);
            f.bytes = std::stoull(fields[6]);
            f.packets = std::stoull(fields[7]);
            f.duration = std::stod(fields[8]);
            f.label = parse_label(fields[9], lineno);
            f.validate();
            if (!flows.empty() && f.timestamp < prev_ts)
                throw ParseError("timestamps must be non-decreasing", lineno);
            prev_ts = f.timestamp;
            flows.push_back(f);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad flow record: ") + e.what(), lineno);
        }
    }
    return flows;
}

std::vector<FlowRecord> read_flow_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trace file '" + path + "'");
    return read_flow_trace(in);
}

std::string format_flow_record(const FlowRecord& f) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.9f,%u,%u,%u,%u,%s,%llu,%llu,%.9f,%s",
                  f.timestamp, f.src_id, f.dst_id, f.src_port, f.dst_port,
                  to_string(f.protocol),
                  static_cast<unsigned long long>(f.bytes),
                  static_cast<unsigned long long>(f.packets), f.duration,
                  to_string(f.label));
    return buf;
}

} // namespace adsim
