#ifndef ADSIM_CORE_FLOW_HPP
#define ADSIM_CORE_FLOW_HPP

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace adsim {

enum class Protocol : std::uint8_t { TCP, UDP, ICMP, OTHER };
enum class TruthLabel : std::uint8_t { NORMAL, ANOMALOUS };

const char* to_string(Protocol p);
const char* to_string(TruthLabel l);

/// Summary of one L3/L4 flow as reported by the collector.
struct FlowRecord {
    double timestamp = 0.0; // seconds, simulated clock
    std::uint32_t src_id = 0;
    std::uint32_t dst_id = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Protocol protocol = Protocol::OTHER;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 1;
    double duration = 0.0;
    TruthLabel label = TruthLabel::NORMAL; // ground truth, simulation-only

    void validate() const;
};

/// Fixed-width statistical vector derived from a window of flows.
struct FeatureVector {
    std::vector<double> values;
    double window_start = 0.0;
    double window_end = 0.0;
    std::string ran_id;
    TruthLabel truth_label = TruthLabel::NORMAL;
};

struct CollectorConfig {
    std::int64_t offset = 1;       // flows between consecutive emissions
    std::int64_t window_size = 1;  // flows per window, >= offset
    std::int64_t batch_size = 1;   // vectors per evaluation batch
    double t_limit = 5.0;          // forced-flush limit, seconds
    std::int64_t feature_dim = 288;

    void validate() const;
};

// Feature schema: {mean, std, min, max, median} for bytes, packets and
// duration; base-2 Shannon entropy of src_port/dst_port/src_id/dst_id;
// protocol histogram fractions; zero padding up to feature_dim.
inline constexpr std::int64_t kFeatureSchemaSlots = 3 * 5 + 4 + 4;

/// Deterministic feature vector over a non-empty flow window. The label is
/// ANOMALOUS iff any window flow is ANOMALOUS.
FeatureVector compute_features(const std::vector<FlowRecord>& window,
                               const CollectorConfig& config);

/// Sliding-window flow collector: keeps the last window_size flows and emits
/// one feature vector per `offset` ingested flows once the window has filled.
class FlowCollector {
public:
    FlowCollector(CollectorConfig config, std::string ran_id);

    /// Rejects flows older than the last ingested one.
    std::optional<FeatureVector> ingest(const FlowRecord& flow);

    void set_offset(std::int64_t offset);

    const CollectorConfig& config() const { return config_; }
    const std::string& ran_id() const { return ran_id_; }
    std::int64_t flows_ingested() const { return flows_ingested_; }
    std::int64_t vectors_emitted() const { return vectors_emitted_; }
    bool window_filled() const { return window_filled_; }
    std::int64_t since_emission() const { return since_emission_; }
    std::int64_t window_count() const { return static_cast<std::int64_t>(window_.size()); }

private:
    CollectorConfig config_;
    std::string ran_id_;
    std::deque<FlowRecord> window_;
    std::int64_t flows_ingested_ = 0;
    std::int64_t vectors_emitted_ = 0;
    std::int64_t since_emission_ = 0;
    bool window_filled_ = false;
    double last_timestamp_ = 0.0;
    bool any_ingested_ = false;
};

/// Reads a flow trace: one comma-separated record per line in FlowRecord
/// field order (timestamp,src_id,dst_id,src_port,dst_port,protocol,bytes,
/// packets,duration,label), '#' lines skipped.
std::vector<FlowRecord> read_flow_trace(std::istream& in);
std::vector<FlowRecord> read_flow_trace_file(const std::string& path);
std::string format_flow_record(const FlowRecord& flow);

} // namespace adsim

#endif
