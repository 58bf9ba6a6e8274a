#ifndef ADSIM_CORE_NAD_HPP
#define ADSIM_CORE_NAD_HPP

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/neural.hpp"

namespace adsim {

/// Network-level anomaly derived from a symptom sequence.
struct NetworkAnomaly {
    std::string anomaly_type;
    std::vector<std::string> ran_ids;
    double window_start = 0.0;
    double window_end = 0.0;
};

/// Merge per-RAN symptom streams into one globally time-ordered sequence.
/// Ties break by ran_id ascending, then input order. Each input stream must
/// be non-decreasing in timestamp.
std::vector<Symptom> merge_symptom_streams(const std::vector<std::vector<Symptom>>& streams);

/// Pluggable symptom-sequence classifier.
class SequenceDetector {
public:
    virtual ~SequenceDetector() = default;
    /// Window must not span more than horizon() seconds.
    virtual std::optional<NetworkAnomaly> score(const std::vector<Symptom>& window) const = 0;
    virtual double horizon() const = 0;
};

/// Default heuristic: fires when one RAN contributes at least k symptoms
/// within the horizon. Symptoms are never pooled across RANs.
class CountThresholdDetector : public SequenceDetector {
public:
    CountThresholdDetector(std::int64_t k, double horizon_s);
    std::optional<NetworkAnomaly> score(const std::vector<Symptom>& window) const override;
    double horizon() const override { return horizon_; }
    std::int64_t k() const { return k_; }

private:
    std::int64_t k_;
    double horizon_;
};

std::optional<NetworkAnomaly> score_sequence(const std::vector<Symptom>& window,
                                             const SequenceDetector& detector);

/// Streaming front end used by the simulator: accepts symptom counts per
/// RAN (aggregate mode supplies counts without materializing symptoms),
/// keeps a sliding horizon, and reports anomalies through the detector's
/// counting rule. Consecutive firings for one RAN are merged until the
/// stream goes quiet for a horizon.
class SymptomAggregator {
public:
    SymptomAggregator(std::int64_t k, double horizon_s);

    /// Returns an anomaly when the windowed count for `ran_id` first reaches
    /// k (and again after a quiet period).
    std::optional<NetworkAnomaly> add(const std::string& ran_id, double timestamp,
                                      std::int64_t count, const std::string& anomaly_type);

    std::int64_t total_symptoms() const { return total_; }

private:
    struct RanWindow {
        std::deque<std::pair<double, std::int64_t>> entries;
        std::int64_t windowed = 0;
        double last_fired = -1.0;
        bool active = false;
    };

    std::int64_t k_;
    double horizon_;
    std::int64_t total_ = 0;
    std::vector<std::pair<std::string, RanWindow>> rans_;
};

} // namespace adsim

#endif
