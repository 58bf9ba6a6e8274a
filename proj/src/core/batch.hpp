#ifndef ADSIM_CORE_BATCH_HPP
#define ADSIM_CORE_BATCH_HPP

#include <optional>
#include <vector>

#include "core/errors.hpp"

#include "core/flow.hpp"

namespace adsim {

/// One evaluation batch handed to a classifier backend.
struct FeatureBatch {
    std::vector<FeatureVector> vectors; // ordered by window_end
    double fill_start = 0.0;
    double fill_end = 0.0;
    bool forced_flush = false;
};

/// Accumulates feature vectors into evaluation batches. A batch is emitted
/// when it reaches batch_size, or forcibly (partial) once the oldest pending
/// vector has waited t_limit seconds. Flushing an empty batch is a no-op.
class FeatureBatcher {
public:
    FeatureBatcher(std::int64_t batch_size, double t_limit);

    /// The forced-flush check runs before insertion, so a push arriving past
    /// the deadline first flushes the stale batch and then starts a new one.
    std::optional<FeatureBatch> push(FeatureVector fv, double now);

    /// Timer hook: emits the open batch iff its deadline has passed.
    std::optional<FeatureBatch> poll_flush(double now);

    /// Unconditional flush of whatever is pending (used for hand-off).
    std::optional<FeatureBatch> flush(double now);

    /// Deadline of the open batch, if one is open.
    std::optional<double> flush_deadline() const;

    void set_batch_size(std::int64_t batch_size);
    std::int64_t batch_size() const { return batch_size_; }
    double t_limit() const { return t_limit_; }
    std::int64_t pending() const { return static_cast<std::int64_t>(open_.size()); }
    std::int64_t batches_emitted() const { return batches_emitted_; }

private:
    FeatureBatch take(double now, bool forced);

    std::int64_t batch_size_;
    double t_limit_;
    std::vector<FeatureVector> open_;
    double fill_start_ = 0.0;
    std::int64_t batches_emitted_ = 0;
};

} // namespace adsim

#endif
