#include "core/batch.hpp"

#include <stdexcept>
#include <utility>

#include "core/errors.hpp"

namespace adsim {

FeatureBatcher::FeatureBatcher(std::int64_t batch_size, double t_limit)
    : batch_size_(batch_size), t_limit_(t_limit) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(t_limit > 0.0)) throw std::invalid_argument("t_limit must be > 0");
}

FeatureBatch FeatureBatcher::take(double now, bool forced) {
    FeatureBatch batch;
    batch.vectors = std::move(open_);
    open_.clear();
    batch.fill_start = fill_start_;
    batch.fill_end = now;
    batch.forced_flush = forced;
    ++batches_emitted_;
    return batch;
}

std::optional<FeatureBatch> FeatureBatcher::push(FeatureVector fv, double now) {
    std::optional<FeatureBatch> emitted;
    if (!open_.empty()) {
        if (now < fill_start_) throw RuntimeFault("batcher time went backwards");
        // A push arriving past the deadline does what the timer would have
        // done: the flush is attributed to the deadline itself.
        if (now - fill_start_ >= t_limit_) emitted = take(fill_start_ + t_limit_, true);
    }
    if (open_.empty()) fill_start_ = now;
    open_.push_back(std::move(fv));
    if (static_cast<std::int64_t>(open_.size()) >= batch_size_) {
        // A deadline flush above leaves the batch with one vector, so both
        // emissions in a single push only happen for batch_size == 1, where
        // the deadline path is unreachable.
        emitted = take(now, false);
    }
    return emitted;
}

std::optional<FeatureBatch> FeatureBatcher::poll_flush(double now) {
    if (open_.empty() || now - fill_start_ < t_limit_) return std::nullopt;
    return take(fill_start_ + t_limit_, true);
}

std::optional<FeatureBatch> FeatureBatcher::flush(double now) {
    if (open_.empty()) return std::nullopt;
    return take(now, true);
}

std::optional<double> FeatureBatcher::flush_deadline() const {
    if (open_.empty()) return std::nullopt;
    return fill_start_ + t_limit_;
}

void FeatureBatcher::set_batch_size(std::int64_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    batch_size_ = batch_size;
}

} // namespace adsim
