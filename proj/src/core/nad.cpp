#include "core/nad.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "core/errors.hpp"

namespace adsim {

std::vector<Symptom> merge_symptom_streams(const std::vector<std::vector<Symptom>>& streams) {
    for (const auto& stream : streams)
        for (std::size_t i = 1; i < stream.size(); ++i)
            if (stream[i].timestamp < stream[i - 1].timestamp)
                throw std::invalid_argument("symptom stream is not time-ordered");

    struct Cursor {
        std::size_t stream;
        std::size_t pos;
    };
    auto later = [&](const Cursor& a, const Cursor& b) {
        const Symptom& sa = streams[a.stream][a.pos];
        const Symptom& sb = streams[b.stream][b.pos];
        if (sa.timestamp != sb.timestamp) return sa.timestamp > sb.timestamp;
        if (sa.ran_id != sb.ran_id) return sa.ran_id > sb.ran_id;
        return a.stream > b.stream; // input order
    };

    std::vector<Cursor> heap;
    std::size_t total = 0;
    for (std::size_t s = 0; s < streams.size(); ++s) {
        total += streams[s].size();
        if (!streams[s].empty()) heap.push_back({s, 0});
    }
    std::make_heap(heap.begin(), heap.end(), later);

    std::vector<Symptom> merged;
    merged.reserve(total);
    while (!heap.empty()) {
        std::pop_heap(heap.begin(), heap.end(), later);
        Cursor c = heap.back();
        heap.pop_back();
        merged.push_back(streams[c.stream][c.pos]);
        if (c.pos + 1 < streams[c.stream].size()) {
            heap.push_back({c.stream, c.pos + 1});
            std::push_heap(heap.begin(), heap.end(), later);
        }
    }
    return merged;
}

CountThresholdDetector::CountThresholdDetector(std::int64_t k, double horizon_s)
    : k_(k), horizon_(horizon_s) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(horizon_s > 0.0)) throw std::invalid_argument("horizon must be > 0");
}

std::optional<NetworkAnomaly> CountThresholdDetector::score(
    const std::vector<Symptom>& window) const {
    if (window.empty()) return std::nullopt;

    std::map<std::string, std::int64_t> per_ran;
    std::map<std::string, std::pair<double, double>> spans;
    for (const Symptom& s : window) {
        auto [it, fresh] = per_ran.try_emplace(s.ran_id, 0);
        ++it->second;
        auto [sp, _] = spans.try_emplace(s.ran_id, std::make_pair(s.timestamp, s.timestamp));
        sp->second.first = std::min(sp->second.first, s.timestamp);
        sp->second.second = std::max(sp->second.second, s.timestamp);
    }

    NetworkAnomaly anomaly;
    anomaly.anomaly_type = window.front().anomaly_type;
    for (const auto& [ran, count] : per_ran) {
        if (count >= k_) {
            anomaly.ran_ids.push_back(ran);
            if (anomaly.ran_ids.size() == 1) {
                anomaly.window_start = spans[ran].first;
                anomaly.window_end = spans[ran].second;
            } else {
                anomaly.window_start = std::min(anomaly.window_start, spans[ran].first);
                anomaly.window_end = std::max(anomaly.window_end, spans[ran].second);
            }
        }
    }
    if (anomaly.ran_ids.empty()) return std::nullopt;
    return anomaly;
}

std::optional<NetworkAnomaly> score_sequence(const std::vector<Symptom>& window,
                                             const SequenceDetector& detector) {
    if (!window.empty()) {
        double span = window.back().timestamp - window.front().timestamp;
        if (span > detector.horizon())
            throw std::invalid_argument("symptom window exceeds detector horizon");
    }
    return detector.score(window);
}

SymptomAggregator::SymptomAggregator(std::int64_t k, double horizon_s)
    : k_(k), horizon_(horizon_s) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(horizon_s > 0.0)) throw std::invalid_argument("horizon must be > 0");
}

std::optional<NetworkAnomaly> SymptomAggregator::add(const std::string& ran_id,
                                                     double timestamp, std::int64_t count,
                                                     const std::string& anomaly_type) {
    if (count < 0) throw std::invalid_argument("symptom count must be >= 0");
    RanWindow* win = nullptr;
    for (auto& [id, w] : rans_)
        if (id == ran_id) win = &w;
    if (win == nullptr) {
        rans_.emplace_back(ran_id, RanWindow{});
        win = &rans_.back().second;
    }

    total_ += count;
    if (count > 0) win->entries.emplace_back(timestamp, count);
    win->windowed += count;
    while (!win->entries.empty() && win->entries.front().first < timestamp - horizon_) {
        win->windowed -= win->entries.front().second;
        win->entries.pop_front();
    }

    // Re-arm once the stream has been quiet for a horizon.
    if (win->active && (win->entries.empty() ||
                        timestamp - win->last_fired > horizon_))
        win->active = false;

    if (!win->active && win->windowed >= k_) {
        win->active = true;
        win->last_fired = timestamp;
        NetworkAnomaly anomaly;
        anomaly.anomaly_type = anomaly_type;
        anomaly.ran_ids = {ran_id};
        anomaly.window_start = win->entries.empty() ? timestamp : win->entries.front().first;
        anomaly.window_end = timestamp;
        return anomaly;
    }
    return std::nullopt;
}

} // namespace adsim
