#include <doctest.h>

#include <algorithm>

#include "core/nad.hpp"
#include "core/rng.hpp"

using namespace adsim;

namespace {

Symptom symptom(double t, const std::string& ran, const std::string& type = "binary") {
    Symptom s;
    s.timestamp = t;
    s.ran_id = ran;
    s.score = 0.9;
    s.anomaly_type = type;
    return s;
}

} // namespace

TEST_CASE("two-way merge interleaves by time") {
    std::vector<std::vector<Symptom>> streams{
        {symptom(1.0, "a"), symptom(3.0, "a")},
        {symptom(2.0, "b")},
    };
    auto merged = merge_symptom_streams(streams);
    REQUIRE(merged.size() == 3);
    CHECK(merged[0].timestamp == 1.0);
    CHECK(merged[1].timestamp == 2.0);
    CHECK(merged[2].timestamp == 3.0);
}

TEST_CASE("equal timestamps break ties by ran id ascending") {
    std::vector<std::vector<Symptom>> streams{
        {symptom(5.0, "ran-b")},
        {symptom(5.0, "ran-a")},
    };
    auto merged = merge_symptom_streams(streams);
    CHECK(merged[0].ran_id == "ran-a");
    CHECK(merged[1].ran_id == "ran-b");

    // Same ran and time: input (stream) order decides.
    std::vector<std::vector<Symptom>> same{
        {symptom(5.0, "ran-a", "first")},
        {symptom(5.0, "ran-a", "second")},
    };
    auto m2 = merge_symptom_streams(same);
    CHECK(m2[0].anomaly_type == "first");
    CHECK(m2[1].anomaly_type == "second");
}

TEST_CASE("merging random sorted streams equals sorting the concatenation") {
    Rng rng(31);
    std::vector<std::vector<Symptom>> streams(5);
    std::vector<double> all;
    for (auto& stream : streams) {
        double t = 0.0;
        std::size_t n = rng.below(40);
        for (std::size_t i = 0; i < n; ++i) {
            t += rng.uniform(0.0, 1.0);
            stream.push_back(symptom(t, "ran-" + std::to_string(rng.below(3))));
            all.push_back(t);
        }
    }
    auto merged = merge_symptom_streams(streams);
    std::sort(all.begin(), all.end());
    REQUIRE(merged.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        CHECK(merged[i].timestamp == doctest::Approx(all[i]));
}

TEST_CASE("unsorted input stream is rejected") {
    std::vector<std::vector<Symptom>> streams{
        {symptom(2.0, "a"), symptom(1.0, "a")},
    };
    CHECK_THROWS(merge_symptom_streams(streams));
}

TEST_CASE("count detector fires on k symptoms within the horizon") {
    CountThresholdDetector det(3, 10.0);
    std::vector<Symptom> window{symptom(1.0, "a"), symptom(2.0, "a"), symptom(3.0, "a")};
    auto anomaly = score_sequence(window, det);
    REQUIRE(anomaly);
    CHECK(anomaly->ran_ids == std::vector<std::string>{"a"});
    CHECK(anomaly->window_start == doctest::Approx(1.0));
    CHECK(anomaly->window_end == doctest::Approx(3.0));
}

TEST_CASE("symptoms spread past the horizon do not fire") {
    CountThresholdDetector det(3, 10.0);
    std::vector<Symptom> window{symptom(0.0, "a"), symptom(30.0, "a"), symptom(60.0, "a")};
    // The caller must not hand the detector a wider window than its horizon.
    CHECK_THROWS(score_sequence(window, det));
    // Within-horizon slices never reach k.
    CHECK(!score_sequence({window[0]}, det));
    CHECK(!score_sequence({window[1]}, det));
}

TEST_CASE("the default detector never pools symptoms across RANs") {
    // Exhaustive: distribute 3 symptoms over 2 RANs; only the all-one-RAN
    // assignments may fire with k=3.
    CountThresholdDetector det(3, 10.0);
    for (int mask = 0; mask < 8; ++mask) {
        std::vector<Symptom> window;
        int count_a = 0;
        for (int i = 0; i < 3; ++i) {
            bool is_a = (mask >> i) & 1;
            count_a += is_a ? 1 : 0;
            window.push_back(symptom(1.0 + i, is_a ? "a" : "b"));
        }
        auto anomaly = det.score(window);
        bool should_fire = count_a == 3 || count_a == 0;
        CHECK(anomaly.has_value() == should_fire);
    }
}

TEST_CASE("aggregator fires once per burst and re-arms after quiet") {
    SymptomAggregator agg(3, 10.0);
    CHECK(!agg.add("a", 1.0, 1, "binary"));
    CHECK(!agg.add("a", 2.0, 1, "binary"));
    auto first = agg.add("a", 3.0, 1, "binary");
    REQUIRE(first);
    CHECK(first->ran_ids == std::vector<std::string>{"a"});
    // Still in the same burst: suppressed.
    CHECK(!agg.add("a", 4.0, 5, "binary"));
    // Long quiet, then a new burst fires again.
    CHECK(!agg.add("a", 100.0, 1, "binary"));
    CHECK(!agg.add("a", 101.0, 1, "binary"));
    CHECK(agg.add("a", 102.0, 1, "binary").has_value());
    CHECK(agg.total_symptoms() == 11);
}

TEST_CASE("aggregator keeps RANs independent") {
    SymptomAggregator agg(2, 10.0);
    CHECK(!agg.add("a", 1.0, 1, "binary"));
    CHECK(!agg.add("b", 1.5, 1, "binary"));
    auto fired = agg.add("b", 2.0, 1, "suspicious_cc");
    REQUIRE(fired);
    CHECK(fired->ran_ids == std::vector<std::string>{"b"});
    CHECK(fired->anomaly_type == "suspicious_cc");
}
