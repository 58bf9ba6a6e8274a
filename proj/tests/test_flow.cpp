#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/flow.hpp"
#include "core/rng.hpp"

using namespace adsim;

namespace {

FlowRecord make_flow(double ts, std::uint16_t dst_port = 80,
                     TruthLabel label = TruthLabel::NORMAL) {
    FlowRecord f;
    f.timestamp = ts;
    f.src_id = 1;
    f.dst_id = 2;
    f.src_port = 40000;
    f.dst_port = dst_port;
    f.protocol = Protocol::TCP;
    f.bytes = 1200;
    f.packets = 4;
    f.duration = 0.5;
    f.label = label;
    return f;
}

CollectorConfig config_with(std::int64_t offset, std::int64_t window) {
    CollectorConfig c;
    c.offset = offset;
    c.window_size = window;
    c.batch_size = 8;
    c.feature_dim = 32;
    return c;
}

} // namespace

TEST_CASE("offset 1 window 1 emits one vector per flow") {
    FlowCollector col(config_with(1, 1), "ran-a");
    for (int i = 0; i < 10; ++i)
        CHECK(col.ingest(make_flow(0.1 * i)).has_value());
    CHECK(col.vectors_emitted() == 10);
}

TEST_CASE("offset 2 window 2 over 10 flows emits 5 vectors") {
    FlowCollector col(config_with(2, 2), "ran-a");
    int emitted = 0;
    for (int i = 0; i < 10; ++i)
        if (col.ingest(make_flow(0.1 * i))) ++emitted;
    CHECK(emitted == 5);
}

TEST_CASE("emission count matches the conservation formula") {
    Rng rng(99);
    for (int rep = 0; rep < 40; ++rep) {
        std::int64_t offset = 1 + static_cast<std::int64_t>(rng.below(5));
        std::int64_t window = offset + static_cast<std::int64_t>(rng.below(4));
        std::int64_t flows = static_cast<std::int64_t>(rng.below(60));
        FlowCollector col(config_with(offset, window), "r");
        for (std::int64_t i = 0; i < flows; ++i) col.ingest(make_flow(0.01 * i));
        std::int64_t expected =
            std::max<std::int64_t>(0, (flows - window) / offset + (flows >= window ? 1 : 0));
        CHECK(col.vectors_emitted() == expected);
    }
}

TEST_CASE("mean inter-feature time converges to offset/rate") {
    // Constant 1000 flows/s with +-30% jitter on individual spacing.
    const double rate = 1000.0;
    const std::int64_t offset = 4;
    FlowCollector col(config_with(offset, offset), "r");
    Rng rng(5);
    double t = 0.0;
    std::vector<double> emissions;
    for (int i = 0; i < 20000; ++i) {
        t += (1.0 / rate) * rng.uniform(0.7, 1.3);
        auto fv = col.ingest(make_flow(t));
        if (fv) emissions.push_back(fv->window_end);
    }
    REQUIRE(emissions.size() > 100);
    double mean_gap = (emissions.back() - emissions.front()) /
                      static_cast<double>(emissions.size() - 1);
    CHECK(std::abs(mean_gap - offset / rate) / (offset / rate) < 0.01);
}

TEST_CASE("non-monotone timestamps are rejected") {
    FlowCollector col(config_with(1, 1), "r");
    col.ingest(make_flow(1.0));
    CHECK_THROWS_AS(col.ingest(make_flow(0.5)), RuntimeFault);
}

TEST_CASE("every flow lands in at least one window when window >= offset") {
    // With offset == window_size the windows tile the stream exactly; check
    // via the covered-flow count derived from emissions.
    FlowCollector col(config_with(3, 3), "r");
    std::int64_t covered = 0;
    for (int i = 0; i < 30; ++i)
        if (col.ingest(make_flow(0.1 * i))) covered += 3;
    CHECK(covered == 30);
}

TEST_CASE("features of identical flows have zero spread and zero entropy") {
    CollectorConfig cfg = config_with(1, 1);
    std::vector<FlowRecord> window(6, make_flow(2.0));
    FeatureVector fv = compute_features(window, cfg);
    // Layout: [bytes x5][packets x5][duration x5][4 entropies][4 proto fracs].
    CHECK(fv.values[1] == 0.0);  // bytes std
    CHECK(fv.values[6] == 0.0);  // packets std
    CHECK(fv.values[11] == 0.0); // duration std
    for (int i = 15; i < 19; ++i) CHECK(fv.values[i] == 0.0);
    CHECK(fv.values[19] == 1.0); // all TCP
    CHECK(fv.truth_label == TruthLabel::NORMAL);
}

TEST_CASE("two equally frequent destination ports give exactly one bit") {
    CollectorConfig cfg = config_with(1, 1);
    std::vector<FlowRecord> window;
    for (int i = 0; i < 4; ++i)
        window.push_back(make_flow(1.0 + i, i % 2 == 0 ? 80 : 443));
    FeatureVector fv = compute_features(window, cfg);
    CHECK(fv.values[16] == 1.0); // dst_port entropy, bits
}

TEST_CASE("hand-built window matches an independent statistics oracle") {
    CollectorConfig cfg = config_with(1, 1);
    cfg.feature_dim = 32;
    std::vector<FlowRecord> window;
    std::vector<double> bytes{1500, 900, 420, 66, 1200, 3000, 64, 850};
    std::vector<double> packets{10, 6, 3, 1, 8, 20, 1, 5};
    std::vector<double> durations{0.5, 0.25, 1.5, 0.05, 2.0, 0.75, 0.1, 0.4};
    for (int i = 0; i < 8; ++i) {
        FlowRecord f = make_flow(10.0 + i, static_cast<std::uint16_t>(80 + i % 3));
        f.bytes = static_cast<std::uint64_t>(bytes[i]);
        f.packets = static_cast<std::uint64_t>(packets[i]);
        f.duration = durations[i];
        f.src_id = static_cast<std::uint32_t>(i % 4);
        window.push_back(f);
    }
    FeatureVector fv = compute_features(window, cfg);

    // Oracle: spreadsheet-style recomputation, independent code path.
    auto oracle = [](std::vector<double> v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        std::sort(v.begin(), v.end());
        double median = 0.5 * (v[3] + v[4]);
        return std::array<double, 5>{mean, std::sqrt(var), v.front(), v.back(), median};
    };
    auto b = oracle(bytes);
    auto p = oracle(packets);
    auto d = oracle(durations);
    for (int k = 0; k < 5; ++k) {
        CHECK(fv.values[k] == doctest::Approx(b[k]).epsilon(1e-12));
        CHECK(fv.values[5 + k] == doctest::Approx(p[k]).epsilon(1e-12));
        CHECK(fv.values[10 + k] == doctest::Approx(d[k]).epsilon(1e-12));
    }
    // src_id counts {0:2, 1:2, 2:2, 3:2} -> 2 bits.
    CHECK(fv.values[17] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fv.window_start == doctest::Approx(10.0));
    CHECK(fv.window_end == doctest::Approx(17.0));
}

TEST_CASE("compute_features is pure and labels anomalies") {
    CollectorConfig cfg = config_with(1, 1);
    std::vector<FlowRecord> window{make_flow(1.0), make_flow(2.0),
                                   make_flow(3.0, 80, TruthLabel::ANOMALOUS)};
    FeatureVector a = compute_features(window, cfg);
    FeatureVector b = compute_features(window, cfg);
    CHECK(a.values == b.values);
    CHECK(a.truth_label == TruthLabel::ANOMALOUS);
    CHECK_THROWS(compute_features({}, cfg));
    CHECK(static_cast<std::int64_t>(a.values.size()) == cfg.feature_dim);
}

TEST_CASE("flow trace round-trips through the text format") {
    std::vector<FlowRecord> flows;
    Rng rng(17);
    double t = 0.0;
    for (int i = 0; i < 20; ++i) {
        t += rng.uniform(0.0, 0.5);
        FlowRecord f = make_flow(t, static_cast<std::uint16_t>(rng.below(65536)),
                                 rng.bernoulli(0.2) ? TruthLabel::ANOMALOUS
                                                    : TruthLabel::NORMAL);
        f.protocol = static_cast<Protocol>(rng.below(4));
        f.bytes = 100 + rng.below(10000);
        f.packets = 1 + rng.below(50);
        if (f.bytes < f.packets) f.bytes = f.packets;
        flows.push_back(f);
    }
    std::ostringstream text;
    text << "# trace header comment\n";
    for (const FlowRecord& f : flows) text << format_flow_record(f) << "\n";

    std::istringstream in(text.str());
    std::vector<FlowRecord> parsed = read_flow_trace(in);
    REQUIRE(parsed.size() == flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        CHECK(parsed[i].timestamp == doctest::Approx(flows[i].timestamp).epsilon(1e-9));
        CHECK(parsed[i].src_port == flows[i].src_port);
        CHECK(parsed[i].dst_port == flows[i].dst_port);
        CHECK(parsed[i].protocol == flows[i].protocol);
        CHECK(parsed[i].bytes == flows[i].bytes);
        CHECK(parsed[i].label == flows[i].label);
    }
}

TEST_CASE("flow trace parse errors carry line numbers") {
    std::istringstream missing("1.0,1,2,80,443,TCP,100,2\n");
    CHECK_THROWS_AS(read_flow_trace(missing), ParseError);

    std::istringstream bad_proto("1.0,1,2,80,443,FTP,100,2,0.1,NORMAL\n");
    try {
        read_flow_trace(bad_proto);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }

    std::istringstream backwards(
        "2.0,1,2,80,443,TCP,100,2,0.1,NORMAL\n"
        "1.0,1,2,80,443,TCP,100,2,0.1,NORMAL\n");
    try {
        read_flow_trace(backwards);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("flow traces load from files") {
    std::string path = "adsim-trace-test.csv";
    {
        std::ofstream out(path);
        out << "# two-record trace\n";
        out << "0.5,1,2,1000,80,TCP,400,4,0.2,NORMAL\n";
        out << "0.75,3,2,1001,443,UDP,90,1,0.0,ANOMALOUS\n";
    }
    auto flows = read_flow_trace_file(path);
    std::remove(path.c_str());
    REQUIRE(flows.size() == 2);
    CHECK(flows[1].label == TruthLabel::ANOMALOUS);
    CHECK(flows[1].protocol == Protocol::UDP);
    CHECK_THROWS_AS(read_flow_trace_file("definitely-missing.csv"), ParseError);
}
