#include <doctest.h>

#include <cmath>

#include "core/batch.hpp"
#include "core/rng.hpp"

using namespace adsim;

namespace {

FeatureVector fv_at(double window_end) {
    FeatureVector fv;
    fv.values = {1.0, 2.0};
    fv.window_end = window_end;
    fv.window_start = window_end - 0.1;
    return fv;
}

} // namespace

TEST_CASE("exact fill emits an unforced batch") {
    FeatureBatcher b(3, 5.0);
    CHECK(!b.push(fv_at(0.1), 0.1));
    CHECK(!b.push(fv_at(0.2), 0.2));
    auto batch = b.push(fv_at(0.3), 0.3);
    REQUIRE(batch);
    CHECK(batch->vectors.size() == 3);
    CHECK(!batch->forced_flush);
    CHECK(batch->fill_start == doctest::Approx(0.1));
    CHECK(batch->fill_end == doctest::Approx(0.3));
    CHECK(b.pending() == 0);
}

TEST_CASE("slow feature stream is force-flushed at the limit") {
    // One feature per second into a batch that would need 16384: by t=5 the
    // deadline fires with the 5 collected vectors.
    FeatureBatcher b(16384, 5.0);
    std::optional<FeatureBatch> batch;
    for (int i = 0; i <= 5 && !batch; ++i)
        batch = b.push(fv_at(static_cast<double>(i)), static_cast<double>(i));
    REQUIRE(batch);
    CHECK(batch->forced_flush);
    CHECK(batch->vectors.size() == 5);
    CHECK(batch->fill_end == batch->fill_start + 5.0);
    CHECK(b.pending() == 1); // the t=5 vector opened a fresh batch
}

TEST_CASE("late push first flushes the stale batch at its deadline") {
    FeatureBatcher b(2, 5.0);
    CHECK(!b.push(fv_at(0.0), 0.0));
    auto batch = b.push(fv_at(5.1), 5.1);
    REQUIRE(batch);
    CHECK(batch->forced_flush);
    CHECK(batch->vectors.size() == 1);
    // The flush is attributed to the deadline, exactly.
    CHECK(batch->fill_end == 0.0 + 5.0);
    CHECK(b.pending() == 1);
}

TEST_CASE("poll_flush flushes only past the deadline, empty flush is a no-op") {
    FeatureBatcher b(10, 5.0);
    CHECK(!b.poll_flush(100.0));
    CHECK(!b.flush(100.0));
    b.push(fv_at(100.0), 100.0);
    CHECK(!b.poll_flush(104.9));
    CHECK(b.flush_deadline() == doctest::Approx(105.0));
    auto batch = b.poll_flush(105.0);
    REQUIRE(batch);
    CHECK(batch->forced_flush);
    CHECK(batch->fill_end == 100.0 + 5.0);
}

TEST_CASE("batches keep arrival order and respect the size contract") {
    Rng rng(23);
    FeatureBatcher b(7, 5.0);
    double t = 0.0;
    int emitted = 0;
    for (int i = 0; i < 500; ++i) {
        t += rng.uniform(0.0, 2.0);
        auto batch = b.push(fv_at(t), t);
        if (!batch) batch = b.poll_flush(t);
        if (batch) {
            ++emitted;
            CHECK(!batch->vectors.empty());
            CHECK(batch->vectors.size() <= 7);
            if (!batch->forced_flush) CHECK(batch->vectors.size() == 7);
            for (std::size_t k = 1; k < batch->vectors.size(); ++k)
                CHECK(batch->vectors[k - 1].window_end <= batch->vectors[k].window_end);
            CHECK(batch->fill_start <= batch->fill_end);
        }
    }
    CHECK(emitted == b.batches_emitted());
    CHECK(emitted > 10);
}

TEST_CASE("batcher rejects degenerate parameters and time travel") {
    CHECK_THROWS(FeatureBatcher(0, 5.0));
    CHECK_THROWS(FeatureBatcher(4, 0.0));
    FeatureBatcher b(4, 5.0);
    b.push(fv_at(2.0), 2.0);
    CHECK_THROWS_AS(b.push(fv_at(1.0), 1.0), RuntimeFault);
}

TEST_CASE("batch size one never needs the deadline path") {
    FeatureBatcher b(1, 5.0);
    for (int i = 0; i < 5; ++i) {
        auto batch = b.push(fv_at(10.0 * i), 10.0 * i);
        REQUIRE(batch);
        CHECK(batch->vectors.size() == 1);
        CHECK(!batch->forced_flush);
    }
}
