#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "core/scenario.hpp"

using namespace adsim;

TEST_CASE("sigmoid hits the midpoint, floor and saturation anchors") {
    ScenarioModel m;
    CHECK(flow_rate_at(m, 5.2933) == doctest::Approx(5e6));
    CHECK(std::abs(flow_rate_at(m, 0.0) - 5e4) / 5e4 < 0.005);
    CHECK(flow_rate_at(m, 10.0) >= 0.99 * 1e7);
}

TEST_CASE("flow rate is strictly increasing and bounded") {
    ScenarioModel m;
    double prev = 0.0;
    for (double t = -5.0; t <= 20.0; t += 0.25) {
        double r = flow_rate_at(m, t);
        CHECK(r > prev);
        CHECK(r > 0.0);
        CHECK(r < m.saturation);
        prev = r;
    }
}

TEST_CASE("feature rate divides by offset") {
    ScenarioModel m;
    CHECK(feature_rate_at(m, 3.0, 1) == doctest::Approx(flow_rate_at(m, 3.0)));
    CHECK(feature_rate_at(m, m.midpoint, 2) == doctest::Approx(2.5e6));
    CHECK(feature_rate_at(m, 10.0, 4) == doctest::Approx(2.478e6).epsilon(1e-3));
    CHECK_THROWS(feature_rate_at(m, 0.0, 0));
}

TEST_CASE("derivative of an exact line is exact") {
    std::vector<RateSample> samples;
    for (int i = 0; i < 5; ++i)
        samples.push_back({static_cast<double>(i), 3.0 + 10.0 * static_cast<double>(i)});
    CHECK(estimate_derivative(samples) == doctest::Approx(10.0).epsilon(1e-12));

    std::vector<RateSample> flat;
    for (int i = 0; i < 5; ++i) flat.push_back({static_cast<double>(i), 7.5});
    CHECK(estimate_derivative(flat) == doctest::Approx(0.0));
}

TEST_CASE("derivative window uses only the most recent samples") {
    std::vector<RateSample> samples;
    // Garbage history followed by a clean line.
    for (int i = 0; i < 5; ++i) samples.push_back({static_cast<double>(i), 1000.0});
    for (int i = 5; i < 10; ++i)
        samples.push_back({static_cast<double>(i), 2.0 * static_cast<double>(i)});
    CHECK(estimate_derivative(samples, 5) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("derivative around the sigmoid midpoint matches saturation/4") {
    ScenarioModel m;
    std::vector<RateSample> samples;
    for (int i = -2; i <= 2; ++i) {
        double t = m.midpoint + 0.01 * static_cast<double>(i);
        samples.push_back({t, flow_rate_at(m, t)});
    }
    // Samples are in model units here, so the slope is per time unit.
    CHECK(estimate_derivative(samples) ==
          doctest::Approx(m.saturation / 4.0).epsilon(0.01));
}

TEST_CASE("derivative is invariant under a time-origin shift") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<RateSample> a, b;
        double shift = rng.uniform(-1e6, 1e6);
        for (int i = 0; i < 5; ++i) {
            double t = static_cast<double>(i) * rng.uniform(0.5, 2.0) + 0.1;
            double r = rng.uniform(0.0, 1e6);
            a.push_back({t, r});
            b.push_back({t + shift, r});
        }
        CHECK(estimate_derivative(a) ==
              doctest::Approx(estimate_derivative(b)).epsilon(1e-6));
    }
}

TEST_CASE("derivative needs two distinct times") {
    CHECK_THROWS(estimate_derivative({{1.0, 5.0}}));
    CHECK_THROWS(estimate_derivative({{1.0, 5.0}, {1.0, 6.0}}));
}

TEST_CASE("forecast extrapolates linearly with a floor at zero") {
    CHECK(forecast(100.0, 10.0, 2.0) == doctest::Approx(120.0));
    CHECK(forecast(123.0, -999.0, 0.0) == doctest::Approx(123.0));
    CHECK(forecast(10.0, -100.0, 1.0) == doctest::Approx(0.0));
    CHECK_THROWS(forecast(1.0, 1.0, -0.5));
}

TEST_CASE("forecast(r, d, h) >= r exactly when d >= 0") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        double r = rng.uniform(0.0, 1e6);
        double d = rng.uniform(-1e5, 1e5);
        double h = rng.uniform(0.0, 10.0);
        double f = forecast(r, d, h);
        if (d >= 0.0) CHECK(f >= r);
        if (h > 0.0 && d < 0.0) CHECK(f <= r);
    }
}

TEST_CASE("tangent forecast overestimates past the midpoint") {
    ScenarioModel m;
    double t0 = m.midpoint;
    double rate = flow_rate_at(m, t0);
    // Analytic derivative at the midpoint (per time unit).
    double deriv = m.saturation / 4.0;
    double predicted = forecast(rate, deriv, 0.5);
    double actual = flow_rate_at(m, t0 + 0.5);
    CHECK(predicted > actual);
}
