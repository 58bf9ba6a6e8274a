#ifndef ADSIM_CORE_SCENARIO_HPP
#define ADSIM_CORE_SCENARIO_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace adsim {

/// Traffic load model for a crowd event: the flow rate ramps from a low
/// floor to saturation along a logistic curve. Model time is expressed in
/// abstract time units; time_unit gives the seconds per unit so the model
/// composes with deployment latencies.
struct ScenarioModel {
    double saturation = 1e7;   // flows/s
    double midpoint = 5.2933;  // time units
    double floor_check = 5e4;  // expected flow_rate_at(0), sanity anchor
    double duration = 10.0;    // time units
    double time_unit = 60.0;   // seconds per time unit
};

struct RateSample {
    double t = 0.0;    // seconds
    double rate = 0.0; // flows/s (or features/s)
};

/// flows(t) = saturation / (1 + exp(-(t - midpoint))), t in time units.
double flow_rate_at(const ScenarioModel& model, double t);

/// features(t) = flows(t) / offset.
double feature_rate_at(const ScenarioModel& model, double t, std::int64_t offset);

/// Least-squares slope over the most recent `window` samples (rate per
/// second). Throws if fewer than two distinct-time samples are available.
double estimate_derivative(const std::vector<RateSample>& samples, std::size_t window = 5);

/// Linear extrapolation current_rate + derivative * horizon, floored at 0.
double forecast(double current_rate, double derivative, double horizon);

} // namespace adsim

#endif
