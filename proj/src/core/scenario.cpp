#include "core/scenario.hpp"

#include <cmath>
#include <stdexcept>

namespace adsim {

double flow_rate_at(const ScenarioModel& model, double t) {
    return model.saturation / (1.0 + std::exp(-(t - model.midpoint)));
}

double feature_rate_at(const ScenarioModel& model, double t, std::int64_t offset) {
    if (offset < 1) throw std::invalid_argument("offset must be >= 1");
    return flow_rate_at(model, t) / static_cast<double>(offset);
}

double estimate_derivative(const std::vector<RateSample>& samples, std::size_t window) {
    std::size_t n = std::min(window, samples.size());
    if (n < 2) throw std::invalid_argument("derivative needs at least 2 samples");
    std::size_t begin = samples.size() - n;

    // Center times before accumulating so the fit is independent of the
    // absolute time origin.
    double t0 = samples[begin].t;
    double sum_t = 0.0, sum_r = 0.0;
    for (std::size_t i = begin; i < samples.size(); ++i) {
        sum_t += samples[i].t - t0;
        sum_r += samples[i].rate;
    }
    double mean_t = sum_t / static_cast<double>(n);
    double mean_r = sum_r / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = begin; i < samples.size(); ++i) {
        double dt = (samples[i].t - t0) - mean_t;
        sxx += dt * dt;
        sxy += dt * (samples[i].rate - mean_r);
    }
    if (sxx == 0.0) throw std::invalid_argument("derivative needs samples at distinct times");
    return sxy / sxx;
}

double forecast(double current_rate, double derivative, double horizon) {
    if (horizon < 0.0) throw std::invalid_argument("horizon must be >= 0");
    double r = current_rate + derivative * horizon;
    return r < 0.0 ? 0.0 : r;
}

} // namespace adsim
