#include "dualline/schedule.hpp"

#include <stdexcept>
#include <string>

namespace dualline {

namespace {
constexpr double kBetaStart = 1e-4;
constexpr double kBetaEnd = 0.02;
}  // namespace

NoiseSchedule NoiseSchedule::make(int base_steps, int sample_steps) {
    if (base_steps < 2) throw std::invalid_argument("schedule: base_steps must be >= 2");
    if (sample_steps < 1 || sample_steps > base_steps) {
        throw std::invalid_argument("schedule: sample_steps must be in [1, base_steps]");
    }

    NoiseSchedule s;
    s.base_steps = base_steps;
    s.sample_steps = sample_steps;
    s.betas.resize(static_cast<std::size_t>(base_steps));
    s.alpha_bar.resize(static_cast<std::size_t>(base_steps));

    double cum = 1.0;
    for (int i = 0; i < base_steps; ++i) {
        const double beta =
            kBetaStart + (kBetaEnd - kBetaStart) * static_cast<double>(i) /
                             static_cast<double>(base_steps - 1);
        s.betas[static_cast<std::size_t>(i)] = beta;
        cum *= 1.0 - beta;
        s.alpha_bar[static_cast<std::size_t>(i)] = cum;
    }

    // Uniformly spaced base indices, visited from the noisiest down. For
    // (1000, 50) this is 980, 960, ..., 20, 0.
    s.step_indices.resize(static_cast<std::size_t>(sample_steps));
    for (int i = 0; i < sample_steps; ++i) {
        const long long j = static_cast<long long>(sample_steps) - 1 - i;
        s.step_indices[static_cast<std::size_t>(i)] =
            static_cast<int>(j * base_steps / sample_steps);
    }
    return s;
}

double NoiseSchedule::alpha_bar_at(int t_base) const {
    if (t_base < 0 || t_base >= base_steps) {
        throw std::invalid_argument("schedule: base index " + std::to_string(t_base) +
                                    " out of range [0, " + std::to_string(base_steps) + ")");
    }
    return alpha_bar[static_cast<std::size_t>(t_base)];
}

}  // namespace dualline
