#pragma once

#include <vector>

namespace dualline {

// Variance-preserving schedule: linear betas over base_steps, cumulative
// alpha_bar, and a decreasing subsequence of base indices visited during
// sampling (most noise first).
struct NoiseSchedule {
    int base_steps = 1000;
    int sample_steps = 50;
    std::vector<double> betas;
    std::vector<double> alpha_bar;
    std::vector<int> step_indices;

    static NoiseSchedule make(int base_steps = 1000, int sample_steps = 50);

    double alpha_bar_at(int t_base) const;
};

}  // namespace dualline
