#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dualline {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Every tensor kernel against its loop reference on randomized instances
// (shapes up to rank 5, dims <= 8): exact for index/select ops, 1e-12
// relative for arithmetic ops.
std::vector<CheckResult> run_kernel_oracle_suite(int trials_per_op, std::uint64_t seed);

// fuse vs fuse_reference on randomized (B<=2, C=3, H=W=16) instances across
// lambda in {1,3,5,7} and pool_factor in {1,2,4}: masks exact, values
// bitwise.
std::vector<CheckResult> run_fusion_equivalence_suite(int trials, std::uint64_t seed);

// eps_predict against -sqrt(1-alpha_bar) * finite-difference grad log p_t
// (central differences, h = 1e-4, rel err <= 1e-4) for 1-4 component
// mixtures at random (x_t, t) points.
std::vector<CheckResult> run_score_consistency_suite(int points, std::uint64_t seed);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace dualline
