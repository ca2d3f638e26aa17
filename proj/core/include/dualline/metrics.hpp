#pragma once

#include "dualline/pipeline.hpp"
#include "dualline/tensor.hpp"

#include <cstdint>
#include <string>

namespace dualline {

// Centered cosine between the face-region crop of the sample and the
// target identity signature. 0 when either side has no energy.
double identity_score(const Tensor& sample, const ToyWorld& world, std::size_t identity);

// Same, over the out-of-face content against the target scene template.
double semantic_score(const Tensor& sample, const ToyWorld& world, std::size_t scene);

// One sweep cell result. CSV columns are fixed:
// run_id, cell, seed, identity_score, semantic_score, identity_fraction.
struct MetricsRow {
    std::string run_id;
    std::string cell;  // lambda ratio, M value, or ablation arm
    std::uint64_t seed = 0;
    double identity_score = 0.0;
    double semantic_score = 0.0;
    double identity_fraction = 0.0;
};

}  // namespace dualline
