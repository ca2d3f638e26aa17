#pragma once

#include "dualline/tensor.hpp"

namespace dualline {

// Branch indices on the decision axis. lambda indices follow suit:
// lambda_semantic scales branch 0, lambda_identity scales branch 1, and
// argmax ties resolve to the semantic branch.
inline constexpr std::size_t kSemanticBranch = 0;
inline constexpr std::size_t kIdentityBranch = 1;

struct FusionConfig {
    double lambda_semantic = 1.0;
    double lambda_identity = 5.0;
    std::size_t pool_factor = 4;
    // Channel count of the intermediate reshape; 0 means "use C".
    std::size_t c_mid = 0;
};

struct FusionReport {
    Tensor fused;              // (B,C,H,W)
    IndexTensor decision_mask; // (B,C,H,W), 0 = semantic, 1 = identity
    double identity_fraction = 0.0;
};

// Stacks the two branch noises along a fresh leading decision axis:
// slice 0 = semantic, slice 1 = identity.
Tensor build_stack(const Tensor& eps_semantic, const Tensor& eps_identity);

// Per-branch nonnegative per-pixel saliency: |stack| -> reshape to
// (-1, c_mid, H, W) -> smooth each (H,W) slice -> mean over channels.
// stack is (2,B,C,H,W); result is (2,B,H,W).
Tensor saliency(const Tensor& stack, const FusionConfig& cfg);

// Per-branch scaled softmax over the H*W pixels of each batch item.
// sal and result are (2,B,H,W); each (branch, batch) map sums to 1.
Tensor branch_weights(const Tensor& sal, const FusionConfig& cfg);

// Full fusion: stack -> saliency -> weights -> per-pixel argmax across the
// branch axis (broadcast over channels) -> gather.
FusionReport fuse(const Tensor& eps_semantic, const Tensor& eps_identity,
                  const FusionConfig& cfg);

// Same contract as fuse, implemented with explicit scalar loops and none of
// the shared tensor kernels.
FusionReport fuse_reference(const Tensor& eps_semantic, const Tensor& eps_identity,
                            const FusionConfig& cfg);

}  // namespace dualline
