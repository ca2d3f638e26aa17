#pragma once

#include "dualline/idaf.hpp"
#include "dualline/idap.hpp"
#include "dualline/mixture.hpp"
#include "dualline/schedule.hpp"
#include "dualline/tensor.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dualline {

struct SeedBundle {
    std::uint64_t world = 1;
    std::uint64_t query = 2;
    std::uint64_t noise = 3;
};

// Axis-aligned block, half-open in both directions.
struct FaceRegion {
    std::size_t top = 2;
    std::size_t bottom = 8;
    std::size_t left = 5;
    std::size_t right = 11;

    std::size_t rows() const { return bottom - top; }
    std::size_t cols() const { return right - left; }
    bool contains(std::size_t r, std::size_t c) const {
        return r >= top && r < bottom && c >= left && c < right;
    }
};

// All sampler / fusion / aggregation hyperparameters plus seeds. Defaults
// are the reference operating point; parse_config()/emit_config() in
// config.hpp serialize exactly these fields.
struct PipelineConfig {
    int base_steps = 1000;
    int steps = 50;
    int m1 = 10;  // IdAF gate: fusion active for progress t > m1
    int m2 = 15;  // IdAP gate: aggregated conditioning for t > m2
    double guidance_semantic = 5.0;
    double guidance_identity = 5.0;
    FusionConfig fusion;
    std::size_t agg_tokens = 8;    // K
    std::size_t token_count = 16;  // N
    std::size_t token_dim = 16;    // D
    double distractor_rms = 0.3;
    std::size_t target_identity = 0;
    std::size_t target_scene = 0;
    std::size_t channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t num_scenes = 4;
    std::size_t num_identities = 12;
    FaceRegion face;
    double sigma0_sq = 0.0025;
    std::size_t enlarge_factor = 0;  // 0 = largest factor that fits the frame
    double idap_bias = 1.25;   // log-odds tilt of the switched identity prior
    double id_variance = 1.5;  // variance of the close-up world's components
    bool closeup_fill = false;  // close-up fills the frame vs. enlarged block only
    SeedBundle seeds;

    void validate() const;
};

// Procedurally seeded stand-in for reference images and scene prompts.
// Scene templates are zero inside the face region, identity signatures are
// zero outside it, and both are centered and RMS-normalized over their
// support so the cosine scores in metrics.hpp are well-posed.
struct ToyWorld {
    std::size_t channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    FaceRegion face;
    double variance = 0.0025;
    std::size_t enlarge_factor = 2;
    std::vector<Tensor> templates;   // per scene, (C,H,W)
    std::vector<Tensor> signatures;  // per identity, (C,H,W)

    std::size_t num_scenes() const { return templates.size(); }
    std::size_t num_identities() const { return signatures.size(); }
};

// The data laws driving the two inference lines. Each line runs CFG
// against its own generator's unconditional: the identity line against the
// close-up world, the semantic line against the all-pairs world.
struct BranchMixtures {
    GaussianMixture id_branch;         // close-up analog of the target identity
    GaussianMixture id_uncond;         // close-up world, uniform over identities
    GaussianMixture semantic_plain;    // target scene, uniform over identities
    GaussianMixture semantic_with_id;  // target scene, prior tilted to the target
    GaussianMixture uncond;            // uniform over all (scene, identity) pairs
};

struct TokenPair {
    TokenSequence id;
    TokenSequence semantic;
};

struct StepRecord {
    int step = 0;
    int t_base = 0;
    double alpha_bar = 0.0;
    bool idap_active = false;
    bool idaf_active = false;
    double identity_fraction = 0.0;
};

struct RunResult {
    Tensor sample;  // (C,H,W)
    std::vector<StepRecord> trace;
    std::optional<std::size_t> decoded_identity;
    IndexTensor last_mask;  // (1,C,H,W); valid when has_last_mask
    bool has_last_mask = false;

    double mean_identity_fraction() const;  // over fusion-active steps, 0 if none
};

ToyWorld build_world(const PipelineConfig& cfg);

// The spatially enlarged, frame-centered rendition of one identity
// signature on a zero background.
Tensor closeup_mean(const ToyWorld& world, std::size_t identity);
Tensor closeup_mean(const ToyWorld& world, std::size_t identity, bool fill_frame);

BranchMixtures build_branch_mixtures(const ToyWorld& world, std::size_t target_identity,
                                     std::size_t target_scene, double idap_bias,
                                     double id_variance, bool closeup_fill);
GaussianMixture semantic_with_identity(const ToyWorld& world, std::size_t scene,
                                       std::size_t identity, double bias);

// Deterministic token codec replacing the image/text encoders: identity k
// is embedded redundantly across token_count tokens as basis direction k
// plus seeded distractor noise; scenes use basis directions offset by the
// identity count.
TokenPair encode_tokens(const ToyWorld& world, std::size_t identity, std::size_t scene,
                        const PipelineConfig& cfg);

// Mean-pools the aggregated tokens, projects onto the identity embedding
// directions, and returns the argmax; nullopt when the top-2 margin is
// below 1e-6.
std::optional<std::size_t> decode_identity(const Tensor& aggregated, const ToyWorld& world);

RunResult run_dual_line(const ToyWorld& world, const PipelineConfig& cfg);
RunResult run_dual_line(const ToyWorld& world, const PipelineConfig& cfg,
                        const BranchMixtures& mixtures);

}  // namespace dualline
