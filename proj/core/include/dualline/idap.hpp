#pragma once

#include "dualline/tensor.hpp"

#include <cstdint>

namespace dualline {

// Batch of token embeddings, stored as a (B,N,D) tensor.
struct TokenSequence {
    Tensor data;

    TokenSequence() = default;
    explicit TokenSequence(Tensor t);

    std::size_t batch() const { return data.dim(0); }
    std::size_t length() const { return data.dim(1); }
    std::size_t dim() const { return data.dim(2); }
};

// Seeded (K,D) query matrix drawn from a standard normal. Regeneration from
// the same (K, D, seed) triple is bitwise identical; Q is never trained.
struct QueryBank {
    std::size_t k = 0;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    Tensor q;  // (K,D)
};

QueryBank init_query_bank(std::size_t k, std::size_t d, std::uint64_t seed);

// Scores S = t_id * Q^T in (B,N,K), softmax-normalized over the token axis.
// Reductions over N use canonical (sorted) summation so the result is
// bitwise invariant under permutations of the token axis.
Tensor attention_weights(const TokenSequence& t_id, const QueryBank& qb);

// (B,K,D) aggregate: out[b,k,:] = sum_n weights[b,n,k] * t_id[b,n,:].
// Every output coordinate lies within the per-coordinate range of the
// input tokens up to rounding.
Tensor aggregate(const TokenSequence& t_id, const QueryBank& qb);

// Concatenates the aggregate in front of the semantic tokens. The semantic
// tokens are preserved bitwise; aggregated may have K = 0.
TokenSequence prepend(const Tensor& aggregated, const TokenSequence& t_semantic);

}  // namespace dualline
