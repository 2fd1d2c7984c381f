#pragma once

#include <optional>
#include <vector>

#include "vsgmn/gmn.hpp"
#include "vsgmn/tape.hpp"

namespace vsgmn {

// Weights of the regularization, self-calibration and relation-consistency
// terms; the classification term always carries weight 1.
struct LossWeights {
  double reg = 0.5;
  double sc = 0.1;
  double crc = 0.01;
};

// Mean squared distance between each embedded row and its class's
// standardized prototype row: (1/n) * sum_i |s_i - z_i|^2.
Var loss_reg(Tape& tape, const Var& embeddings, const Tensor& prototype_rows);

// Cross-entropy over the candidate pool: softmax of s_i . z^c across pool
// columns, evaluated at the true class. `labels` must all appear in
// `pool_classes` (ContractError).
Var loss_ace(Tape& tape, const Var& embeddings, const std::vector<int>& labels,
             const Tensor& pool_prototypes,
             const std::vector<int>& pool_classes);

// Self-calibration: softmax over every class of s_i . z^c + ind(c), where
// ind is +1 on unseen classes and -1 on seen ones; the loss is the negative
// log of the probability mass landing on the unseen set. Both class subsets
// must be non-empty (ConfigError).
Var loss_sc(Tape& tape, const Var& embeddings, const Tensor& all_prototypes,
            const std::vector<int>& unseen_classes);

// sum_ij p_ij * (log p_ij - log q_ij) over row-stochastic matrices.
Var kl_divergence_rows(const Var& p, const Var& q);

// Relation-consistency: KL(semantic || visual) of every layer's relation
// distributions, summed over layers and scaled by 1 / node count.
Var loss_crc(const std::vector<DistributionPair>& distributions,
             std::size_t node_count);

// Weighted total. Absent optional terms contribute nothing; zero-weighted
// terms are dropped from the graph entirely. Any provided term with a
// non-finite value throws DivergenceError naming it.
struct LossBreakdown {
  Var ace;
  std::optional<Var> reg;
  std::optional<Var> sc;
  std::optional<Var> crc;
};

Var loss_total(const LossBreakdown& terms, const LossWeights& weights);

}  // namespace vsgmn
