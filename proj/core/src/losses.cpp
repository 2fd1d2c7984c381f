#include "vsgmn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "vsgmn/errors.hpp"

namespace vsgmn {

Var loss_reg(Tape& tape, const Var& embeddings, const Tensor& prototype_rows) {
  require_same_shape(embeddings.value(), prototype_rows, "loss_reg");
  if (embeddings.value().rows() == 0) {
    throw ContractError("loss_reg: empty batch");
  }
  const Var diff = sub(embeddings, tape.leaf(prototype_rows));
  const double inv_n = 1.0 / static_cast<double>(embeddings.value().rows());
  return scalar_mul(sum(mul(diff, diff)), inv_n);
}

Var loss_ace(Tape& tape, const Var& embeddings, const std::vector<int>& labels,
             const Tensor& pool_prototypes,
             const std::vector<int>& pool_classes) {
  const std::size_t n = embeddings.value().rows();
  if (n == 0) throw ContractError("loss_ace: empty batch");
  if (labels.size() != n) {
    throw ContractError("loss_ace: " + std::to_string(n) + " rows but " +
                        std::to_string(labels.size()) + " labels");
  }
  if (pool_prototypes.rows() != pool_classes.size()) {
    throw ContractError("loss_ace: pool of " +
                        std::to_string(pool_prototypes.rows()) +
                        " prototypes but " +
                        std::to_string(pool_classes.size()) + " class ids");
  }
  if (pool_prototypes.cols() != embeddings.value().cols()) {
    throw DimensionError("loss_ace: embeddings " +
                         embeddings.value().shape_str() + " and pool " +
                         pool_prototypes.shape_str() + " differ in width");
  }

  Tensor one_hot({n, pool_classes.size()});
  for (std::size_t i = 0; i < n; ++i) {
    const auto it =
        std::find(pool_classes.begin(), pool_classes.end(), labels[i]);
    if (it == pool_classes.end()) {
      throw ContractError("loss_ace: label " + std::to_string(labels[i]) +
                          " is not in the candidate pool");
    }
    one_hot(i, static_cast<std::size_t>(it - pool_classes.begin())) = 1.0;
  }

  const Var logits = matmul(embeddings, transpose(tape.leaf(pool_prototypes)));
  const Var log_probs = row_log_softmax(logits);
  const double inv_n = -1.0 / static_cast<double>(n);
  return scalar_mul(sum(mul(log_probs, tape.leaf(std::move(one_hot)))), inv_n);
}

Var loss_sc(Tape& tape, const Var& embeddings, const Tensor& all_prototypes,
            const std::vector<int>& unseen_classes) {
  const std::size_t n = embeddings.value().rows();
  const std::size_t c = all_prototypes.rows();
  if (n == 0) throw ContractError("loss_sc: empty batch");
  if (unseen_classes.empty() || unseen_classes.size() >= c) {
    throw ConfigError("loss_sc: needs non-empty seen and unseen class sets (" +
                      std::to_string(unseen_classes.size()) + " unseen of " +
                      std::to_string(c) + ")");
  }
  Tensor indicator({c});
  Tensor unseen_pick({c, 1});
  for (std::size_t j = 0; j < c; ++j) indicator[j] = -1.0;
  for (int cls : unseen_classes) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= c) {
      throw ContractError("loss_sc: unseen class " + std::to_string(cls) +
                          " out of range for " + all_prototypes.shape_str());
    }
    indicator[static_cast<std::size_t>(cls)] = 1.0;
    unseen_pick(static_cast<std::size_t>(cls), 0) = 1.0;
  }

  const Var logits =
      add_row_broadcast(matmul(embeddings, transpose(tape.leaf(all_prototypes))),
                        tape.leaf(std::move(indicator)));
  const Var probs = exp(row_log_softmax(logits));
  const Var unseen_mass = matmul(probs, tape.leaf(std::move(unseen_pick)));
  const double inv_n = -1.0 / static_cast<double>(n);
  return scalar_mul(sum(log(unseen_mass)), inv_n);
}

Var kl_divergence_rows(const Var& p, const Var& q) {
  require_same_shape(p.value(), q.value(), "kl_divergence_rows");
  constexpr double kTol = 1e-9;
  for (const Var* dist : {&p, &q}) {
    const Tensor& v = dist->value();
    for (std::size_t i = 0; i < v.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v.cols(); ++j) s += v(i, j);
      if (std::abs(s - 1.0) > kTol) {
        throw ContractError("kl_divergence_rows: row " + std::to_string(i) +
                            " sums to " + std::to_string(s) +
                            ", not a distribution");
      }
    }
  }
  return sum(mul(p, sub(log(p), log(q))));
}

Var loss_crc(const std::vector<DistributionPair>& distributions,
             std::size_t node_count) {
  if (distributions.empty()) {
    throw ContractError("loss_crc: no relation distributions");
  }
  if (node_count == 0) throw ContractError("loss_crc: zero node count");
  Var total;
  for (const DistributionPair& pair : distributions) {
    const Var kl = kl_divergence_rows(pair.semantic, pair.visual);
    total = total.valid() ? add(total, kl) : kl;
  }
  return scalar_mul(total, 1.0 / static_cast<double>(node_count));
}

Var loss_total(const LossBreakdown& terms, const LossWeights& weights) {
  if (!terms.ace.valid()) throw ContractError("loss_total: missing ace term");
  const auto check_finite = [](const Var& v, const char* name) {
    if (!v.value().all_finite()) {
      throw DivergenceError(std::string("loss term '") + name +
                            "' is not finite");
    }
  };
  check_finite(terms.ace, "ace");
  if (terms.reg) check_finite(*terms.reg, "reg");
  if (terms.sc) check_finite(*terms.sc, "sc");
  if (terms.crc) check_finite(*terms.crc, "crc");

  Var total = terms.ace;
  if (terms.reg && weights.reg != 0.0) {
    total = add(total, scalar_mul(*terms.reg, weights.reg));
  }
  if (terms.sc && weights.sc != 0.0) {
    total = add(total, scalar_mul(*terms.sc, weights.sc));
  }
  if (terms.crc && weights.crc != 0.0) {
    total = add(total, scalar_mul(*terms.crc, weights.crc));
  }
  check_finite(total, "total");
  return total;
}

}  // namespace vsgmn
