#pragma once

#include <memory>
#include <random>
#include <string_view>

#include "vsgmn/dataset.hpp"
#include "vsgmn/optimizer.hpp"
#include "vsgmn/tape.hpp"

namespace vsgmn {

// Mean training feature vector per seen class, rows in seen-class order.
struct VisualPrototypeTable {
  Tensor prototypes;           // C_s x F
  std::vector<int> class_ids;  // ascending seen classes
  std::vector<std::size_t> counts;
};

// Requires every seen class to own >= 1 training instance (DatasetError).
VisualPrototypeTable compute_visual_prototypes(const ZslDataset& ds);

// One synthesized feature row per unseen class (rows in unseen-class order):
// the mean of the top_k visual prototypes whose raw semantic prototypes are
// most cosine-similar to the unseen class's raw prototype. Ties broken by
// lower seen-class id; top_k is clamped to the number of seen classes.
Tensor generate_virtual_unseen_features(const VisualPrototypeTable& visual,
                                        const SemanticPrototypeSet& semantics,
                                        const std::vector<int>& unseen_classes,
                                        std::size_t top_k);

// Stacks sampled seen-class rows on top of the virtual unseen rows, tagging
// each row with its class id. `virtual_rows` may be empty (0 x F).
Batch assemble_batch(const Tensor& sample_rows,
                     const std::vector<int>& sample_labels,
                     const Tensor& virtual_rows,
                     const std::vector<int>& unseen_classes);

// Maps feature rows into semantic space. Implementations own their
// parameters and must place them through `bound` so callers can read
// gradients back and update weights.
class EmbeddingNetwork {
 public:
  virtual ~EmbeddingNetwork() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual Var forward(Tape& tape, const Var& rows, BoundParams& bound) = 0;
  // Inference-only pass without tape bookkeeping; same arithmetic.
  virtual Tensor forward_plain(const Tensor& rows) const = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<const Parameter*> parameters() const = 0;
};

// Single hidden layer with relu, or a bare affine map when hidden_dim == 0.
// Weights draw from N(0, 1/sqrt(fan_in)); biases start at zero.
class MlpEmbedding final : public EmbeddingNetwork {
 public:
  MlpEmbedding(std::size_t input_dim, std::size_t hidden_dim,
               std::size_t output_dim, std::mt19937_64& rng);

  // Affine identity map (W = I, b = 0); handy for tests.
  static std::unique_ptr<MlpEmbedding> identity(std::size_t dim);

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t output_dim() const override { return output_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  Var forward(Tape& tape, const Var& rows, BoundParams& bound) override;
  Tensor forward_plain(const Tensor& rows) const override;
  std::vector<Parameter*> parameters() override;
  std::vector<const Parameter*> parameters() const override;

 private:
  std::size_t input_dim_ = 0, hidden_dim_ = 0, output_dim_ = 0;
  std::vector<Parameter> params_;  // w1,b1,w2,b2 or w,b
};

// Embeds every batch row; checks the batch's feature width (DimensionError).
Var embed(EmbeddingNetwork& net, Tape& tape, const Batch& batch,
          BoundParams& bound);

// The two node sets and their first-order structure. Adjacency matrices are
// Gram matrices of L2-normalized rows, so they are symmetric with unit
// diagonal. `adjacency_visual` keeps gradients; the semantic side is a
// constant. When a virtual-node mask is applied, columns of virtual rows in
// the visual adjacency are zeroed so virtual embeddings cannot influence the
// visual branch.
struct BuiltGraphs {
  Var visual_nodes;        // (n_real + n_virtual) x K embeddings
  Var semantic_nodes;      // matching standardized prototype rows (constant)
  Var adjacency_visual;    // masked when mask_virtual is set
  Var adjacency_semantic;  // constant
  std::size_t n_real = 0;
  std::size_t n_virtual = 0;
  std::size_t size() const { return n_real + n_virtual; }
};

// `embeddings` are the batch's embedded rows; `prototype_rows` the
// standardized semantic prototypes matched per batch row.
BuiltGraphs build_graphs(Tape& tape, const Var& embeddings,
                         const Tensor& prototype_rows, std::size_t n_real,
                         std::size_t n_virtual, bool mask_virtual);

// 0/1 mask that zeroes the columns of virtual rows in an n x n adjacency.
Tensor virtual_column_mask(std::size_t n_real, std::size_t n_virtual);

}  // namespace vsgmn
