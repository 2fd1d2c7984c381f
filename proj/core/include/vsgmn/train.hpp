#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vsgmn/dataset.hpp"
#include "vsgmn/gbn.hpp"
#include "vsgmn/gmn.hpp"
#include "vsgmn/losses.hpp"
#include "vsgmn/optimizer.hpp"

namespace vsgmn {

// Ablation presets; `full` is the default model. Rows cut the pipeline down
// feature by feature: graph matching, the virtual-column mask (um) and the
// cross-graph difference message (cg). `crc_only` keeps the relation
// consistency term but computes it on the raw first-order graphs without any
// match layers.
enum class Ablation {
  baseline,
  crc_only,
  graph_match,
  graph_match_um,
  graph_match_cg,
  full,
};

// Candidate pool of the classification term.
enum class AcePool { seen, all };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 0;  // 0: one instance of every seen class
  std::size_t top_k = 2;       // seen neighbors per virtual feature
  std::size_t layers = 2;
  LayerVariant variant = LayerVariant::attention;
  double temperature = 10.0;
  double cross_weight = 1.0;
  LossWeights weights;
  SgdConfig optimizer;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 0;  // 0: 4 * attribute_dim
  double gamma = 1.0;          // calibration scale of the +-1 indicator (gzsl)
  bool graph_match_enabled = true;
  bool mask_enabled = true;
  bool cross_graph_enabled = true;
  AcePool ace_pool = AcePool::seen;

  void apply_ablation(Ablation ablation);
  void validate() const;  // ConfigError on out-of-range values
};

Ablation ablation_from_string(const std::string& name);
std::string to_string(Ablation ablation);
LayerVariant variant_from_string(const std::string& name);
std::string to_string(LayerVariant variant);

struct EpochLoss {
  double ace = 0, reg = 0, sc = 0, crc = 0, total = 0;
};

// Everything trained plus the frozen preprocessing byproducts needed to
// score new feature rows.
struct VsgmnModel {
  TrainConfig config;
  std::size_t feature_dim = 0;
  std::size_t attribute_dim = 0;
  std::vector<int> seen_classes;
  std::vector<int> unseen_classes;
  SemanticPrototypeSet semantics;
  Tensor virtual_features;  // one row per unseen class; may be 0 x F
  std::unique_ptr<MlpEmbedding> embedding;
  std::vector<GraphMatchLayer> layers;
  bool trained = false;

  // Relation consistency needs the assembled graphs; without it neither the
  // virtual rows nor the match layers can influence any gradient.
  bool uses_relation_consistency() const { return config.weights.crc > 0.0; }
  bool uses_virtual_nodes() const { return uses_relation_consistency(); }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

// Seeded model assembly: preprocessing (prototype standardization, visual
// prototypes, virtual features) plus freshly initialized weights.
VsgmnModel build_model(const ZslDataset& ds, const TrainConfig& config);

// One differentiable pass over a batch: embeddings, losses, total.
// Exposed separately so gradient checking can re-run it under perturbed
// parameters.
struct ForwardResult {
  BoundParams bound;
  Var embeddings;  // all batch rows
  LossBreakdown breakdown;
  Var total;
};

ForwardResult forward_batch(VsgmnModel& model, Tape& tape, const Batch& batch);

// Builds the batch for a sampled index list (features + virtual rows).
Batch make_batch(const VsgmnModel& model, const ZslDataset& ds,
                 const std::vector<std::size_t>& instance_indices);

// Full training loop over `model.config.epochs`; returns one loss row per
// epoch (per-batch means). Throws DivergenceError when a loss term leaves
// the finite range.
std::vector<EpochLoss> train(VsgmnModel& model, const ZslDataset& ds);

// build_model + train in one call.
VsgmnModel train_model(const ZslDataset& ds, const TrainConfig& config,
                       std::vector<EpochLoss>* trace = nullptr);

// JSON snapshot of a model (config, preprocessing products, weights).
// Doubles survive the round trip bit-exactly.
void save_model(const VsgmnModel& model, const std::filesystem::path& path);
VsgmnModel load_model(const std::filesystem::path& path);

}  // namespace vsgmn
