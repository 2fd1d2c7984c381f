#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vsgmn/tensor.hpp"

namespace vsgmn {

// A zero-shot recognition dataset: per-instance features, integer class
// labels, one semantic prototype row per class, and a seen/unseen class split
// with disjoint train/test instance lists. Class ids are dense 0..C-1; row c
// of `prototypes` belongs to class c.
struct ZslDataset {
  Tensor features;    // N x F
  std::vector<int> labels;  // N entries in [0, C)
  Tensor prototypes;  // C x K, raw attribute values
  std::vector<int> seen_classes;    // ascending
  std::vector<int> unseen_classes;  // ascending
  std::vector<std::size_t> train_instances;
  std::vector<std::size_t> test_instances;

  std::size_t num_instances() const { return labels.size(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t attribute_dim() const { return prototypes.cols(); }
  std::size_t num_classes() const { return prototypes.rows(); }
  bool is_seen(int cls) const;

  // Structural invariants: disjoint exhaustive class split, labels in range,
  // train instances all seen, train/test disjoint and in range. Throws
  // ValidationError listing offending rows/classes.
  void validate() const;
};

// Reads features.csv, labels.csv, prototypes.csv (headerless numeric CSV)
// and split.json from `dir`, then validates. Missing file -> IngestionError;
// malformed number or ragged row -> ParseError with file:line.
ZslDataset load_dataset(const std::filesystem::path& dir);

// Inverse of load_dataset: doubles are written with shortest round-trip
// formatting, so save -> load reproduces values bit-exactly.
void write_dataset(const ZslDataset& ds, const std::filesystem::path& dir);

struct SyntheticConfig {
  std::size_t seen_classes = 15;
  std::size_t unseen_classes = 5;
  std::size_t attribute_dim = 12;  // K
  std::size_t feature_dim = 32;    // F
  std::size_t samples_per_class = 30;
  double noise_scale = 0.1;
  double train_fraction = 0.8;  // of each seen class's samples
  std::uint64_t seed = 0;
};

// Draws unit-sphere prototypes z_c, a shared linear map M (entries N(0,1)),
// and instances x = M z_c + noise_scale * N(0, I). Classes 0..C_s-1 are seen,
// the rest unseen; unseen instances are all test. Deterministic in the seed.
ZslDataset generate_synthetic_dataset(const SyntheticConfig& cfg);

// Raw prototypes plus the two derived forms the pipeline consumes. The
// standardization statistics come from seen-class rows only, with population
// variance; constant columns map to exactly 0.
struct SemanticPrototypeSet {
  Tensor raw;           // C x K
  Tensor standardized;  // C x K
  Tensor normalized;    // standardized rows, L2-normalized
};

SemanticPrototypeSet standardize_prototypes(
    const Tensor& raw, const std::vector<int>& seen_classes);

// One training batch after virtual-node assembly: n_real sampled seen-class
// rows followed by n_virtual synthesized unseen-class rows.
struct Batch {
  Tensor rows;                // (n_real + n_virtual) x F
  std::vector<int> class_ids;  // per row
  std::size_t n_real = 0;
  std::size_t n_virtual = 0;
  std::size_t size() const { return n_real + n_virtual; }
};

// Seeded epoch sampler that never places two instances of the same class in
// one batch. Every training instance appears exactly once per epoch; the
// final batches may be smaller than batch_size. Distinct (seed, epoch) pairs
// reshuffle; the same pair replays identically.
class BalancedBatchSampler {
 public:
  BalancedBatchSampler(const ZslDataset& ds, std::size_t batch_size,
                       std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch(std::uint64_t epoch_index) const;

  std::size_t batch_size() const { return batch_size_; }

 private:
  std::vector<std::vector<std::size_t>> per_class_;  // train indices by class
  std::size_t batch_size_ = 0;
  std::uint64_t seed_ = 0;
};

}  // namespace vsgmn
