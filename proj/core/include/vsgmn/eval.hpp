#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsgmn/train.hpp"

namespace vsgmn {

// czsl restricts candidates to unseen classes and scores only unseen-labeled
// test instances; gzsl ranks every class over every test instance, with the
// calibration offset `gamma` added to unseen-class scores.
enum class EvalMode { czsl, gzsl };

EvalMode eval_mode_from_string(const std::string& name);
std::string to_string(EvalMode mode);

// 2su / (s + u); defined as 0 when both accuracies are 0.
double harmonic_mean(double seen_acc, double unseen_acc);

struct GzslMetrics {
  double acc_czsl = 0;    // macro accuracy over unseen classes (czsl)
  double seen_acc = 0;    // macro accuracy over seen classes (gzsl)
  double unseen_acc = 0;  // macro accuracy over unseen classes (gzsl)
  double harmonic = 0;
  std::map<int, double> per_class_acc;
};

// Class prediction per feature row: argmax over the candidate pool of the
// embedded row's dot product with the class's standardized prototype plus a
// calibration term gamma * (+1 unseen / -1 seen) in gzsl mode. Ties resolve
// to the lower class id. The model must be trained (ContractError).
std::vector<int> predict(const VsgmnModel& model, const Tensor& feature_rows,
                         EvalMode mode, double gamma);

struct EvalResult {
  GzslMetrics metrics;
  std::vector<std::size_t> instances;  // scored test instances
  std::vector<int> true_labels;
  std::vector<int> predicted;
};

// Scores the dataset's test instances and reports macro (per-class mean)
// accuracies. Classes without test instances are skipped with a log note.
EvalResult evaluate(const VsgmnModel& model, const ZslDataset& ds,
                    EvalMode mode, double gamma);

// --- hyperparameter sweep -----------------------------------------------------

// Ordered (key -> candidate values) lists; cells are their Cartesian product
// with the last key cycling fastest.
using SweepGrid = std::vector<std::pair<std::string, std::vector<std::string>>>;
using SweepOverrides = std::vector<std::pair<std::string, std::string>>;

std::vector<SweepOverrides> expand_grid(const SweepGrid& grid);

struct SweepCellResult {
  std::size_t index = 0;  // position in the expanded grid
  SweepOverrides overrides;
  double czsl_acc = 0;
  GzslMetrics gzsl;
  bool failed = false;
  std::string error;
};

// Ran per worker thread after a cell trains, e.g. to persist artifacts.
using SweepCellObserver = std::function<void(
    const SweepCellResult& result, const VsgmnModel& model,
    const std::vector<EpochLoss>& trace)>;
// Lets callers skip a cell (resume) by supplying its cached result.
using SweepCellCache =
    std::function<std::optional<SweepCellResult>(std::size_t index,
                                                 const TrainConfig& config)>;

// Trains and evaluates every cell (config = base + overrides) across `jobs`
// worker threads. A failing cell is recorded, not fatal. Results come back
// sorted by harmonic mean, then czsl accuracy, then cell index.
std::vector<SweepCellResult> sweep(const ZslDataset& ds,
                                   const TrainConfig& base,
                                   const SweepGrid& grid, std::size_t jobs,
                                   const SweepCellCache& cache = {},
                                   const SweepCellObserver& observer = {});

}  // namespace vsgmn
