#include "vsgmn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <thread>

#include "vsgmn/config.hpp"
#include "vsgmn/errors.hpp"
#include "vsgmn/log.hpp"

namespace vsgmn {

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "czsl") return EvalMode::czsl;
  if (name == "gzsl") return EvalMode::gzsl;
  throw ConfigError("unknown mode '" + name + "' (expected czsl|gzsl)");
}

std::string to_string(EvalMode mode) {
  return mode == EvalMode::czsl ? "czsl" : "gzsl";
}

double harmonic_mean(double seen_acc, double unseen_acc) {
  const double denom = seen_acc + unseen_acc;
  if (denom <= 0.0) return 0.0;
  return 2.0 * seen_acc * unseen_acc / denom;
}

std::vector<int> predict(const VsgmnModel& model, const Tensor& feature_rows,
                         EvalMode mode, double gamma) {
  if (!model.trained) {
    throw ContractError("predict: model has not been trained");
  }
  if (feature_rows.rank() != 2 ||
      feature_rows.cols() != model.feature_dim) {
    throw DimensionError("predict: rows " + feature_rows.shape_str() +
                         " do not match feature width " +
                         std::to_string(model.feature_dim));
  }
  const Tensor embedded = model.embedding->forward_plain(feature_rows);
  const Tensor& prototypes = model.semantics.standardized;

  std::vector<char> unseen(model.semantics.standardized.rows(), 0);
  for (int cls : model.unseen_classes)
    unseen[static_cast<std::size_t>(cls)] = 1;
  std::vector<int> candidates;
  if (mode == EvalMode::czsl) {
    candidates = model.unseen_classes;
  } else {
    candidates.resize(prototypes.rows());
    for (std::size_t c = 0; c < candidates.size(); ++c)
      candidates[c] = static_cast<int>(c);
  }

  std::vector<int> out(embedded.rows());
  for (std::size_t i = 0; i < embedded.rows(); ++i) {
    int best = candidates.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (int cls : candidates) {
      const auto c = static_cast<std::size_t>(cls);
      double score = 0.0;
      for (std::size_t k = 0; k < prototypes.cols(); ++k)
        score += embedded(i, k) * prototypes(c, k);
      if (mode == EvalMode::gzsl) score += unseen[c] ? gamma : -gamma;
      if (score > best_score) {  // ties keep the lower class id
        best_score = score;
        best = cls;
      }
    }
    out[i] = best;
  }
  return out;
}

EvalResult evaluate(const VsgmnModel& model, const ZslDataset& ds,
                    EvalMode mode, double gamma) {
  if (ds.feature_dim() != model.feature_dim) {
    throw DimensionError("evaluate: dataset features " +
                         ds.features.shape_str() +
                         " do not match model feature width " +
                         std::to_string(model.feature_dim));
  }
  EvalResult result;
  for (std::size_t i : ds.test_instances) {
    if (mode == EvalMode::czsl && ds.is_seen(ds.labels[i])) continue;
    result.instances.push_back(i);
  }

  Tensor rows({result.instances.size(), ds.feature_dim()});
  for (std::size_t k = 0; k < result.instances.size(); ++k)
    for (std::size_t f = 0; f < ds.feature_dim(); ++f)
      rows(k, f) = ds.features(result.instances[k], f);
  result.predicted = predict(model, rows, mode, gamma);
  result.true_labels.reserve(result.instances.size());
  for (std::size_t i : result.instances)
    result.true_labels.push_back(ds.labels[i]);

  std::map<int, std::pair<std::size_t, std::size_t>> tally;  // correct, total
  for (std::size_t k = 0; k < result.instances.size(); ++k) {
    auto& [correct, total] = tally[result.true_labels[k]];
    ++total;
    if (result.predicted[k] == result.true_labels[k]) ++correct;
  }

  const auto macro = [&tally](const std::vector<int>& classes,
                              const char* which) {
    double acc_sum = 0.0;
    std::size_t counted = 0;
    for (int cls : classes) {
      const auto it = tally.find(cls);
      if (it == tally.end()) {
        log_info(std::string("evaluate: ") + which + " class " +
                 std::to_string(cls) + " has no test instances; skipped");
        continue;
      }
      acc_sum += static_cast<double>(it->second.first) /
                 static_cast<double>(it->second.second);
      ++counted;
    }
    return counted == 0 ? 0.0 : acc_sum / static_cast<double>(counted);
  };

  for (const auto& [cls, counts] : tally) {
    result.metrics.per_class_acc[cls] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  if (mode == EvalMode::czsl) {
    result.metrics.acc_czsl = macro(model.unseen_classes, "unseen");
  } else {
    result.metrics.seen_acc = macro(model.seen_classes, "seen");
    result.metrics.unseen_acc = macro(model.unseen_classes, "unseen");
    result.metrics.harmonic =
        harmonic_mean(result.metrics.seen_acc, result.metrics.unseen_acc);
  }
  return result;
}

std::vector<SweepOverrides> expand_grid(const SweepGrid& grid) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  for (const auto& [key, values] : grid) {
    if (values.empty()) {
      throw ConfigError("sweep: key '" + key + "' has no candidate values");
    }
  }
  std::vector<SweepOverrides> cells;
  std::vector<std::size_t> cursor(grid.size(), 0);
  while (true) {
    SweepOverrides overrides;
    overrides.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
      overrides.emplace_back(grid[k].first, grid[k].second[cursor[k]]);
    cells.push_back(std::move(overrides));
    // advance the last key fastest
    std::size_t k = grid.size();
    while (k-- > 0) {
      if (++cursor[k] < grid[k].second.size()) break;
      cursor[k] = 0;
      if (k == 0) return cells;
    }
  }
}

std::vector<SweepCellResult> sweep(const ZslDataset& ds,
                                   const TrainConfig& base,
                                   const SweepGrid& grid, std::size_t jobs,
                                   const SweepCellCache& cache,
                                   const SweepCellObserver& observer) {
  const std::vector<SweepOverrides> cells = expand_grid(grid);
  std::vector<SweepCellResult> results(cells.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t index = next.fetch_add(1);
      if (index >= cells.size()) return;
      SweepCellResult& cell = results[index];
      cell.index = index;
      cell.overrides = cells[index];
      try {
        TrainConfig config = base;
        for (const auto& [key, value] : cell.overrides)
          apply_config_entry(config, key, value);
        if (cache) {
          if (auto cached = cache(index, config)) {
            cell = *cached;
            cell.index = index;
            cell.overrides = cells[index];
            continue;
          }
        }
        std::vector<EpochLoss> trace;
        const VsgmnModel model = train_model(ds, config, &trace);
        cell.czsl_acc =
            evaluate(model, ds, EvalMode::czsl, config.gamma).metrics.acc_czsl;
        cell.gzsl = evaluate(model, ds, EvalMode::gzsl, config.gamma).metrics;
        if (observer) observer(cell, model, trace);
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
        log_error("sweep cell " + std::to_string(index) + " failed: " +
                  e.what());
      }
    }
  };

  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  std::sort(results.begin(), results.end(),
            [](const SweepCellResult& a, const SweepCellResult& b) {
              if (a.gzsl.harmonic != b.gzsl.harmonic)
                return a.gzsl.harmonic > b.gzsl.harmonic;
              if (a.czsl_acc != b.czsl_acc) return a.czsl_acc > b.czsl_acc;
              return a.index < b.index;
            });
  return results;
}

}  // namespace vsgmn
