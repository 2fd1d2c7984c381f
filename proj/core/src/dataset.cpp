#include "vsgmn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vsgmn/errors.hpp"
#include "vsgmn/format.hpp"
#include "vsgmn/log.hpp"

namespace vsgmn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding spaces
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string()
                                           : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.filename().string() + ":" + std::to_string(line);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot open required file " + path.string());
  }
  return in;
}

Tensor read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (rows == 0) {
      cols = cells.size();
    } else if (cells.size() != cols) {
      throw ParseError(location(path, lineno) + ": expected " +
                       std::to_string(cols) + " columns, got " +
                       std::to_string(cells.size()));
    }
    for (const auto& cell : cells)
      values.push_back(parse_double(cell, location(path, lineno)));
    ++rows;
  }
  return Tensor({rows, cols}, std::move(values));
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<int> labels;
  std::size_t lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 1) {
      throw ParseError(location(path, lineno) +
                       ": expected a single label, got " +
                       std::to_string(cells.size()) + " cells");
    }
    labels.push_back(
        static_cast<int>(parse_int(cells[0], location(path, lineno))));
  }
  return labels;
}

template <typename T>
std::vector<T> json_index_list(const nlohmann::json& j, const char* key,
                               const std::filesystem::path& path) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ParseError(path.filename().string() + ": missing array '" +
                     std::string(key) + "'");
  }
  std::vector<T> out;
  for (const auto& v : j[key]) {
    if (!v.is_number_integer()) {
      throw ParseError(path.filename().string() + ": '" + std::string(key) +
                       "' holds a non-integer entry");
    }
    out.push_back(v.get<T>());
  }
  return out;
}

void write_matrix_csv(const Tensor& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

bool ZslDataset::is_seen(int cls) const {
  return std::binary_search(seen_classes.begin(), seen_classes.end(), cls);
}

void ZslDataset::validate() const {
  const std::size_t n = num_instances();
  const std::size_t c = num_classes();
  if (features.rank() != 2 || features.rows() != n) {
    throw ValidationError("features " + features.shape_str() +
                          " do not match " + std::to_string(n) + " labels");
  }
  if (prototypes.rank() != 2) {
    throw ValidationError("prototypes must be rank 2, got " +
                          prototypes.shape_str());
  }

  std::set<int> seen(seen_classes.begin(), seen_classes.end());
  std::set<int> unseen(unseen_classes.begin(), unseen_classes.end());
  for (int cls : seen) {
    if (unseen.count(cls)) {
      throw ValidationError("class " + std::to_string(cls) +
                            " appears in both seen and unseen sets");
    }
  }
  std::set<int> all = seen;
  all.insert(unseen.begin(), unseen.end());
  const bool exact_partition =
      all.size() == seen.size() + unseen.size() && all.size() == c &&
      (c == 0 || (*all.begin() == 0 && *all.rbegin() == static_cast<int>(c) - 1));
  if (!exact_partition) {
    throw ValidationError(
        "seen and unseen sets do not partition classes 0.." +
        std::to_string(c == 0 ? 0 : c - 1) + " (" +
        std::to_string(seen.size()) + " seen, " +
        std::to_string(unseen.size()) + " unseen, " + std::to_string(c) +
        " prototype rows)");
  }

  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(c)) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::string msg = "labels out of range [0, " + std::to_string(c) +
                      ") at rows:";
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 8); ++k)
      msg += " " + std::to_string(bad[k]);
    if (bad.size() > 8)
      msg += " (+" + std::to_string(bad.size() - 8) + " more)";
    throw ValidationError(msg);
  }

  std::set<std::size_t> train(train_instances.begin(), train_instances.end());
  for (std::size_t i : test_instances) {
    if (train.count(i)) {
      throw ValidationError("instance " + std::to_string(i) +
                            " appears in both train and test lists");
    }
  }
  for (std::size_t i : train_instances) {
    if (i >= n) {
      throw ValidationError("train instance " + std::to_string(i) +
                            " out of range for " + std::to_string(n) +
                            " instances");
    }
  }
  for (std::size_t i : test_instances) {
    if (i >= n) {
      throw ValidationError("test instance " + std::to_string(i) +
                            " out of range for " + std::to_string(n) +
                            " instances");
    }
  }

  bad.clear();
  for (std::size_t i : train_instances) {
    if (!seen.count(labels[i])) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::string msg = "train instances labeled with unseen classes at rows:";
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 8); ++k)
      msg += " " + std::to_string(bad[k]);
    if (bad.size() > 8)
      msg += " (+" + std::to_string(bad.size() - 8) + " more)";
    throw ValidationError(msg);
  }
}

ZslDataset load_dataset(const std::filesystem::path& dir) {
  ZslDataset ds;
  ds.features = read_matrix_csv(dir / "features.csv");
  ds.labels = read_labels_csv(dir / "labels.csv");
  ds.prototypes = read_matrix_csv(dir / "prototypes.csv");

  const auto split_path = dir / "split.json";
  std::ifstream in = open_or_throw(split_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(split_path.filename().string() + ": " + e.what());
  }
  ds.seen_classes = json_index_list<int>(j, "seen_classes", split_path);
  ds.unseen_classes = json_index_list<int>(j, "unseen_classes", split_path);
  ds.train_instances =
      json_index_list<std::size_t>(j, "train_instances", split_path);
  ds.test_instances =
      json_index_list<std::size_t>(j, "test_instances", split_path);
  std::sort(ds.seen_classes.begin(), ds.seen_classes.end());
  std::sort(ds.unseen_classes.begin(), ds.unseen_classes.end());

  ds.validate();
  return ds;
}

void write_dataset(const ZslDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(ds.features, dir / "features.csv");
  write_matrix_csv(ds.prototypes, dir / "prototypes.csv");

  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw IngestionError("cannot write " + (dir / "labels.csv").string());
  for (int label : ds.labels) labels << label << '\n';

  nlohmann::json j;
  j["seen_classes"] = ds.seen_classes;
  j["unseen_classes"] = ds.unseen_classes;
  j["train_instances"] = ds.train_instances;
  j["test_instances"] = ds.test_instances;
  std::ofstream split(dir / "split.json");
  if (!split) throw IngestionError("cannot write " + (dir / "split.json").string());
  split << j.dump(2) << '\n';
}

ZslDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.seen_classes < 2) throw ConfigError("synthetic: need >= 2 seen classes");
  if (cfg.unseen_classes < 1) throw ConfigError("synthetic: need >= 1 unseen class");
  if (cfg.attribute_dim < 2) throw ConfigError("synthetic: need attribute_dim >= 2");
  if (cfg.feature_dim < 1) throw ConfigError("synthetic: need feature_dim >= 1");
  if (cfg.samples_per_class < 1) throw ConfigError("synthetic: need >= 1 sample per class");
  if (!(cfg.noise_scale >= 0.0) || !std::isfinite(cfg.noise_scale)) {
    throw ConfigError("synthetic: noise_scale must be finite and >= 0");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    throw ConfigError("synthetic: train_fraction must lie in (0, 1]");
  }

  const std::size_t c_total = cfg.seen_classes + cfg.unseen_classes;
  const std::size_t n = c_total * cfg.samples_per_class;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  ZslDataset ds;
  // Unit-sphere semantic prototypes, one row per class.
  ds.prototypes = Tensor({c_total, cfg.attribute_dim});
  for (std::size_t c = 0; c < c_total; ++c) {
    double sq = 0.0;
    for (std::size_t k = 0; k < cfg.attribute_dim; ++k) {
      ds.prototypes(c, k) = normal(rng);
      sq += ds.prototypes(c, k) * ds.prototypes(c, k);
    }
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) {
      ds.prototypes(c, 0) = 1.0;
    } else {
      for (std::size_t k = 0; k < cfg.attribute_dim; ++k)
        ds.prototypes(c, k) /= norm;
    }
  }

  // Shared linear map from attribute space to feature space.
  Tensor m({cfg.feature_dim, cfg.attribute_dim});
  for (double& x : m.data()) x = normal(rng);

  ds.features = Tensor({n, cfg.feature_dim});
  ds.labels.resize(n);
  std::size_t row = 0;
  for (std::size_t c = 0; c < c_total; ++c) {
    // Noiseless class centroid M z_c, perturbed per instance.
    std::vector<double> centroid(cfg.feature_dim, 0.0);
    for (std::size_t f = 0; f < cfg.feature_dim; ++f)
      for (std::size_t k = 0; k < cfg.attribute_dim; ++k)
        centroid[f] += m(f, k) * ds.prototypes(c, k);
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s, ++row) {
      ds.labels[row] = static_cast<int>(c);
      for (std::size_t f = 0; f < cfg.feature_dim; ++f)
        ds.features(row, f) = centroid[f] + cfg.noise_scale * normal(rng);
    }
  }

  for (std::size_t c = 0; c < c_total; ++c) {
    const bool seen = c < cfg.seen_classes;
    (seen ? ds.seen_classes : ds.unseen_classes).push_back(static_cast<int>(c));
    const std::size_t base = c * cfg.samples_per_class;
    if (!seen) {
      for (std::size_t s = 0; s < cfg.samples_per_class; ++s)
        ds.test_instances.push_back(base + s);
      continue;
    }
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(cfg.train_fraction *
                     static_cast<double>(cfg.samples_per_class)));
    n_train = std::clamp<std::size_t>(n_train, 1, cfg.samples_per_class);
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      (s < n_train ? ds.train_instances : ds.test_instances)
          .push_back(base + s);
    }
  }
  if (cfg.train_fraction >= 1.0) {
    log_debug("synthetic dataset has no seen-class test instances");
  }

  ds.validate();
  return ds;
}

SemanticPrototypeSet standardize_prototypes(
    const Tensor& raw, const std::vector<int>& seen_classes) {
  if (raw.rank() != 2) {
    throw ContractError("standardize_prototypes: prototypes must be rank 2, got " +
                        raw.shape_str());
  }
  if (seen_classes.empty()) {
    throw ContractError("standardize_prototypes: empty seen-class list");
  }
  for (int cls : seen_classes) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= raw.rows()) {
      throw ContractError("standardize_prototypes: seen class " +
                          std::to_string(cls) + " out of range for " +
                          raw.shape_str());
    }
  }

  const std::size_t k = raw.cols();
  const double inv_s = 1.0 / static_cast<double>(seen_classes.size());
  std::vector<double> mu(k, 0.0), sigma(k, 0.0);
  for (int cls : seen_classes)
    for (std::size_t j = 0; j < k; ++j)
      mu[j] += raw(static_cast<std::size_t>(cls), j);
  for (std::size_t j = 0; j < k; ++j) mu[j] *= inv_s;
  for (int cls : seen_classes) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = raw(static_cast<std::size_t>(cls), j) - mu[j];
      sigma[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < k; ++j) sigma[j] = std::sqrt(sigma[j] * inv_s);

  SemanticPrototypeSet out;
  out.raw = raw;
  out.standardized = Tensor({raw.rows(), k});
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      out.standardized(i, j) =
          sigma[j] < 1e-12 ? 0.0 : (raw(i, j) - mu[j]) / sigma[j];
    }
  }
  out.normalized = l2_normalize_rows(out.standardized);
  return out;
}

BalancedBatchSampler::BalancedBatchSampler(const ZslDataset& ds,
                                           std::size_t batch_size,
                                           std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed) {
  // Group training instances by class, classes ascending, indices ascending.
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i : ds.train_instances) by_class[ds.labels[i]].push_back(i);

  std::vector<int> empty_seen;
  for (int cls : ds.seen_classes) {
    if (by_class[cls].empty()) empty_seen.push_back(cls);
  }
  if (!empty_seen.empty()) {
    std::string msg = "seen classes without training instances:";
    for (int cls : empty_seen) msg += " " + std::to_string(cls);
    throw DatasetError(msg);
  }

  for (int cls : ds.seen_classes) {
    std::sort(by_class[cls].begin(), by_class[cls].end());
    per_class_.push_back(std::move(by_class[cls]));
  }
  if (batch_size_ == 0) batch_size_ = per_class_.size();
  if (batch_size_ > per_class_.size()) {
    throw ConfigError("batch_size " + std::to_string(batch_size_) +
                      " exceeds the " + std::to_string(per_class_.size()) +
                      " seen classes (one instance per class per batch)");
  }
}

std::vector<std::vector<std::size_t>> BalancedBatchSampler::epoch(
    std::uint64_t epoch_index) const {
  std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(epoch_index)));
  std::vector<std::vector<std::size_t>> pool = per_class_;
  for (auto& list : pool) std::shuffle(list.begin(), list.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  std::size_t remaining = 0;
  for (const auto& list : pool) remaining += list.size();
  std::vector<std::size_t> order(pool.size());
  while (remaining > 0) {
    // Draw from the classes with the most instances left so that no class is
    // forced to double up late in the epoch.
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&pool](std::size_t a, std::size_t b) {
                       return pool[a].size() > pool[b].size();
                     });
    std::vector<std::size_t> batch;
    for (std::size_t k = 0; k < order.size() && batch.size() < batch_size_;
         ++k) {
      auto& list = pool[order[k]];
      if (list.empty()) break;  // sorted, so the rest are empty too
      batch.push_back(list.back());
      list.pop_back();
      --remaining;
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace vsgmn
