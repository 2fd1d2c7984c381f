#include "vsgmn/gbn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vsgmn/errors.hpp"

namespace vsgmn {

VisualPrototypeTable compute_visual_prototypes(const ZslDataset& ds) {
  VisualPrototypeTable table;
  table.class_ids = ds.seen_classes;
  table.counts.assign(table.class_ids.size(), 0);
  table.prototypes = Tensor({table.class_ids.size(), ds.feature_dim()});

  // class id -> row in the table
  std::vector<int> slot(ds.num_classes(), -1);
  for (std::size_t r = 0; r < table.class_ids.size(); ++r)
    slot[table.class_ids[r]] = static_cast<int>(r);

  for (std::size_t i : ds.train_instances) {
    const int r = slot[ds.labels[i]];
    if (r < 0) continue;  // validate() rules this out, but stay defensive
    ++table.counts[r];
    for (std::size_t f = 0; f < ds.feature_dim(); ++f)
      table.prototypes(static_cast<std::size_t>(r), f) += ds.features(i, f);
  }

  std::string missing;
  for (std::size_t r = 0; r < table.counts.size(); ++r) {
    if (table.counts[r] == 0) {
      missing += " " + std::to_string(table.class_ids[r]);
      continue;
    }
    const double inv = 1.0 / static_cast<double>(table.counts[r]);
    for (std::size_t f = 0; f < ds.feature_dim(); ++f)
      table.prototypes(r, f) *= inv;
  }
  if (!missing.empty()) {
    throw DatasetError("seen classes without training instances:" + missing);
  }
  return table;
}

Tensor generate_virtual_unseen_features(const VisualPrototypeTable& visual,
                                        const SemanticPrototypeSet& semantics,
                                        const std::vector<int>& unseen_classes,
                                        std::size_t top_k) {
  if (top_k == 0) {
    throw ConfigError("virtual features: top_k must be >= 1");
  }
  const std::size_t c_s = visual.class_ids.size();
  if (c_s == 0) throw ContractError("virtual features: no visual prototypes");
  const std::size_t k_eff = std::min(top_k, c_s);
  const std::size_t f = visual.prototypes.cols();

  Tensor out({unseen_classes.size(), f});
  std::vector<std::pair<double, int>> scored(c_s);  // (-similarity, seen row)
  for (std::size_t u = 0; u < unseen_classes.size(); ++u) {
    const int ucls = unseen_classes[u];
    if (ucls < 0 || static_cast<std::size_t>(ucls) >= semantics.raw.rows()) {
      throw ContractError("virtual features: unseen class " +
                          std::to_string(ucls) + " out of range for " +
                          semantics.raw.shape_str());
    }
    const auto urow = semantics.raw.data().subspan(
        static_cast<std::size_t>(ucls) * semantics.raw.cols(),
        semantics.raw.cols());
    const double unorm = l2_norm(urow);
    for (std::size_t s = 0; s < c_s; ++s) {
      const auto srow = semantics.raw.data().subspan(
          static_cast<std::size_t>(visual.class_ids[s]) * semantics.raw.cols(),
          semantics.raw.cols());
      const double snorm = l2_norm(srow);
      const double denom = std::max(unorm * snorm, 1e-12);
      scored[s] = {-dot(urow, srow) / denom, static_cast<int>(s)};
    }
    // Most similar first; ties fall to the lower seen-class id.
    std::sort(scored.begin(), scored.end());
    const double inv = 1.0 / static_cast<double>(k_eff);
    for (std::size_t k = 0; k < k_eff; ++k) {
      const auto row = static_cast<std::size_t>(scored[k].second);
      for (std::size_t j = 0; j < f; ++j)
        out(u, j) += inv * visual.prototypes(row, j);
    }
  }
  return out;
}

Batch assemble_batch(const Tensor& sample_rows,
                     const std::vector<int>& sample_labels,
                     const Tensor& virtual_rows,
                     const std::vector<int>& unseen_classes) {
  if (sample_rows.rank() != 2 || virtual_rows.rank() != 2) {
    throw DimensionError("assemble_batch: rows must be rank 2, got " +
                         sample_rows.shape_str() + " and " +
                         virtual_rows.shape_str());
  }
  if (sample_rows.rows() != sample_labels.size()) {
    throw ContractError("assemble_batch: " +
                        std::to_string(sample_rows.rows()) + " rows but " +
                        std::to_string(sample_labels.size()) + " labels");
  }
  if (virtual_rows.rows() != unseen_classes.size()) {
    throw ContractError("assemble_batch: " +
                        std::to_string(virtual_rows.rows()) +
                        " virtual rows but " +
                        std::to_string(unseen_classes.size()) +
                        " unseen classes");
  }
  if (virtual_rows.rows() > 0 && sample_rows.rows() > 0 &&
      virtual_rows.cols() != sample_rows.cols()) {
    throw DimensionError("assemble_batch: sample rows " +
                         sample_rows.shape_str() + " and virtual rows " +
                         virtual_rows.shape_str() + " differ in width");
  }

  Batch batch;
  batch.n_real = sample_rows.rows();
  batch.n_virtual = virtual_rows.rows();
  const std::size_t f =
      sample_rows.rows() > 0 ? sample_rows.cols() : virtual_rows.cols();
  batch.rows = Tensor({batch.size(), f});
  batch.class_ids.reserve(batch.size());
  for (std::size_t i = 0; i < batch.n_real; ++i) {
    for (std::size_t j = 0; j < f; ++j) batch.rows(i, j) = sample_rows(i, j);
    batch.class_ids.push_back(sample_labels[i]);
  }
  for (std::size_t i = 0; i < batch.n_virtual; ++i) {
    for (std::size_t j = 0; j < f; ++j)
      batch.rows(batch.n_real + i, j) = virtual_rows(i, j);
    batch.class_ids.push_back(unseen_classes[i]);
  }
  return batch;
}

MlpEmbedding::MlpEmbedding(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t output_dim, std::mt19937_64& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), output_dim_(output_dim) {
  if (input_dim == 0 || output_dim == 0) {
    throw ConfigError("embedding: zero input or output width");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  // Rows are the fan-in: weights right-multiply row-vector activations.
  auto init = [&](std::size_t rows, std::size_t cols) {
    Tensor w({rows, cols});
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& x : w.data()) x = scale * normal(rng);
    return w;
  };
  if (hidden_dim_ == 0) {
    params_.push_back({"embedding.w", init(input_dim_, output_dim_)});
    params_.push_back({"embedding.b", Tensor::zeros({output_dim_})});
  } else {
    params_.push_back({"embedding.w1", init(input_dim_, hidden_dim_)});
    params_.push_back({"embedding.b1", Tensor::zeros({hidden_dim_})});
    params_.push_back({"embedding.w2", init(hidden_dim_, output_dim_)});
    params_.push_back({"embedding.b2", Tensor::zeros({output_dim_})});
  }
}

std::unique_ptr<MlpEmbedding> MlpEmbedding::identity(std::size_t dim) {
  std::mt19937_64 rng(0);
  auto net = std::make_unique<MlpEmbedding>(dim, 0, dim, rng);
  net->params_[0].value = Tensor::identity(dim);
  net->params_[1].value = Tensor::zeros({dim});
  return net;
}

Var MlpEmbedding::forward(Tape& tape, const Var& rows, BoundParams& bound) {
  if (rows.value().rank() != 2 || rows.value().cols() != input_dim_) {
    throw DimensionError("embedding: rows " + rows.value().shape_str() +
                         " do not match input width " +
                         std::to_string(input_dim_));
  }
  if (hidden_dim_ == 0) {
    const Var w = bound.bind(tape, params_[0]);
    const Var b = bound.bind(tape, params_[1]);
    return add_row_broadcast(matmul(rows, w), b);
  }
  const Var w1 = bound.bind(tape, params_[0]);
  const Var b1 = bound.bind(tape, params_[1]);
  const Var w2 = bound.bind(tape, params_[2]);
  const Var b2 = bound.bind(tape, params_[3]);
  const Var hidden = relu(add_row_broadcast(matmul(rows, w1), b1));
  return add_row_broadcast(matmul(hidden, w2), b2);
}

Tensor MlpEmbedding::forward_plain(const Tensor& rows) const {
  if (rows.rank() != 2 || rows.cols() != input_dim_) {
    throw DimensionError("embedding: rows " + rows.shape_str() +
                         " do not match input width " +
                         std::to_string(input_dim_));
  }
  const auto affine = [](const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
    return out;
  };
  if (hidden_dim_ == 0) {
    return affine(rows, params_[0].value, params_[1].value);
  }
  Tensor hidden = affine(rows, params_[0].value, params_[1].value);
  for (double& x : hidden.data()) x = std::max(0.0, x);
  return affine(hidden, params_[2].value, params_[3].value);
}

std::vector<Parameter*> MlpEmbedding::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> MlpEmbedding::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : params_) out.push_back(&p);
  return out;
}

Var embed(EmbeddingNetwork& net, Tape& tape, const Batch& batch,
          BoundParams& bound) {
  return net.forward(tape, tape.leaf(batch.rows), bound);
}

Tensor virtual_column_mask(std::size_t n_real, std::size_t n_virtual) {
  const std::size_t n = n_real + n_virtual;
  Tensor mask = Tensor::full({n, n}, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = n_real; j < n; ++j) mask(i, j) = 0.0;
  return mask;
}

BuiltGraphs build_graphs(Tape& tape, const Var& embeddings,
                         const Tensor& prototype_rows, std::size_t n_real,
                         std::size_t n_virtual, bool mask_virtual) {
  const std::size_t n = n_real + n_virtual;
  if (embeddings.value().rank() != 2 || embeddings.value().rows() != n) {
    throw ContractError("build_graphs: embeddings " +
                        embeddings.value().shape_str() + " do not cover " +
                        std::to_string(n) + " batch rows");
  }
  require_same_shape(embeddings.value(), prototype_rows, "build_graphs");

  BuiltGraphs graphs;
  graphs.n_real = n_real;
  graphs.n_virtual = n_virtual;
  graphs.visual_nodes = embeddings;
  graphs.semantic_nodes = tape.leaf(prototype_rows);

  // First-order structure: cosine similarity of every node pair.
  const Var vn = l2_normalize_rows(embeddings);
  graphs.adjacency_visual = matmul(vn, transpose(vn));
  const Var sn = l2_normalize_rows(graphs.semantic_nodes);
  graphs.adjacency_semantic = matmul(sn, transpose(sn));

  if (mask_virtual && n_virtual > 0) {
    graphs.adjacency_visual = apply_mask(
        graphs.adjacency_visual, virtual_column_mask(n_real, n_virtual));
  }
  return graphs;
}

}  // namespace vsgmn
