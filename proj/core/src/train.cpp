#include "vsgmn/train.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "vsgmn/errors.hpp"
#include "vsgmn/log.hpp"

namespace vsgmn {

void TrainConfig::apply_ablation(Ablation ablation) {
  switch (ablation) {
    case Ablation::baseline:
      graph_match_enabled = false;
      mask_enabled = false;
      cross_graph_enabled = false;
      weights.crc = 0.0;
      break;
    case Ablation::crc_only:
      graph_match_enabled = false;
      mask_enabled = false;
      cross_graph_enabled = false;
      break;
    case Ablation::graph_match:
      graph_match_enabled = true;
      mask_enabled = false;
      cross_graph_enabled = false;
      break;
    case Ablation::graph_match_um:
      graph_match_enabled = true;
      mask_enabled = true;
      cross_graph_enabled = false;
      break;
    case Ablation::graph_match_cg:
      graph_match_enabled = true;
      mask_enabled = false;
      cross_graph_enabled = true;
      break;
    case Ablation::full:
      graph_match_enabled = true;
      mask_enabled = true;
      cross_graph_enabled = true;
      break;
  }
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("config: epochs must be >= 1");
  if (top_k == 0) throw ConfigError("config: top_k must be >= 1");
  if (graph_match_enabled && layers == 0) {
    throw ConfigError("config: graph matching needs layers >= 1");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("config: temperature must be finite and > 0");
  }
  if (!std::isfinite(cross_weight)) {
    throw ConfigError("config: cross_weight must be finite");
  }
  if (!std::isfinite(gamma)) {
    throw ConfigError("config: gamma must be finite");
  }
  for (const auto& [value, name] :
       {std::pair<double, const char*>{weights.reg, "lambda_reg"},
        {weights.sc, "lambda_sc"},
        {weights.crc, "lambda_crc"}}) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ConfigError(std::string("config: ") + name +
                        " must be finite and >= 0");
    }
  }
  SgdOptimizer probe(optimizer);  // range checks live in the optimizer
}

Ablation ablation_from_string(const std::string& name) {
  if (name == "baseline") return Ablation::baseline;
  if (name == "crc_only") return Ablation::crc_only;
  if (name == "gm") return Ablation::graph_match;
  if (name == "gm_um") return Ablation::graph_match_um;
  if (name == "gm_cg") return Ablation::graph_match_cg;
  if (name == "full") return Ablation::full;
  throw ConfigError("unknown ablation '" + name +
                    "' (expected baseline|crc_only|gm|gm_um|gm_cg|full)");
}

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::baseline: return "baseline";
    case Ablation::crc_only: return "crc_only";
    case Ablation::graph_match: return "gm";
    case Ablation::graph_match_um: return "gm_um";
    case Ablation::graph_match_cg: return "gm_cg";
    case Ablation::full: return "full";
  }
  return "full";
}

LayerVariant variant_from_string(const std::string& name) {
  if (name == "attention") return LayerVariant::attention;
  if (name == "propagation") return LayerVariant::propagation;
  throw ConfigError("unknown variant '" + name +
                    "' (expected attention|propagation)");
}

std::string to_string(LayerVariant variant) {
  return variant == LayerVariant::attention ? "attention" : "propagation";
}

std::vector<Parameter*> VsgmnModel::parameters() {
  std::vector<Parameter*> out = embedding->parameters();
  for (GraphMatchLayer& layer : layers)
    for (Parameter* p : layer.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> VsgmnModel::parameters() const {
  std::vector<const Parameter*> out =
      static_cast<const MlpEmbedding&>(*embedding).parameters();
  for (const GraphMatchLayer& layer : layers)
    for (const Parameter* p : layer.parameters()) out.push_back(p);
  return out;
}

VsgmnModel build_model(const ZslDataset& ds, const TrainConfig& config) {
  config.validate();
  if (ds.seen_classes.empty() || ds.unseen_classes.empty()) {
    throw DatasetError("model: dataset needs both seen and unseen classes");
  }

  VsgmnModel model;
  model.config = config;
  model.feature_dim = ds.feature_dim();
  model.attribute_dim = ds.attribute_dim();
  model.seen_classes = ds.seen_classes;
  model.unseen_classes = ds.unseen_classes;
  model.semantics = standardize_prototypes(ds.prototypes, ds.seen_classes);

  if (model.uses_virtual_nodes()) {
    const VisualPrototypeTable visual = compute_visual_prototypes(ds);
    model.virtual_features = generate_virtual_unseen_features(
        visual, model.semantics, ds.unseen_classes, config.top_k);
  } else {
    model.virtual_features = Tensor({0, model.feature_dim});
  }

  std::mt19937_64 rng(config.seed);
  const std::size_t hidden =
      config.hidden_dim != 0 ? config.hidden_dim : 4 * model.attribute_dim;
  model.embedding = std::make_unique<MlpEmbedding>(
      model.feature_dim, hidden, model.attribute_dim, rng);

  if (config.graph_match_enabled) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::string prefix = "gmn.layer" + std::to_string(l + 1);
      model.layers.push_back(
          config.variant == LayerVariant::attention
              ? GraphMatchLayer::attention_layer_params(
                    model.attribute_dim, config.temperature,
                    config.cross_weight, prefix, rng)
              : GraphMatchLayer::propagation_layer_params(model.attribute_dim,
                                                          prefix, rng));
    }
  }
  return model;
}

Batch make_batch(const VsgmnModel& model, const ZslDataset& ds,
                 const std::vector<std::size_t>& instance_indices) {
  Tensor rows({instance_indices.size(), ds.feature_dim()});
  std::vector<int> labels;
  labels.reserve(instance_indices.size());
  for (std::size_t k = 0; k < instance_indices.size(); ++k) {
    const std::size_t i = instance_indices[k];
    for (std::size_t f = 0; f < ds.feature_dim(); ++f)
      rows(k, f) = ds.features(i, f);
    labels.push_back(ds.labels[i]);
  }
  if (model.uses_virtual_nodes()) {
    return assemble_batch(rows, labels, model.virtual_features,
                          model.unseen_classes);
  }
  return assemble_batch(rows, labels, Tensor({0, ds.feature_dim()}), {});
}

ForwardResult forward_batch(VsgmnModel& model, Tape& tape, const Batch& batch) {
  ForwardResult result;
  result.embeddings = embed(*model.embedding, tape, batch, result.bound);

  // Standardized prototype rows matched to every batch row.
  const Tensor matched =
      gather_rows(model.semantics.standardized,
                  std::span<const int>(batch.class_ids));

  const Var real = batch.n_virtual == 0
                       ? result.embeddings
                       : slice_rows(result.embeddings, 0, batch.n_real);
  const std::vector<int> real_labels(
      batch.class_ids.begin(),
      batch.class_ids.begin() + static_cast<std::ptrdiff_t>(batch.n_real));
  const Tensor real_matched = gather_rows(
      model.semantics.standardized, std::span<const int>(real_labels));

  if (model.config.ace_pool == AcePool::seen) {
    const Tensor pool = gather_rows(model.semantics.standardized,
                                    std::span<const int>(model.seen_classes));
    result.breakdown.ace =
        loss_ace(tape, real, real_labels, pool, model.seen_classes);
  } else {
    std::vector<int> all_classes(model.semantics.standardized.rows());
    for (std::size_t c = 0; c < all_classes.size(); ++c)
      all_classes[c] = static_cast<int>(c);
    result.breakdown.ace = loss_ace(tape, real, real_labels,
                                    model.semantics.standardized, all_classes);
  }

  result.breakdown.reg = loss_reg(tape, real, real_matched);
  result.breakdown.sc =
      loss_sc(tape, real, model.semantics.standardized, model.unseen_classes);

  if (model.uses_relation_consistency()) {
    if (model.config.graph_match_enabled) {
      const BuiltGraphs graphs =
          build_graphs(tape, result.embeddings, matched, batch.n_real,
                       batch.n_virtual, model.config.mask_enabled);
      const GmnState state =
          run_gmn(tape, graphs, model.layers,
                  model.config.cross_graph_enabled, result.bound);
      result.breakdown.crc = loss_crc(state.distributions, batch.size());
    } else {
      // First-order distributions on the raw node sets; no match layers.
      const NodePair raw{result.embeddings, tape.leaf(matched)};
      result.breakdown.crc = loss_crc(
          {relation_distributions(tape, raw)}, batch.size());
    }
  }

  result.total = loss_total(result.breakdown, model.config.weights);
  return result;
}

std::vector<EpochLoss> train(VsgmnModel& model, const ZslDataset& ds) {
  if (model.feature_dim != ds.feature_dim() ||
      model.attribute_dim != ds.attribute_dim()) {
    throw DimensionError(
        "train: model built for " + std::to_string(model.feature_dim) + "/" +
        std::to_string(model.attribute_dim) + " dims, dataset has " +
        std::to_string(ds.feature_dim()) + "/" +
        std::to_string(ds.attribute_dim()));
  }
  const TrainConfig& cfg = model.config;
  BalancedBatchSampler sampler(ds, cfg.batch_size, cfg.seed);
  SgdOptimizer optimizer(cfg.optimizer);

  std::vector<EpochLoss> trace;
  trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLoss mean;
    const auto batches = sampler.epoch(epoch);
    for (const auto& indices : batches) {
      const Batch batch = make_batch(model, ds, indices);
      Tape tape;
      ForwardResult fwd = forward_batch(model, tape, batch);
      const GradientMap grads = tape.backward(fwd.total);
      optimizer.step(fwd.bound.parameters(), fwd.bound.gradients(grads));

      mean.ace += fwd.breakdown.ace.value().item();
      if (fwd.breakdown.reg) mean.reg += fwd.breakdown.reg->value().item();
      if (fwd.breakdown.sc) mean.sc += fwd.breakdown.sc->value().item();
      if (fwd.breakdown.crc) mean.crc += fwd.breakdown.crc->value().item();
      mean.total += fwd.total.value().item();
    }
    const double inv = 1.0 / static_cast<double>(batches.size());
    mean.ace *= inv;
    mean.reg *= inv;
    mean.sc *= inv;
    mean.crc *= inv;
    mean.total *= inv;
    trace.push_back(mean);
    log_debug("epoch " + std::to_string(epoch + 1) + "/" +
              std::to_string(cfg.epochs) + " total " +
              std::to_string(mean.total));
  }
  model.trained = true;
  return trace;
}

VsgmnModel train_model(const ZslDataset& ds, const TrainConfig& config,
                       std::vector<EpochLoss>* trace) {
  VsgmnModel model = build_model(ds, config);
  std::vector<EpochLoss> result = train(model, ds);
  if (trace != nullptr) *trace = std::move(result);
  return model;
}

// --- serialization ------------------------------------------------------------

namespace {

nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape();
  j["data"] = std::vector<double>(t.data().begin(), t.data().end());
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.contains("shape") || !j.contains("data")) {
    throw ParseError("model file: tensor '" + what +
                     "' lacks shape or data");
  }
  return Tensor(j["shape"].get<std::vector<std::size_t>>(),
                j["data"].get<std::vector<double>>());
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["top_k"] = cfg.top_k;
  j["layers"] = cfg.layers;
  j["variant"] = to_string(cfg.variant);
  j["temperature"] = cfg.temperature;
  j["cross_weight"] = cfg.cross_weight;
  j["lambda_reg"] = cfg.weights.reg;
  j["lambda_sc"] = cfg.weights.sc;
  j["lambda_crc"] = cfg.weights.crc;
  j["learning_rate"] = cfg.optimizer.learning_rate;
  j["momentum"] = cfg.optimizer.momentum;
  j["weight_decay"] = cfg.optimizer.weight_decay;
  j["seed"] = cfg.seed;
  j["hidden_dim"] = cfg.hidden_dim;
  j["gamma"] = cfg.gamma;
  j["graph_match_enabled"] = cfg.graph_match_enabled;
  j["mask_enabled"] = cfg.mask_enabled;
  j["cross_graph_enabled"] = cfg.cross_graph_enabled;
  j["ace_pool"] = cfg.ace_pool == AcePool::seen ? "seen" : "all";
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.top_k = j.at("top_k").get<std::size_t>();
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.temperature = j.at("temperature").get<double>();
  cfg.cross_weight = j.at("cross_weight").get<double>();
  cfg.weights.reg = j.at("lambda_reg").get<double>();
  cfg.weights.sc = j.at("lambda_sc").get<double>();
  cfg.weights.crc = j.at("lambda_crc").get<double>();
  cfg.optimizer.learning_rate = j.at("learning_rate").get<double>();
  cfg.optimizer.momentum = j.at("momentum").get<double>();
  cfg.optimizer.weight_decay = j.at("weight_decay").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.graph_match_enabled = j.at("graph_match_enabled").get<bool>();
  cfg.mask_enabled = j.at("mask_enabled").get<bool>();
  cfg.cross_graph_enabled = j.at("cross_graph_enabled").get<bool>();
  cfg.ace_pool = j.at("ace_pool").get<std::string>() == "all" ? AcePool::all
                                                              : AcePool::seen;
  return cfg;
}

}  // namespace

void save_model(const VsgmnModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "vsgmn-model-v1";
  j["trained"] = model.trained;
  j["feature_dim"] = model.feature_dim;
  j["attribute_dim"] = model.attribute_dim;
  j["seen_classes"] = model.seen_classes;
  j["unseen_classes"] = model.unseen_classes;
  j["config"] = config_to_json(model.config);
  j["prototypes_standardized"] = tensor_to_json(model.semantics.standardized);
  j["virtual_features"] = tensor_to_json(model.virtual_features);
  nlohmann::json tensors;
  for (const Parameter* p : model.parameters())
    tensors[p->name] = tensor_to_json(p->value);
  j["tensors"] = std::move(tensors);

  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

VsgmnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != "vsgmn-model-v1") {
    throw ParseError(path.filename().string() +
                     ": not a recognized model file");
  }

  VsgmnModel model;
  try {
    model.config = config_from_json(j.at("config"));
    model.feature_dim = j.at("feature_dim").get<std::size_t>();
    model.attribute_dim = j.at("attribute_dim").get<std::size_t>();
    model.seen_classes = j.at("seen_classes").get<std::vector<int>>();
    model.unseen_classes = j.at("unseen_classes").get<std::vector<int>>();
    model.semantics.standardized =
        tensor_from_json(j.at("prototypes_standardized"), "prototypes");
    model.virtual_features =
        tensor_from_json(j.at("virtual_features"), "virtual_features");
    model.trained = j.at("trained").get<bool>();

    // Rebuild the parameter structure, then overwrite values by name.
    std::mt19937_64 rng(model.config.seed);
    const std::size_t hidden = model.config.hidden_dim != 0
                                   ? model.config.hidden_dim
                                   : 4 * model.attribute_dim;
    model.embedding = std::make_unique<MlpEmbedding>(
        model.feature_dim, hidden, model.attribute_dim, rng);
    if (model.config.graph_match_enabled) {
      for (std::size_t l = 0; l < model.config.layers; ++l) {
        const std::string prefix = "gmn.layer" + std::to_string(l + 1);
        model.layers.push_back(
            model.config.variant == LayerVariant::attention
                ? GraphMatchLayer::attention_layer_params(
                      model.attribute_dim, model.config.temperature,
                      model.config.cross_weight, prefix, rng)
                : GraphMatchLayer::propagation_layer_params(
                      model.attribute_dim, prefix, rng));
      }
    }
    const nlohmann::json& tensors = j.at("tensors");
    for (Parameter* p : model.parameters()) {
      if (!tensors.contains(p->name)) {
        throw ParseError(path.filename().string() + ": missing tensor '" +
                         p->name + "'");
      }
      Tensor loaded = tensor_from_json(tensors[p->name], p->name);
      if (!loaded.same_shape(p->value)) {
        throw ParseError(path.filename().string() + ": tensor '" + p->name +
                         "' has shape " + loaded.shape_str() + ", expected " +
                         p->value.shape_str());
      }
      p->value = std::move(loaded);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
  return model;
}

}  // namespace vsgmn
