#include "vsgmn/gmn.hpp"

#include <cmath>

#include "vsgmn/errors.hpp"

namespace vsgmn {

namespace {

Tensor normal_matrix(std::size_t rows, std::size_t cols,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor w({rows, cols});
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& x : w.data()) x = scale * normal(rng);
  return w;
}

// 0/1 neighbor pattern from the adjacency values; every node must keep at
// least one neighbor.
Tensor neighbor_pattern(const Tensor& adjacency, const char* branch) {
  const std::size_t n = adjacency.rows();
  Tensor keep({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      keep(i, j) = adjacency(i, j) != 0.0 ? 1.0 : 0.0;
      any = any || keep(i, j) != 0.0;
    }
    if (!any) {
      throw DegenerateRowError(std::string(branch) + " node " +
                               std::to_string(i) +
                               " has an empty neighbor set");
    }
  }
  return keep;
}

void check_nodes(const NodePair& nodes, const Var& adjacency_visual,
                 const Var& adjacency_semantic) {
  const Tensor& hv = nodes.visual.value();
  const Tensor& hs = nodes.semantic.value();
  if (hv.rank() != 2 || hs.rank() != 2 || !hv.same_shape(hs)) {
    throw DimensionError("graph match layer: node sets " + hv.shape_str() +
                         " and " + hs.shape_str() + " must match");
  }
  const std::size_t n = hv.rows();
  const auto check_adj = [n](const Tensor& a, const char* which) {
    if (a.rank() != 2 || a.rows() != n || a.cols() != n) {
      throw DimensionError(std::string("graph match layer: ") + which +
                           " adjacency " + a.shape_str() + " is not " +
                           std::to_string(n) + " x " + std::to_string(n));
    }
  };
  check_adj(adjacency_visual.value(), "visual");
  check_adj(adjacency_semantic.value(), "semantic");
}

// sum_j alpha_ij h_j with alpha the temperature softmax of projected-state
// cosines over the kept neighbors.
Var attention_aggregate(const Var& h, const Var& w_m, const Var& adjacency,
                        double temperature, const char* branch) {
  const Tensor keep = neighbor_pattern(adjacency.value(), branch);
  const Var projected = l2_normalize_rows(matmul(h, w_m));
  const Var beta = matmul(projected, transpose(projected));
  const Var alpha = row_softmax(scalar_mul(beta, temperature), keep);
  return matmul(alpha, h);
}

// Per-edge messages for all ordered pairs, then a 0/1 selection matrix sums
// the kept ones into their receiver row.
Var propagation_messages(Tape& tape, const Var& h, const Var& adjacency,
                         const Var& w_msg, const Var& b_msg, const Var& ln_g,
                         const Var& ln_b, const char* branch) {
  const std::size_t n = h.value().rows();
  const Tensor keep = neighbor_pattern(adjacency.value(), branch);

  std::vector<std::size_t> receiver(n * n), sender(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      receiver[i * n + j] = i;
      sender[i * n + j] = j;
    }
  }
  const Var h_recv = gather_rows(h, std::move(receiver));
  const Var h_send = gather_rows(h, std::move(sender));
  const Var edge = reshape(adjacency, {n * n, 1});
  const Var packed = concat_cols({h_recv, h_send, edge});
  const Var messages = layer_norm_rows(
      relu(add_row_broadcast(matmul(packed, w_msg), b_msg)), ln_g, ln_b);

  Tensor select({n, n * n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      select(i, i * n + j) = keep(i, j);
  return matmul(tape.leaf(std::move(select)), messages);
}

}  // namespace

GraphMatchLayer GraphMatchLayer::attention_layer_params(
    std::size_t dim, double temperature, double cross_weight,
    const std::string& prefix, std::mt19937_64& rng) {
  if (dim == 0) throw ConfigError("graph match layer: zero node width");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("graph match layer: temperature must be finite and > 0");
  }
  if (!std::isfinite(cross_weight)) {
    throw ConfigError("graph match layer: cross weight must be finite");
  }
  GraphMatchLayer layer;
  layer.variant = LayerVariant::attention;
  layer.temperature = temperature;
  layer.cross_weight = cross_weight;
  layer.params.push_back({prefix + ".w_m", normal_matrix(dim, dim, rng)});
  return layer;
}

GraphMatchLayer GraphMatchLayer::propagation_layer_params(
    std::size_t dim, const std::string& prefix, std::mt19937_64& rng) {
  if (dim == 0) throw ConfigError("graph match layer: zero node width");
  GraphMatchLayer layer;
  layer.variant = LayerVariant::propagation;
  layer.params.push_back(
      {prefix + ".w_msg", normal_matrix(2 * dim + 1, dim, rng)});
  layer.params.push_back({prefix + ".b_msg", Tensor::zeros({dim})});
  layer.params.push_back({prefix + ".ln_msg_gain", Tensor::full({dim}, 1.0)});
  layer.params.push_back({prefix + ".ln_msg_bias", Tensor::zeros({dim})});
  layer.params.push_back(
      {prefix + ".w_node", normal_matrix(3 * dim, dim, rng)});
  layer.params.push_back({prefix + ".b_node", Tensor::zeros({dim})});
  layer.params.push_back({prefix + ".ln_node_gain", Tensor::full({dim}, 1.0)});
  layer.params.push_back({prefix + ".ln_node_bias", Tensor::zeros({dim})});
  return layer;
}

std::vector<Parameter*> GraphMatchLayer::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : params) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> GraphMatchLayer::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : params) out.push_back(&p);
  return out;
}

NodePair attention_layer(Tape& tape, GraphMatchLayer& layer,
                         const NodePair& nodes, const Var& adjacency_visual,
                         const Var& adjacency_semantic, bool cross_graph,
                         BoundParams& bound) {
  if (layer.variant != LayerVariant::attention) {
    throw ContractError("attention_layer: layer holds propagation weights");
  }
  check_nodes(nodes, adjacency_visual, adjacency_semantic);
  const Var w_m = bound.bind(tape, layer.params[0]);

  Var next_v = attention_aggregate(nodes.visual, w_m, adjacency_visual,
                                   layer.temperature, "visual");
  Var next_s = attention_aggregate(nodes.semantic, w_m, adjacency_semantic,
                                   layer.temperature, "semantic");
  if (cross_graph) {
    next_v = add(next_v, scalar_mul(sub(nodes.visual, nodes.semantic),
                                    layer.cross_weight));
    next_s = add(next_s, scalar_mul(sub(nodes.semantic, nodes.visual),
                                    layer.cross_weight));
  }
  return {next_v, next_s};
}

NodePair propagation_layer(Tape& tape, GraphMatchLayer& layer,
                           const NodePair& nodes, const Var& adjacency_visual,
                           const Var& adjacency_semantic, bool cross_graph,
                           BoundParams& bound) {
  if (layer.variant != LayerVariant::propagation) {
    throw ContractError("propagation_layer: layer holds attention weights");
  }
  check_nodes(nodes, adjacency_visual, adjacency_semantic);
  const std::size_t n = nodes.visual.value().rows();
  const std::size_t dim = nodes.visual.value().cols();

  const Var w_msg = bound.bind(tape, layer.params[0]);
  const Var b_msg = bound.bind(tape, layer.params[1]);
  const Var ln_msg_g = bound.bind(tape, layer.params[2]);
  const Var ln_msg_b = bound.bind(tape, layer.params[3]);
  const Var w_node = bound.bind(tape, layer.params[4]);
  const Var b_node = bound.bind(tape, layer.params[5]);
  const Var ln_node_g = bound.bind(tape, layer.params[6]);
  const Var ln_node_b = bound.bind(tape, layer.params[7]);

  const Var sum_v =
      propagation_messages(tape, nodes.visual, adjacency_visual, w_msg, b_msg,
                           ln_msg_g, ln_msg_b, "visual");
  const Var sum_s =
      propagation_messages(tape, nodes.semantic, adjacency_semantic, w_msg,
                           b_msg, ln_msg_g, ln_msg_b, "semantic");

  // With cross-graph messaging off the cross slot is a constant zero block,
  // keeping the node perceptron's shape independent of the setting.
  Var cross_v, cross_s;
  if (cross_graph) {
    cross_v = sub(nodes.visual, nodes.semantic);
    cross_s = sub(nodes.semantic, nodes.visual);
  } else {
    cross_v = tape.leaf(Tensor::zeros({n, dim}));
    cross_s = tape.leaf(Tensor::zeros({n, dim}));
  }

  const auto update = [&](const Var& h, const Var& msum, const Var& cross) {
    const Var packed = concat_cols({h, msum, cross});
    return layer_norm_rows(
        relu(add_row_broadcast(matmul(packed, w_node), b_node)), ln_node_g,
        ln_node_b);
  };
  return {update(nodes.visual, sum_v, cross_v),
          update(nodes.semantic, sum_s, cross_s)};
}

NodePair apply_layer(Tape& tape, GraphMatchLayer& layer, const NodePair& nodes,
                     const Var& adjacency_visual, const Var& adjacency_semantic,
                     bool cross_graph, BoundParams& bound) {
  return layer.variant == LayerVariant::attention
             ? attention_layer(tape, layer, nodes, adjacency_visual,
                               adjacency_semantic, cross_graph, bound)
             : propagation_layer(tape, layer, nodes, adjacency_visual,
                                 adjacency_semantic, cross_graph, bound);
}

DistributionPair relation_distributions(Tape& tape, const NodePair& nodes) {
  const auto one = [&tape](const Var& h) {
    const Var normalized = l2_normalize_rows(h);
    return row_softmax(matmul(normalized, transpose(normalized)));
  };
  return {one(nodes.visual), one(nodes.semantic)};
}

GmnState run_gmn(Tape& tape, const BuiltGraphs& graphs,
                 std::vector<GraphMatchLayer>& layers, bool cross_graph,
                 BoundParams& bound) {
  if (layers.empty()) {
    throw ConfigError("run_gmn: need at least one graph match layer");
  }
  GmnState state;
  state.nodes.push_back({graphs.visual_nodes, graphs.semantic_nodes});
  for (GraphMatchLayer& layer : layers) {
    const NodePair next =
        apply_layer(tape, layer, state.nodes.back(), graphs.adjacency_visual,
                    graphs.adjacency_semantic, cross_graph, bound);
    state.nodes.push_back(next);
    state.distributions.push_back(relation_distributions(tape, next));
  }
  return state;
}

}  // namespace vsgmn
