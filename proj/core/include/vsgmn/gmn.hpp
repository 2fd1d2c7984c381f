#pragma once

#include <random>
#include <string>
#include <vector>

#include "vsgmn/gbn.hpp"
#include "vsgmn/optimizer.hpp"
#include "vsgmn/tape.hpp"

namespace vsgmn {

enum class LayerVariant { attention, propagation };

// One node-update layer. Its weights are shared between the visual and the
// semantic branch (the two graphs pass through the same layer), so gradients
// from both branches accumulate on one parameter set.
//
// attention:   beta_ij = cos(W h_i, W h_j); alpha = softmax over the neighbor
//              set of temperature * beta; update = sum_j alpha_ij h_j plus
//              cross_weight * (h_i - h_i') when cross-graph messaging is on.
// propagation: per-edge perceptron on (h_receiver, h_sender, edge weight)
//              with relu + layer norm, summed over the neighbor set, then a
//              node perceptron on (h_i, message sum, cross difference) with
//              relu + layer norm.
struct GraphMatchLayer {
  LayerVariant variant = LayerVariant::attention;
  double temperature = 10.0;   // attention only
  double cross_weight = 1.0;   // attention only
  std::vector<Parameter> params;

  static GraphMatchLayer attention_layer_params(std::size_t dim,
                                                double temperature,
                                                double cross_weight,
                                                const std::string& prefix,
                                                std::mt19937_64& rng);
  static GraphMatchLayer propagation_layer_params(std::size_t dim,
                                                  const std::string& prefix,
                                                  std::mt19937_64& rng);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

struct NodePair {
  Var visual;
  Var semantic;
};

struct DistributionPair {
  Var visual;
  Var semantic;
};

// The neighbor set of node i is the nonzero pattern of adjacency row i; a row
// without any nonzero entry throws DegenerateRowError. The adjacency entries
// also serve as edge features for the propagation variant. Node sets of both
// branches must be the same size (matched node pairs share an index).
NodePair attention_layer(Tape& tape, GraphMatchLayer& layer,
                         const NodePair& nodes, const Var& adjacency_visual,
                         const Var& adjacency_semantic, bool cross_graph,
                         BoundParams& bound);

NodePair propagation_layer(Tape& tape, GraphMatchLayer& layer,
                           const NodePair& nodes, const Var& adjacency_visual,
                           const Var& adjacency_semantic, bool cross_graph,
                           BoundParams& bound);

NodePair apply_layer(Tape& tape, GraphMatchLayer& layer, const NodePair& nodes,
                     const Var& adjacency_visual, const Var& adjacency_semantic,
                     bool cross_graph, BoundParams& bound);

// Row-stochastic relation distributions: softmax over cosine similarities of
// every node pair within each branch.
DistributionPair relation_distributions(Tape& tape, const NodePair& nodes);

// nodes[0] holds the input states; nodes[l] the states after layer l.
// distributions[l-1] describes nodes[l] (one entry per layer).
struct GmnState {
  std::vector<NodePair> nodes;
  std::vector<DistributionPair> distributions;
};

GmnState run_gmn(Tape& tape, const BuiltGraphs& graphs,
                 std::vector<GraphMatchLayer>& layers, bool cross_graph,
                 BoundParams& bound);

}  // namespace vsgmn
