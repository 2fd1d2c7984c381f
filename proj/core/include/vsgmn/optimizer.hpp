#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vsgmn/tape.hpp"
#include "vsgmn/tensor.hpp"

namespace vsgmn {

// A named trainable tensor. Names must be unique within a model; they key
// the optimizer's velocity buffers and the gradient-check report.
struct Parameter {
  std::string name;
  Tensor value;
};

// Associates parameters with their tape leaves for one forward pass. Binding
// the same parameter twice returns the first leaf, so weights shared between
// the two branches accumulate both gradient contributions on one node.
class BoundParams {
 public:
  Var bind(Tape& tape, Parameter& param);

  // Bound parameters in first-bind order, and their gradients after a
  // backward sweep (aligned element-for-element).
  std::vector<Parameter*> parameters() const;
  std::vector<Tensor> gradients(const GradientMap& grads) const;
  const std::vector<std::pair<Parameter*, Var>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<Parameter*, Var>> entries_;
  std::unordered_map<const Parameter*, std::size_t> index_;
};

struct SgdConfig {
  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// SGD with classical momentum and L2 weight decay folded into the gradient:
//   v      <- momentum * v + grad + weight_decay * param
//   param  <- param - learning_rate * v
// Velocity buffers start at zero and are keyed by parameter name.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg);  // validates ranges (ConfigError)

  void step(Parameter& param, const Tensor& grad);
  void step(const std::vector<Parameter*>& params,
            const std::vector<Tensor>& grads);

  const SgdConfig& config() const { return cfg_; }
  const Tensor& velocity(const std::string& name) const;  // ContractError

 private:
  SgdConfig cfg_;
  std::unordered_map<std::string, Tensor> velocity_;
};

}  // namespace vsgmn
