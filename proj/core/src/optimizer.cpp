#include "vsgmn/optimizer.hpp"

#include <cmath>

#include "vsgmn/errors.hpp"

namespace vsgmn {

Var BoundParams::bind(Tape& tape, Parameter& param) {
  auto it = index_.find(&param);
  if (it != index_.end()) {
    const Var& existing = entries_[it->second].second;
    if (existing.tape() != &tape) {
      throw ContractError("bind: parameter '" + param.name +
                          "' already bound on a different tape");
    }
    return existing;
  }
  const Var leaf = tape.leaf(param.value);
  index_.emplace(&param, entries_.size());
  entries_.emplace_back(&param, leaf);
  return leaf;
}

std::vector<Parameter*> BoundParams::parameters() const {
  std::vector<Parameter*> out;
  out.reserve(entries_.size());
  for (const auto& [param, var] : entries_) out.push_back(param);
  return out;
}

std::vector<Tensor> BoundParams::gradients(const GradientMap& grads) const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [param, var] : entries_) out.push_back(grads.grad(var));
  return out;
}

SgdOptimizer::SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("sgd: learning_rate must be finite and >= 0");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("sgd: momentum must lie in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
    throw ConfigError("sgd: weight_decay must be finite and >= 0");
  }
}

void SgdOptimizer::step(Parameter& param, const Tensor& grad) {
  require_same_shape(param.value, grad, "sgd step");
  auto [it, inserted] =
      velocity_.try_emplace(param.name, Tensor::zeros(param.value.shape()));
  Tensor& v = it->second;
  if (!inserted && !v.same_shape(grad)) {
    throw DimensionError("sgd step: parameter '" + param.name +
                         "' changed shape from " + v.shape_str() + " to " +
                         grad.shape_str());
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = cfg_.momentum * v[i] + grad[i] + cfg_.weight_decay * param.value[i];
    param.value[i] -= cfg_.learning_rate * v[i];
  }
}

void SgdOptimizer::step(const std::vector<Parameter*>& params,
                        const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw ContractError("sgd step: " + std::to_string(params.size()) +
                        " parameters but " + std::to_string(grads.size()) +
                        " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) step(*params[i], grads[i]);
}

const Tensor& SgdOptimizer::velocity(const std::string& name) const {
  auto it = velocity_.find(name);
  if (it == velocity_.end()) {
    throw ContractError("sgd: no velocity recorded for parameter '" + name +
                        "'");
  }
  return it->second;
}

}  // namespace vsgmn
