#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vsgmn/gmn.hpp"
#include "vsgmn/tensor.hpp"

namespace vsgmn {

// |analytic - numeric| / max(|analytic|, |numeric|, 1), so tiny gradients are
// compared absolutely and large ones relatively.
double relative_error(double analytic, double numeric);

// Central difference (f(x+eps) - f(x-eps)) / (2 eps) of a scalar function
// re-evaluated around one mutable storage cell. `storage` is restored before
// returning.
double central_difference(const std::function<double()>& forward,
                          double& storage, double eps);

struct GradCheckGroup {
  std::string name;
  std::size_t entries = 0;
  double max_rel_err = 0;
};

struct GradCheckReport {
  LayerVariant variant = LayerVariant::attention;
  double threshold = 0;
  double epsilon = 0;
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0;
  bool passed = false;
};

// Dimensions of the self-contained model check: a tiny synthetic dataset,
// one batch, the full weighted loss with every term active.
struct GradCheckOptions {
  LayerVariant variant = LayerVariant::attention;
  std::size_t seen_classes = 4;  // also the batch size
  std::size_t unseen_classes = 3;
  std::size_t attribute_dim = 6;
  std::size_t feature_dim = 8;
  std::size_t layers = 2;
  double threshold = 1e-4;
  double epsilon = 1e-5;
  std::uint64_t seed = 11;
};

// Compares every analytic model gradient against central differences of the
// loss, grouped per parameter. Deterministic in the options.
GradCheckReport gradcheck_model(const GradCheckOptions& options);

}  // namespace vsgmn
