#include "vsgmn/gradcheck.hpp"

#include <cmath>

#include "vsgmn/dataset.hpp"
#include "vsgmn/errors.hpp"
#include "vsgmn/train.hpp"

namespace vsgmn {

double relative_error(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) / scale;
}

double central_difference(const std::function<double()>& forward,
                          double& storage, double eps) {
  const double saved = storage;
  storage = saved + eps;
  const double plus = forward();
  storage = saved - eps;
  const double minus = forward();
  storage = saved;
  return (plus - minus) / (2.0 * eps);
}

GradCheckReport gradcheck_model(const GradCheckOptions& options) {
  if (options.epsilon <= 0 || options.threshold <= 0) {
    throw ConfigError("gradcheck: epsilon and threshold must be > 0");
  }

  SyntheticConfig synth;
  synth.seen_classes = options.seen_classes;
  synth.unseen_classes = options.unseen_classes;
  synth.attribute_dim = options.attribute_dim;
  synth.feature_dim = options.feature_dim;
  synth.samples_per_class = 3;
  synth.noise_scale = 0.3;
  synth.train_fraction = 1.0;  // only training rows matter here
  synth.seed = options.seed;
  const ZslDataset ds = generate_synthetic_dataset(synth);

  TrainConfig config;
  config.epochs = 1;
  config.batch_size = 0;  // every seen class once
  config.layers = options.layers;
  config.variant = options.variant;
  config.hidden_dim = 2 * options.attribute_dim;
  config.seed = options.seed;
  // Exercise all four terms with non-trivial weights.
  config.weights.reg = 0.5;
  config.weights.sc = 0.5;
  config.weights.crc = 0.5;
  VsgmnModel model = build_model(ds, config);

  // One deterministic batch: the first of epoch 0.
  BalancedBatchSampler sampler(ds, config.batch_size, config.seed);
  const Batch batch = make_batch(model, ds, sampler.epoch(0).front());

  const auto loss_value = [&model, &batch]() {
    Tape tape;
    return forward_batch(model, tape, batch).total.value().item();
  };

  // Analytic gradients once; parameters enumerated in bind order.
  Tape tape;
  ForwardResult fwd = forward_batch(model, tape, batch);
  const GradientMap grads = tape.backward(fwd.total);

  GradCheckReport report;
  report.variant = options.variant;
  report.threshold = options.threshold;
  report.epsilon = options.epsilon;
  for (const auto& [param, var] : fwd.bound.entries()) {
    const Tensor analytic = grads.grad(var);
    GradCheckGroup group;
    group.name = param->name;
    group.entries = analytic.size();
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double numeric =
          central_difference(loss_value, param->value[i], options.epsilon);
      group.max_rel_err =
          std::max(group.max_rel_err, relative_error(analytic[i], numeric));
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  report.passed = report.max_rel_err < options.threshold;
  return report;
}

}  // namespace vsgmn
