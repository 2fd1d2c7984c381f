#include <doctest.h>

#include "test_helpers.hpp"
#include "vsgmn/errors.hpp"
#include "vsgmn/optimizer.hpp"

using namespace vsgmn;

TEST_SUITE_BEGIN("optimizer");

namespace {
Parameter scalar_param(const std::string& name, double value) {
  return Parameter{name, Tensor::scalar(value)};
}
}  // namespace

TEST_CASE("zero learning rate leaves parameters unchanged") {
  SgdOptimizer opt({0.0, 0.9, 0.1});
  Parameter p = scalar_param("p", 3.25);
  opt.step(p, Tensor::scalar(100.0));
  CHECK(p.value.item() == 3.25);
}

TEST_CASE("plain gradient step: lr=0.1, param=1, grad=2 -> 0.8") {
  SgdOptimizer opt({0.1, 0.0, 0.0});
  Parameter p = scalar_param("p", 1.0);
  opt.step(p, Tensor::scalar(2.0));
  CHECK(p.value.item() == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("momentum accumulates: two unit gradients at lr=1 -> -2.9") {
  SgdOptimizer opt({1.0, 0.9, 0.0});
  Parameter p = scalar_param("p", 0.0);
  opt.step(p, Tensor::scalar(1.0));
  CHECK(p.value.item() == doctest::Approx(-1.0).epsilon(1e-15));
  opt.step(p, Tensor::scalar(1.0));
  CHECK(p.value.item() == doctest::Approx(-2.9).epsilon(1e-15));
  CHECK(opt.velocity("p").item() == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("weight decay folds into the gradient") {
  // v = 0.5 * 0 + 1 + 0.1 * 2 = 1.2; p = 2 - 0.25 * 1.2 = 1.7
  SgdOptimizer opt({0.25, 0.5, 0.1});
  Parameter p = scalar_param("p", 2.0);
  opt.step(p, Tensor::scalar(1.0));
  CHECK(p.value.item() == doctest::Approx(1.7).epsilon(1e-14));
}

TEST_CASE("velocity buffers are independent per parameter name") {
  SgdOptimizer opt({1.0, 0.9, 0.0});
  Parameter a = scalar_param("a", 0.0), b = scalar_param("b", 0.0);
  opt.step(a, Tensor::scalar(1.0));
  opt.step(b, Tensor::scalar(-1.0));
  opt.step(a, Tensor::scalar(1.0));
  CHECK(a.value.item() == doctest::Approx(-2.9).epsilon(1e-15));
  CHECK(b.value.item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("vector step applies pairwise and validates sizes") {
  SgdOptimizer opt({0.5, 0.0, 0.0});
  Parameter a = scalar_param("a", 1.0), b = scalar_param("b", 2.0);
  std::vector<Parameter*> params = {&a, &b};
  std::vector<Tensor> grads = {Tensor::scalar(2.0), Tensor::scalar(2.0)};
  opt.step(params, grads);
  CHECK(a.value.item() == doctest::Approx(0.0));
  CHECK(b.value.item() == doctest::Approx(1.0));

  grads.pop_back();
  CHECK_THROWS_AS(opt.step(params, grads), ContractError);
}

TEST_CASE("gradient shape must match the parameter") {
  SgdOptimizer opt({0.1, 0.0, 0.0});
  Parameter p{"p", Tensor::zeros({2, 2})};
  CHECK_THROWS_AS(opt.step(p, Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(SgdOptimizer({-0.1, 0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(SgdOptimizer({0.1, 1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(SgdOptimizer({0.1, -0.2, 0.0}), ConfigError);
  CHECK_THROWS_AS(SgdOptimizer({0.1, 0.0, -1.0}), ConfigError);
}

TEST_CASE("bound parameters dedupe by identity and accumulate shared grads") {
  Parameter shared{"shared", Tensor::from_rows({{1.0, 2.0}})};
  Tape tape;
  BoundParams bound;
  Var first = bound.bind(tape, shared);
  Var second = bound.bind(tape, shared);
  CHECK(first.id() == second.id());  // same leaf, not a copy
  CHECK(bound.parameters().size() == 1);

  // Both uses of the shared leaf accumulate into one adjoint.
  GradientMap grads = tape.backward(sum(add(first, second)));
  std::vector<Tensor> g = bound.gradients(grads);
  REQUIRE(g.size() == 1);
  CHECK(g[0][0] == 2.0);
  CHECK(g[0][1] == 2.0);
}

TEST_CASE("rebinding on a different tape is rejected") {
  Parameter p{"p", Tensor::scalar(1.0)};
  Tape a, b;
  BoundParams bound;
  bound.bind(a, p);
  CHECK_THROWS_AS(bound.bind(b, p), ContractError);
}

TEST_SUITE_END();
