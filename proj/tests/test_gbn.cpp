#include <doctest.h>

#include "naive_reference.hpp"
#include "test_helpers.hpp"
#include "vsgmn/errors.hpp"
#include "vsgmn/gbn.hpp"

using namespace vsgmn;

TEST_SUITE_BEGIN("gbn");

namespace {

ZslDataset proto_dataset() {
  ZslDataset ds;
  ds.features = Tensor::from_rows(
      {{0, 0}, {2, 4}, {1, 1}, {5, 5}, {9, 9}});
  ds.labels = {0, 0, 1, 1, 2};
  ds.prototypes = Tensor::from_rows({{1, 0}, {0, 1}, {0.9, 0.1}});
  ds.seen_classes = {0, 1};
  ds.unseen_classes = {2};
  ds.train_instances = {0, 1, 2, 3};
  ds.test_instances = {4};
  return ds;
}

}  // namespace

TEST_CASE("visual prototypes are per-class training means") {
  ZslDataset ds = proto_dataset();
  VisualPrototypeTable table = compute_visual_prototypes(ds);
  REQUIRE(table.class_ids == std::vector<int>{0, 1});
  CHECK(table.prototypes(0, 0) == 1.0);  // mean of (0,0) and (2,4)
  CHECK(table.prototypes(0, 1) == 2.0);
  CHECK(table.prototypes(1, 0) == 3.0);  // mean of (1,1) and (5,5)
  CHECK(table.prototypes(1, 1) == 3.0);
  CHECK(table.counts == std::vector<std::size_t>{2, 2});

  // A class with a single sample keeps that sample; order cannot matter.
  ZslDataset permuted = ds;
  permuted.train_instances = {3, 2, 1, 0};
  VisualPrototypeTable again = compute_visual_prototypes(permuted);
  CHECK(test::max_abs_diff(again.prototypes, table.prototypes) == 0.0);

  ZslDataset missing = ds;
  missing.train_instances = {0, 1};
  CHECK(test::throws_containing<DatasetError>(
      [&] { (void)compute_visual_prototypes(missing); }, "1"));
}

TEST_CASE("virtual features pick semantically nearest visual prototypes") {
  ZslDataset ds = proto_dataset();
  VisualPrototypeTable table = compute_visual_prototypes(ds);
  SemanticPrototypeSet semantics =
      standardize_prototypes(ds.prototypes, ds.seen_classes);

  // Raw-space cosine: unseen (0.9, 0.1) is far closer to (1,0) than (0,1),
  // so top-1 copies seen class 0's visual prototype.
  Tensor top1 = generate_virtual_unseen_features(table, semantics,
                                                 ds.unseen_classes, 1);
  REQUIRE(top1.rows() == 1);
  CHECK(top1(0, 0) == 1.0);
  CHECK(top1(0, 1) == 2.0);

  // top_k = C_s averages every seen visual prototype; larger k clamps.
  Tensor both = generate_virtual_unseen_features(table, semantics,
                                                 ds.unseen_classes, 2);
  CHECK(both(0, 0) == 2.0);
  CHECK(both(0, 1) == 2.5);
  Tensor clamped = generate_virtual_unseen_features(table, semantics,
                                                    ds.unseen_classes, 50);
  CHECK(test::max_abs_diff(clamped, both) == 0.0);

  CHECK_THROWS_AS((void)generate_virtual_unseen_features(
                      table, semantics, ds.unseen_classes, 0),
                  ConfigError);
}

TEST_CASE("virtual feature ties break toward the lower seen class id") {
  VisualPrototypeTable table;
  table.prototypes = Tensor::from_rows({{10, 0}, {0, 10}});
  table.class_ids = {0, 1};
  table.counts = {1, 1};
  // Unseen prototype equidistant from both seen prototypes.
  SemanticPrototypeSet semantics;
  semantics.raw = Tensor::from_rows({{1, 0}, {0, 1}, {1, 1}});
  Tensor v = generate_virtual_unseen_features(table, semantics, {2}, 1);
  CHECK(v(0, 0) == 10.0);
  CHECK(v(0, 1) == 0.0);
}

TEST_CASE("assemble_batch stacks samples then virtual rows") {
  Tensor samples = Tensor::from_rows({{1, 1}, {2, 2}, {3, 3}});
  Tensor virt = Tensor::from_rows({{7, 7}, {8, 8}});
  Batch batch = assemble_batch(samples, {4, 0, 2}, virt, {5, 9});

  CHECK(batch.n_real == 3);
  CHECK(batch.n_virtual == 2);
  REQUIRE(batch.rows.rows() == 5);
  CHECK(batch.rows(3, 0) == 7.0);
  CHECK(batch.rows(4, 1) == 8.0);
  CHECK(batch.class_ids == std::vector<int>{4, 0, 2, 5, 9});

  // Degenerate: no sampled rows leaves exactly the virtual rows.
  Batch only_virtual = assemble_batch(Tensor({0, 2}), {}, virt, {5, 9});
  CHECK(only_virtual.n_real == 0);
  CHECK(only_virtual.size() == 2);
  CHECK(only_virtual.class_ids == std::vector<int>{5, 9});
}

TEST_CASE("virtual column mask zeroes exactly the virtual columns") {
  Tensor mask = virtual_column_mask(2, 1);
  REQUIRE(mask.shape() == std::vector<std::size_t>{3, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(mask(i, 0) == 1.0);
    CHECK(mask(i, 1) == 1.0);
    CHECK(mask(i, 2) == 0.0);
  }
  // No virtual nodes: the mask is all ones (adjacency unchanged).
  CHECK(test::max_abs_diff(virtual_column_mask(3, 0), Tensor::full({3, 3}, 1.0)) ==
        0.0);
}

TEST_CASE("embedding shapes, identity and annihilation") {
  auto gen = test::rng(21);
  MlpEmbedding net(4, 3, 2, gen);
  CHECK(net.input_dim() == 4);
  CHECK(net.output_dim() == 2);
  CHECK(net.parameters().size() == 4);  // w1, b1, w2, b2

  auto id = MlpEmbedding::identity(3);
  Tensor x = test::random_tensor(gen, {5, 3});
  CHECK(test::max_abs_diff(id->forward_plain(x), x) == 0.0);

  // Zeroed parameters annihilate every input.
  MlpEmbedding zero(3, 0, 2, gen);
  for (Parameter* p : zero.parameters())
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.0;
  Tensor out = zero.forward_plain(x);
  CHECK(test::max_abs_diff(out, Tensor({5, 2})) == 0.0);
}

TEST_CASE("taped and plain embedding passes agree") {
  auto gen = test::rng(22);
  MlpEmbedding net(4, 6, 3, gen);
  Tensor x = test::random_tensor(gen, {7, 4});

  Tape tape;
  BoundParams bound;
  Tensor taped = net.forward(tape, tape.leaf(x), bound).value();
  CHECK(test::max_abs_diff(taped, net.forward_plain(x)) == 0.0);
  CHECK(bound.parameters().size() == 4);
}

TEST_CASE("embedding gradients match finite differences") {
  auto gen = test::rng(23);
  MlpEmbedding net(3, 4, 2, gen);
  Tensor x = test::random_tensor(gen, {4, 3});

  // Differentiate mean(embed(x)) with respect to every net parameter.
  auto loss_value = [&] {
    Tape tape;
    BoundParams bound;
    return mean(net.forward(tape, tape.leaf(x), bound)).value().item();
  };
  Tape tape;
  BoundParams bound;
  Var out = mean(net.forward(tape, tape.leaf(x), bound));
  GradientMap grads = tape.backward(out);

  double worst = 0.0;
  for (const auto& [param, var] : bound.entries()) {
    Tensor analytic = grads.grad(var);
    for (std::size_t i = 0; i < param->value.size(); ++i) {
      double numeric = central_difference(loss_value, param->value[i], 1e-5);
      worst = std::max(worst, relative_error(analytic[i], numeric));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("embed validates the batch feature width") {
  auto gen = test::rng(24);
  MlpEmbedding net(4, 0, 2, gen);
  Batch batch;
  batch.rows = Tensor({3, 5});
  batch.n_real = 3;
  Tape tape;
  BoundParams bound;
  CHECK_THROWS_AS((void)embed(net, tape, batch, bound), DimensionError);
}

TEST_CASE("built graphs: cosine adjacency values and frozen cases") {
  Tape tape;
  // Identical rows produce all-ones adjacency; orthogonal rows the identity.
  Var same = tape.leaf(Tensor::from_rows({{1, 1}, {2, 2}}));
  BuiltGraphs g1 = build_graphs(tape, same, Tensor::from_rows({{1, 0}, {0, 1}}),
                                2, 0, false);
  CHECK(test::max_abs_diff(g1.adjacency_visual.value(),
                           Tensor::full({2, 2}, 1.0)) < 1e-12);
  CHECK(test::max_abs_diff(g1.adjacency_semantic.value(), Tensor::identity(2)) <
        1e-12);

  // Off-diagonal cosine of (1,0) against (1,1) is 1/sqrt(2).
  Var pair = tape.leaf(Tensor::from_rows({{1, 0}, {1, 1}}));
  BuiltGraphs g2 = build_graphs(tape, pair, Tensor::identity(2), 2, 0, false);
  CHECK(g2.adjacency_visual.value()(0, 1) ==
        doctest::Approx(0.7071067811865475).epsilon(1e-14));
  CHECK(g2.adjacency_visual.value()(1, 0) ==
        doctest::Approx(0.7071067811865475).epsilon(1e-14));
}

TEST_CASE("built graphs: symmetry, unit diagonal, agreement with the oracle") {
  auto gen = test::rng(25);
  Tensor nodes = test::random_tensor(gen, {6, 4});
  Tensor protos = test::random_tensor(gen, {6, 4});

  Tape tape;
  BuiltGraphs graphs =
      build_graphs(tape, tape.leaf(nodes), protos, 4, 2, false);

  const Tensor& adj = graphs.adjacency_visual.value();
  Tensor want = naive::cosine_adjacency(nodes);
  CHECK(test::max_abs_diff(adj, want) < 1e-12);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(adj(i, i) == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(adj(i, j) == doctest::Approx(adj(j, i)).epsilon(1e-9));
  }
  CHECK(test::max_abs_diff(graphs.adjacency_semantic.value(),
                           naive::cosine_adjacency(protos)) < 1e-12);
}

TEST_CASE("masked graphs zero virtual columns of the visual adjacency only") {
  auto gen = test::rng(26);
  Tensor nodes = test::random_tensor(gen, {5, 3}, 0.2, 1.0);
  Tensor protos = test::random_tensor(gen, {5, 3}, 0.2, 1.0);

  Tape tape;
  BuiltGraphs masked = build_graphs(tape, tape.leaf(nodes), protos, 3, 2, true);
  const Tensor& adj = masked.adjacency_visual.value();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(adj(i, 3) == 0.0);
    CHECK(adj(i, 4) == 0.0);
    // Seen columns, including the virtual rows' own, stay intact.
    for (std::size_t j = 0; j < 3; ++j) CHECK(adj(i, j) != 0.0);
  }
  // The semantic adjacency is never masked.
  const Tensor& sem = masked.adjacency_semantic.value();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 3; j < 5; ++j) CHECK(sem(i, j) != 0.0);
}

TEST_CASE("semantic adjacency depends only on the class id sequence") {
  // Same prototype rows matched to two different embedding batches.
  auto gen = test::rng(27);
  Tensor protos = test::random_tensor(gen, {4, 3});
  Tensor batch_a = test::random_tensor(gen, {4, 3});
  Tensor batch_b = test::random_tensor(gen, {4, 3});

  Tape tape;
  BuiltGraphs ga = build_graphs(tape, tape.leaf(batch_a), protos, 4, 0, false);
  BuiltGraphs gb = build_graphs(tape, tape.leaf(batch_b), protos, 4, 0, false);
  CHECK(test::max_abs_diff(ga.adjacency_semantic.value(),
                           gb.adjacency_semantic.value()) == 0.0);
}

TEST_SUITE_END();
