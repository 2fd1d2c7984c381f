#include <doctest.h>

#include <fstream>
#include <limits>

#include "test_helpers.hpp"
#include "vsgmn/config.hpp"
#include "vsgmn/errors.hpp"

using namespace vsgmn;

TEST_SUITE_BEGIN("config");

TEST_CASE("parse_config_text: comments, blanks, precedence, diagnostics") {
  ConfigMap map = parse_config_text(
      "# leading comment\n"
      "\n"
      "epochs = 10   # trailing comment\n"
      "  gamma=0.5\n"
      "epochs = 20\n",
      "demo.cfg");
  CHECK(map.size() == 2);
  CHECK(map.at("epochs") == "20");  // the last assignment wins
  CHECK(map.at("gamma") == "0.5");

  CHECK(test::throws_containing<ConfigError>(
      [] { (void)parse_config_text("epochs\n", "demo.cfg"); }, "demo.cfg:1"));
  CHECK(test::throws_containing<ConfigError>(
      [] { (void)parse_config_text("ok = 1\n= 3\n", "demo.cfg"); },
      "demo.cfg:2"));
  CHECK_THROWS_AS((void)parse_config_file("/nonexistent/vsgmn.cfg"),
                  IngestionError);
}

TEST_CASE("apply_config_entry covers every key") {
  TrainConfig cfg;
  apply_config_entry(cfg, "epochs", "7");
  apply_config_entry(cfg, "batch_size", "3");
  apply_config_entry(cfg, "top_k", "4");
  apply_config_entry(cfg, "layers", "1");
  apply_config_entry(cfg, "variant", "propagation");
  apply_config_entry(cfg, "temperature", "2.5");
  apply_config_entry(cfg, "cross_weight", "0.25");
  apply_config_entry(cfg, "lambda_reg", "0.9");
  apply_config_entry(cfg, "lambda_sc", "0.8");
  apply_config_entry(cfg, "lambda_crc", "0.7");
  apply_config_entry(cfg, "learning_rate", "0.125");
  apply_config_entry(cfg, "momentum", "0.5");
  apply_config_entry(cfg, "weight_decay", "0.001");
  apply_config_entry(cfg, "seed", "42");
  apply_config_entry(cfg, "hidden_dim", "16");
  apply_config_entry(cfg, "gamma", "0.33");
  apply_config_entry(cfg, "graph_match_enabled", "false");
  apply_config_entry(cfg, "mask_enabled", "0");
  apply_config_entry(cfg, "cross_graph_enabled", "true");
  apply_config_entry(cfg, "ace_pool", "all");

  CHECK(cfg.epochs == 7);
  CHECK(cfg.batch_size == 3);
  CHECK(cfg.top_k == 4);
  CHECK(cfg.layers == 1);
  CHECK(cfg.variant == LayerVariant::propagation);
  CHECK(cfg.temperature == 2.5);
  CHECK(cfg.cross_weight == 0.25);
  CHECK(cfg.weights.reg == 0.9);
  CHECK(cfg.weights.sc == 0.8);
  CHECK(cfg.weights.crc == 0.7);
  CHECK(cfg.optimizer.learning_rate == 0.125);
  CHECK(cfg.optimizer.momentum == 0.5);
  CHECK(cfg.optimizer.weight_decay == 0.001);
  CHECK(cfg.seed == 42);
  CHECK(cfg.hidden_dim == 16);
  CHECK(cfg.gamma == 0.33);
  CHECK_FALSE(cfg.graph_match_enabled);
  CHECK_FALSE(cfg.mask_enabled);
  CHECK(cfg.cross_graph_enabled);
  CHECK(cfg.ace_pool == AcePool::all);

  apply_config_entry(cfg, "ablation", "full");
  CHECK(cfg.graph_match_enabled);
  CHECK(cfg.mask_enabled);
}

TEST_CASE("apply_config_entry rejects bad keys and bad values") {
  TrainConfig cfg;
  CHECK(test::throws_containing<ConfigError>(
      [&] { apply_config_entry(cfg, "lerning_rate", "0.1"); }, "lerning_rate"));
  CHECK_THROWS_AS(apply_config_entry(cfg, "epochs", "three"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "epochs", "-2"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "gamma", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "variant", "linear"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "ablation", "nope"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "mask_enabled", "maybe"),
                  ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "ace_pool", "some"), ConfigError);
}

TEST_CASE("make_train_config applies the ablation preset last") {
  // Map order would put 'ablation' first alphabetically among these keys;
  // the preset must still override the individual flags.
  ConfigMap entries = {
      {"ablation", "baseline"},
      {"graph_match_enabled", "true"},
      {"mask_enabled", "true"},
      {"lambda_crc", "0.5"},
  };
  TrainConfig cfg = make_train_config(entries);
  CHECK_FALSE(cfg.graph_match_enabled);
  CHECK_FALSE(cfg.mask_enabled);
  CHECK(cfg.weights.crc == 0.0);

  // Validation runs on the merged result.
  CHECK_THROWS_AS((void)make_train_config({{"epochs", "0"}}), ConfigError);
  CHECK_THROWS_AS((void)make_train_config({{"momentum", "1.0"}}), ConfigError);
  CHECK_THROWS_AS(
      (void)make_train_config({{"layers", "0"}, {"graph_match_enabled",
                                                 "true"}}),
      ConfigError);
}

TEST_CASE("config validation rejects out-of-range values directly") {
  TrainConfig cfg;
  cfg.top_k = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.temperature = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.weights.reg = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.gamma = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("make_synthetic_config maps keys and rejects unknown ones") {
  ConfigMap entries = {
      {"seen_classes", "9"},        {"unseen_classes", "3"},
      {"attribute_dim", "5"},       {"feature_dim", "11"},
      {"samples_per_class", "13"},  {"noise_scale", "0.25"},
      {"train_fraction", "0.75"},   {"seed", "99"},
  };
  SyntheticConfig cfg = make_synthetic_config(entries);
  CHECK(cfg.seen_classes == 9);
  CHECK(cfg.unseen_classes == 3);
  CHECK(cfg.attribute_dim == 5);
  CHECK(cfg.feature_dim == 11);
  CHECK(cfg.samples_per_class == 13);
  CHECK(cfg.noise_scale == 0.25);
  CHECK(cfg.train_fraction == 0.75);
  CHECK(cfg.seed == 99);

  CHECK(test::throws_containing<ConfigError>(
      [] { (void)make_synthetic_config({{"epochs", "3"}}); }, "epochs"));
  CHECK_THROWS_AS((void)make_synthetic_config({{"seen_classes", "x"}}),
                  ConfigError);
}

TEST_CASE("parse_grid_file reads ordered comma-separated rows") {
  test::TempDir dir;
  const auto path = dir.path() / "grid.cfg";
  {
    std::ofstream out(path);
    out << "# sweep axes\n"
        << "learning_rate = 0.01, 0.02, 0.05\n"
        << "\n"
        << "lambda_crc = 0.001, 0.01  # two points\n";
  }
  SweepGrid grid = parse_grid_file(path);
  REQUIRE(grid.size() == 2);
  CHECK(grid[0].first == "learning_rate");
  CHECK(grid[0].second == std::vector<std::string>{"0.01", "0.02", "0.05"});
  CHECK(grid[1].first == "lambda_crc");
  CHECK(grid[1].second == std::vector<std::string>{"0.001", "0.01"});

  const auto bad = dir.path() / "bad.cfg";
  {
    std::ofstream out(bad);
    out << "learning_rate 0.01\n";
  }
  CHECK(test::throws_containing<ConfigError>(
      [&] { (void)parse_grid_file(bad); }, "bad.cfg:1"));

  const auto empty = dir.path() / "empty.cfg";
  { std::ofstream out(empty); }
  CHECK(test::throws_containing<ConfigError>(
      [&] { (void)parse_grid_file(empty); }, "no rows"));
  CHECK_THROWS_AS((void)parse_grid_file(dir.path() / "missing.cfg"),
                  IngestionError);
}

TEST_CASE("parse_bool accepts the two spellings of each value") {
  CHECK(parse_bool("true", "k"));
  CHECK(parse_bool("1", "k"));
  CHECK_FALSE(parse_bool("false", "k"));
  CHECK_FALSE(parse_bool("0", "k"));
  CHECK(test::throws_containing<ConfigError>(
      [] { (void)parse_bool("yes", "mask_enabled"); }, "mask_enabled"));
}

TEST_SUITE_END();
