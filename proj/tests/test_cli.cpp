#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "test_helpers.hpp"
#include "vsgmn/dataset.hpp"

using namespace vsgmn;
using nlohmann::json;

TEST_SUITE_BEGIN("cli");

namespace {

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

// Generates the small dataset every CLI test trains on.
void gen_dataset(const std::filesystem::path& dir, unsigned seed = 3) {
  auto r = test::run_cli(
      "gen-synth --out " + dir.string() +
      " --seen_classes 6 --unseen_classes 2 --attribute_dim 6" +
      " --feature_dim 10 --samples_per_class 8 --seed " + std::to_string(seed));
  REQUIRE(r.exit_code == 0);
}

void write_config(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("version, help and usage errors") {
  CHECK(test::run_cli("--version").exit_code == 0);
  CHECK(test::run_cli("--version").output.find("v0.1.0") != std::string::npos);
  CHECK(test::run_cli("--help").exit_code == 0);
  CHECK(test::run_cli("train --help").exit_code == 0);

  CHECK(test::run_cli("").exit_code == 2);              // subcommand required
  CHECK(test::run_cli("flyswat").exit_code == 2);       // unknown subcommand
  CHECK(test::run_cli("train").exit_code == 2);         // missing required flags
  CHECK(test::run_cli("eval --data x --params y --mode other").exit_code == 2);
  CHECK(test::run_cli("sweep --data x --out y --grid z --jobs 0").exit_code ==
        2);
}

TEST_CASE("gen-synth: loadable output, reproducible bytes, manifest") {
  test::TempDir tmp;
  const auto a = tmp.path() / "a";
  const auto b = tmp.path() / "b";
  gen_dataset(a);
  gen_dataset(b);

  ZslDataset ds = load_dataset(a);
  CHECK(ds.num_instances() == 64);  // 8 classes x 8 samples
  CHECK(ds.seen_classes.size() == 6);
  CHECK(ds.unseen_classes.size() == 2);
  CHECK(ds.feature_dim() == 10);

  // Fixed seed, fixed bytes: manifests carry no timestamps.
  for (const char* name : {"features.csv", "labels.csv", "prototypes.csv",
                           "split.json", "manifest.json"}) {
    CHECK(test::read_text(a / name) == test::read_text(b / name));
  }
  json manifest = read_json(a / "manifest.json");
  CHECK(manifest["command"] == "gen-synth");
  CHECK(manifest["status"] == "completed");
  CHECK(manifest["config"]["seed"] == 3);

  const auto c = tmp.path() / "c";
  gen_dataset(c, 4);
  CHECK(test::read_text(a / "features.csv") !=
        test::read_text(c / "features.csv"));

  // Bad value and unknown key in a config file are usage errors.
  CHECK(test::run_cli("gen-synth --out " + (tmp.path() / "d").string() +
                      " --seen_classes minus")
            .exit_code == 2);
}

TEST_CASE("train: artifacts, metrics arithmetic and console report") {
  test::TempDir tmp;
  const auto data = tmp.path() / "data";
  const auto run = tmp.path() / "run";
  gen_dataset(data);
  write_config(tmp.path() / "train.cfg", "epochs = 3\nseed = 5\n");

  auto r = test::run_cli("train --data " + data.string() + " --out " +
                         run.string() + " --config " +
                         (tmp.path() / "train.cfg").string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("harmonic_mean") != std::string::npos);

  for (const char* name : {"params.json", "loss_trace.csv", "metrics.json",
                           "predictions.csv", "manifest.json"}) {
    CHECK(std::filesystem::exists(run / name));
  }

  // One trace row per epoch plus the header.
  const std::string trace = test::read_text(run / "loss_trace.csv");
  CHECK(count_lines(trace) == 4);
  CHECK(trace.rfind("epoch,ace,reg,sc,crc,total", 0) == 0);

  // The reported harmonic mean is consistent with its own accuracies.
  json metrics = read_json(run / "metrics.json");
  const double s = metrics["seen_acc"].get<double>();
  const double u = metrics["unseen_acc"].get<double>();
  const double h = metrics["harmonic_mean"].get<double>();
  const double denom = s + u;
  CHECK(h == doctest::Approx(denom > 0 ? 2 * s * u / denom : 0.0)
                 .epsilon(1e-9));

  const std::string preds = test::read_text(run / "predictions.csv");
  CHECK(preds.rfind("instance,true_class,predicted_class", 0) == 0);
  ZslDataset ds = load_dataset(data);
  CHECK(count_lines(preds) == ds.test_instances.size() + 1);

  json manifest = read_json(run / "manifest.json");
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["epochs"] == 3);
  CHECK(manifest["status"] == "completed");
}

TEST_CASE("train: resume skips a completed run, config changes retrain") {
  test::TempDir tmp;
  const auto data = tmp.path() / "data";
  const auto run = tmp.path() / "run";
  gen_dataset(data);
  write_config(tmp.path() / "t.cfg", "epochs = 2\nseed = 5\n");
  const std::string base = "train --data " + data.string() + " --out " +
                           run.string() + " --config " +
                           (tmp.path() / "t.cfg").string();

  REQUIRE(test::run_cli(base).exit_code == 0);
  auto resumed = test::run_cli(base + " --resume");
  CHECK(resumed.exit_code == 0);
  CHECK(resumed.output.find("already completed") != std::string::npos);

  // A different seed invalidates the stored manifest config.
  auto retrained = test::run_cli(base + " --resume --seed 9");
  CHECK(retrained.exit_code == 0);
  CHECK(retrained.output.find("already completed") == std::string::npos);
}

TEST_CASE("train: ablation preset lands in the manifest") {
  test::TempDir tmp;
  const auto data = tmp.path() / "data";
  gen_dataset(data);
  write_config(tmp.path() / "t.cfg", "epochs = 2\n");

  const auto run = tmp.path() / "base";
  auto r = test::run_cli("train --data " + data.string() + " --out " +
                         run.string() + " --config " +
                         (tmp.path() / "t.cfg").string() +
                         " --ablation baseline");
  REQUIRE(r.exit_code == 0);
  json manifest = read_json(run / "manifest.json");
  CHECK(manifest["config"]["graph_match_enabled"] == false);
  CHECK(manifest["config"]["lambda_crc"] == 0.0);

  const auto run2 = tmp.path() / "full";
  auto r2 = test::run_cli("train --data " + data.string() + " --out " +
                          run2.string() + " --config " +
                          (tmp.path() / "t.cfg").string() + " --ablation full");
  REQUIRE(r2.exit_code == 0);
  json manifest2 = read_json(run2 / "manifest.json");
  CHECK(manifest2["config"]["graph_match_enabled"] == true);
  CHECK(manifest2["config"]["mask_enabled"] == true);
}

TEST_CASE("eval: agrees with training metrics; gamma only moves gzsl") {
  test::TempDir tmp;
  const auto data = tmp.path() / "data";
  const auto run = tmp.path() / "run";
  gen_dataset(data);
  write_config(tmp.path() / "t.cfg", "epochs = 3\nseed = 5\n");
  REQUIRE(test::run_cli("train --data " + data.string() + " --out " +
                        run.string() + " --config " +
                        (tmp.path() / "t.cfg").string())
              .exit_code == 0);
  json train_metrics = read_json(run / "metrics.json");
  const std::string params = (run / "params.json").string();

  const auto czsl_out = tmp.path() / "eval_czsl";
  auto czsl = test::run_cli("eval --data " + data.string() + " --params " +
                            params + " --mode czsl --out " + czsl_out.string());
  REQUIRE(czsl.exit_code == 0);
  json czsl_metrics = read_json(czsl_out / "metrics.json");
  CHECK(czsl_metrics["acc_czsl"].get<double>() ==
        train_metrics["acc_czsl"].get<double>());

  // gzsl with the model's own gamma reproduces the training-time numbers.
  const auto gzsl_out = tmp.path() / "eval_gzsl";
  REQUIRE(test::run_cli("eval --data " + data.string() + " --params " + params +
                        " --mode gzsl --out " + gzsl_out.string())
              .exit_code == 0);
  json gzsl_metrics = read_json(gzsl_out / "metrics.json");
  CHECK(gzsl_metrics["harmonic_mean"].get<double>() ==
        train_metrics["harmonic_mean"].get<double>());

  // Cranking gamma shifts the seen/unseen balance but never czsl accuracy.
  const auto shifted_out = tmp.path() / "eval_shift";
  REQUIRE(test::run_cli("eval --data " + data.string() + " --params " + params +
                        " --mode gzsl --gamma 25 --out " + shifted_out.string())
              .exit_code == 0);
  json shifted = read_json(shifted_out / "metrics.json");
  CHECK(shifted["unseen_acc"].get<double>() >=
        gzsl_metrics["unseen_acc"].get<double>());
  CHECK(shifted["seen_acc"].get<double>() <=
        gzsl_metrics["seen_acc"].get<double>());

  const auto czsl_shift_out = tmp.path() / "eval_czsl_shift";
  REQUIRE(test::run_cli("eval --data " + data.string() + " --params " + params +
                        " --mode czsl --gamma 25 --out " +
                        czsl_shift_out.string())
              .exit_code == 0);
  CHECK(read_json(czsl_shift_out / "metrics.json")["acc_czsl"].get<double>() ==
        czsl_metrics["acc_czsl"].get<double>());

  CHECK(test::run_cli("eval --data " + data.string() +
                      " --params /nonexistent/params.json")
            .exit_code == 2);
}

TEST_CASE("error paths map to the documented exit codes") {
  test::TempDir tmp;
  // Missing dataset directory -> usage/data error.
  CHECK(test::run_cli("train --data " + (tmp.path() / "nope").string() +
                      " --out " + (tmp.path() / "r").string())
            .exit_code == 2);

  // A dataset missing one file is rejected the same way.
  const auto data = tmp.path() / "data";
  gen_dataset(data);
  std::filesystem::remove(data / "prototypes.csv");
  auto broken = test::run_cli("train --data " + data.string() + " --out " +
                              (tmp.path() / "r2").string());
  CHECK(broken.exit_code == 2);
  CHECK(broken.output.find("prototypes.csv") != std::string::npos);

  // Unknown config key.
  write_config(tmp.path() / "bad.cfg", "epocs = 3\n");
  const auto data2 = tmp.path() / "data2";
  gen_dataset(data2);
  CHECK(test::run_cli("train --data " + data2.string() + " --out " +
                      (tmp.path() / "r3").string() + " --config " +
                      (tmp.path() / "bad.cfg").string())
            .exit_code == 2);

  // Diverging optimization is a runtime failure, not a usage error.
  write_config(tmp.path() / "hot.cfg",
               "epochs = 30\nlearning_rate = 100000000\n");
  auto hot = test::run_cli("train --data " + data2.string() + " --out " +
                           (tmp.path() / "r4").string() + " --config " +
                           (tmp.path() / "hot.cfg").string());
  CHECK(hot.exit_code == 1);
  CHECK(hot.output.find("diverged") != std::string::npos);
}

TEST_CASE("gradcheck: passes clean, fails under an injected fault") {
  auto clean = test::run_cli("gradcheck --variant both --layers 1");
  CHECK(clean.exit_code == 0);
  // One PASS line per variant.
  std::size_t passes = 0;
  for (std::size_t at = clean.output.find("PASS"); at != std::string::npos;
       at = clean.output.find("PASS", at + 4)) {
    ++passes;
  }
  CHECK(passes == 2);

  auto faulty = test::run_cli(
      "gradcheck --variant attention --layers 1 --inject-fault matmul");
  CHECK(faulty.exit_code == 1);
  CHECK(faulty.output.find("injected fault 'matmul'") != std::string::npos);

  CHECK(test::run_cli("gradcheck --variant linear").exit_code == 2);
}

TEST_CASE("sweep: ranked csv, per-cell artifacts, resume reuses cells") {
  test::TempDir tmp;
  const auto data = tmp.path() / "data";
  const auto out = tmp.path() / "sweep";
  gen_dataset(data);
  write_config(tmp.path() / "t.cfg", "epochs = 2\nseed = 5\n");
  write_config(tmp.path() / "grid.cfg", "lambda_reg = 0.3, 0.6\n");

  const std::string cmd = "sweep --data " + data.string() + " --out " +
                          out.string() + " --grid " +
                          (tmp.path() / "grid.cfg").string() + " --config " +
                          (tmp.path() / "t.cfg").string() + " --jobs 2";
  auto r = test::run_cli(cmd);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("best cell") != std::string::npos);

  const std::string csv = test::read_text(out / "sweep.csv");
  CHECK(csv.rfind("rank,cell,harmonic_mean,acc_czsl,seen_acc,unseen_acc,"
                  "status,overrides",
                  0) == 0);
  CHECK(count_lines(csv) == 3);  // header + one row per cell
  CHECK(csv.find("lambda_reg=0.3") != std::string::npos);
  CHECK(csv.find("lambda_reg=0.6") != std::string::npos);

  for (const char* cell : {"cell_000", "cell_001"}) {
    CHECK(std::filesystem::exists(out / cell / "result.json"));
    CHECK(std::filesystem::exists(out / cell / "params.json"));
    CHECK(std::filesystem::exists(out / cell / "loss_trace.csv"));
    CHECK(read_json(out / cell / "manifest.json")["status"] == "completed");
  }

  // Cached cells are not retrained: their artifacts keep their write times.
  const auto stamp =
      std::filesystem::last_write_time(out / "cell_000" / "params.json");
  auto resumed = test::run_cli(cmd + " --resume");
  REQUIRE(resumed.exit_code == 0);
  CHECK(std::filesystem::last_write_time(out / "cell_000" / "params.json") ==
        stamp);

  // A grid with a broken value records the failed cell but still exits 0.
  write_config(tmp.path() / "grid2.cfg", "learning_rate = 0.02, -1\n");
  const auto out2 = tmp.path() / "sweep2";
  auto mixed = test::run_cli("sweep --data " + data.string() + " --out " +
                             out2.string() + " --grid " +
                             (tmp.path() / "grid2.cfg").string() +
                             " --config " + (tmp.path() / "t.cfg").string());
  REQUIRE(mixed.exit_code == 0);
  const std::string csv2 = test::read_text(out2 / "sweep.csv");
  CHECK(csv2.find(",failed,") != std::string::npos);
  CHECK(csv2.find(",ok,") != std::string::npos);
}

TEST_SUITE_END();
