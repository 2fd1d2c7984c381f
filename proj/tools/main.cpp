// vsgmn command-line tool: synthetic data generation, training, evaluation,
// gradient checking and hyperparameter sweeps over zero-shot datasets.
//
// Exit codes: 0 success, 1 failed check or runtime failure (divergence,
// broken invariant), 2 bad usage, configuration or input data.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "output.hpp"
#include "vsgmn/config.hpp"
#include "vsgmn/errors.hpp"
#include "vsgmn/eval.hpp"
#include "vsgmn/format.hpp"
#include "vsgmn/gradcheck.hpp"
#include "vsgmn/log.hpp"
#include "vsgmn/tape.hpp"
#include "vsgmn/train.hpp"
#include "vsgmn/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vsgmn;
using namespace vsgmn::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Optional CLI flags that override config-file entries. A flag that was not
// passed leaves the config untouched.
struct TrainFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::string> ablation;
    std::optional<double> gamma;
};

void apply_train_flags(TrainConfig& config, const TrainFlags& flags) {
    if (flags.seed) config.seed = *flags.seed;
    if (flags.variant) config.variant = variant_from_string(*flags.variant);
    if (flags.gamma) config.gamma = *flags.gamma;
    // Presets win over individual switches, matching config-file semantics.
    if (flags.ablation) config.apply_ablation(ablation_from_string(*flags.ablation));
    config.validate();
}

TrainConfig load_train_config(const std::string& config_path, const TrainFlags& flags) {
    ConfigMap entries;
    if (!config_path.empty()) {
        entries = parse_config_file(config_path);
    }
    TrainConfig config = make_train_config(entries);
    apply_train_flags(config, flags);
    return config;
}

json train_config_to_json(const TrainConfig& c) {
    return json{
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"top_k", c.top_k},
        {"layers", c.layers},
        {"variant", to_string(c.variant)},
        {"temperature", c.temperature},
        {"cross_weight", c.cross_weight},
        {"lambda_reg", c.weights.reg},
        {"lambda_sc", c.weights.sc},
        {"lambda_crc", c.weights.crc},
        {"learning_rate", c.optimizer.learning_rate},
        {"momentum", c.optimizer.momentum},
        {"weight_decay", c.optimizer.weight_decay},
        {"seed", c.seed},
        {"hidden_dim", c.hidden_dim},
        {"gamma", c.gamma},
        {"graph_match_enabled", c.graph_match_enabled},
        {"mask_enabled", c.mask_enabled},
        {"cross_graph_enabled", c.cross_graph_enabled},
        {"ace_pool", c.ace_pool == AcePool::seen ? "seen" : "all"},
    };
}

MetricsReport combined_metrics(const VsgmnModel& model, const ZslDataset& ds,
                               double gamma, const std::string& mode,
                               EvalResult* gzsl_out = nullptr) {
    EvalResult czsl = evaluate(model, ds, EvalMode::czsl, gamma);
    EvalResult gzsl = evaluate(model, ds, EvalMode::gzsl, gamma);
    MetricsReport report;
    report.mode = mode;
    report.gamma = gamma;
    report.acc_czsl = czsl.metrics.acc_czsl;
    report.seen_acc = gzsl.metrics.seen_acc;
    report.unseen_acc = gzsl.metrics.unseen_acc;
    report.harmonic_mean = gzsl.metrics.harmonic;
    report.per_class_acc = gzsl.metrics.per_class_acc;
    if (gzsl_out) *gzsl_out = std::move(gzsl);
    return report;
}

// ---- gen-synth -----------------------------------------------------------

int run_gen_synth(const std::string& out_dir, const std::string& config_path,
                  const ConfigMap& overrides) {
    ConfigMap entries;
    if (!config_path.empty()) entries = parse_config_file(config_path);
    for (const auto& [key, value] : overrides) entries[key] = value;
    SyntheticConfig cfg = make_synthetic_config(entries);
    ZslDataset ds = generate_synthetic_dataset(cfg);
    fs::create_directories(out_dir);
    write_dataset(ds, out_dir);
    // Deliberately free of timestamps so a fixed seed reproduces the
    // directory byte for byte.
    write_json_file(fs::path(out_dir) / "manifest.json",
                    json{{"tool", "vsgmn"},
                         {"version", kVersion},
                         {"command", "gen-synth"},
                         {"config",
                          json{{"seen_classes", cfg.seen_classes},
                               {"unseen_classes", cfg.unseen_classes},
                               {"attribute_dim", cfg.attribute_dim},
                               {"feature_dim", cfg.feature_dim},
                               {"samples_per_class", cfg.samples_per_class},
                               {"noise_scale", cfg.noise_scale},
                               {"train_fraction", cfg.train_fraction},
                               {"seed", cfg.seed}}},
                         {"outputs", json::array({"features.csv", "labels.csv",
                                                  "prototypes.csv", "split.json"})},
                         {"status", "completed"}});
    std::printf("wrote %zu instances, %zu classes (%zu seen / %zu unseen) to %s\n",
                ds.features.rows(), ds.seen_classes.size() + ds.unseen_classes.size(),
                ds.seen_classes.size(), ds.unseen_classes.size(), out_dir.c_str());
    return kExitOk;
}

// ---- train ---------------------------------------------------------------

json make_manifest(const std::string& command, const std::string& data_dir,
                   const TrainConfig& config) {
    return json{
        {"tool", "vsgmn"},
        {"version", kVersion},
        {"command", command},
        {"data", data_dir},
        {"config", train_config_to_json(config)},
        {"status", "completed"},
    };
}

// A finished run is detected by its manifest; --resume compares the manifest
// config against the requested one and skips retraining on a match.
bool resume_hit(const fs::path& manifest_path, const json& wanted_config) {
    if (!fs::exists(manifest_path)) return false;
    json manifest = read_json_file(manifest_path);
    if (manifest.value("status", "") != "completed") return false;
    if (!manifest.contains("config") || manifest["config"] != wanted_config) {
        log_info("resume: existing run used a different config; retraining");
        return false;
    }
    return true;
}

int run_train(const std::string& data_dir, const std::string& out_dir,
              const std::string& config_path, const TrainFlags& flags, bool resume) {
    TrainConfig config = load_train_config(config_path, flags);
    fs::path out(out_dir);
    fs::create_directories(out);

    json wanted = train_config_to_json(config);
    if (resume && resume_hit(out / "manifest.json", wanted)) {
        std::printf("resume: run already completed in %s\n", out_dir.c_str());
        json metrics = read_json_file(out / "metrics.json");
        std::printf("harmonic_mean  %s\n",
                    format_sig6(metrics.value("harmonic_mean", 0.0)).c_str());
        return kExitOk;
    }

    ZslDataset ds = load_dataset(data_dir);
    const auto started = std::chrono::steady_clock::now();
    std::vector<EpochLoss> trace;
    VsgmnModel model = train_model(ds, config, &trace);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();

    EvalResult gzsl;
    MetricsReport report = combined_metrics(model, ds, config.gamma, "train", &gzsl);

    save_model(model, out / "params.json");
    write_loss_trace_csv(out / "loss_trace.csv", trace);
    write_metrics_json(out / "metrics.json", report);
    write_predictions_csv(out / "predictions.csv", gzsl);
    json manifest = make_manifest("train", data_dir, config);
    manifest["duration_seconds"] = seconds;
    manifest["outputs"] = json::array(
        {"params.json", "loss_trace.csv", "metrics.json", "predictions.csv"});
    write_json_file(out / "manifest.json", manifest);

    if (!trace.empty()) {
        std::printf("final loss     %s (epoch 1: %s)\n",
                    format_sig6(trace.back().total).c_str(),
                    format_sig6(trace.front().total).c_str());
    }
    std::fputs(render_metrics(report).c_str(), stdout);
    return kExitOk;
}

// ---- eval ----------------------------------------------------------------

int run_eval(const std::string& data_dir, const std::string& params_path,
             const std::string& out_dir, const std::string& mode_name,
             std::optional<double> gamma_flag) {
    VsgmnModel model = load_model(params_path);
    ZslDataset ds = load_dataset(data_dir);
    EvalMode mode = eval_mode_from_string(mode_name);
    double gamma = gamma_flag.value_or(model.config.gamma);

    EvalResult result = evaluate(model, ds, mode, gamma);
    MetricsReport report;
    report.mode = mode_name;
    report.gamma = gamma;
    report.acc_czsl = result.metrics.acc_czsl;
    report.seen_acc = result.metrics.seen_acc;
    report.unseen_acc = result.metrics.unseen_acc;
    report.harmonic_mean = result.metrics.harmonic;
    report.per_class_acc = result.metrics.per_class_acc;

    if (!out_dir.empty()) {
        fs::path out(out_dir);
        fs::create_directories(out);
        write_metrics_json(out / "metrics.json", report);
        write_predictions_csv(out / "predictions.csv", result);
    }
    std::fputs(render_metrics(report).c_str(), stdout);
    return kExitOk;
}

// ---- gradcheck -----------------------------------------------------------

void print_gradcheck_report(const GradCheckReport& report) {
    std::printf("variant %s  threshold %s  epsilon %s\n",
                to_string(report.variant).c_str(),
                format_sig6(report.threshold).c_str(),
                format_sig6(report.epsilon).c_str());
    for (const GradCheckGroup& group : report.groups) {
        std::printf("  %-28s %6zu entries  max rel err %s\n", group.name.c_str(),
                    group.entries, format_sig6(group.max_rel_err).c_str());
    }
    std::printf("%s: max rel err %s\n", report.passed ? "PASS" : "FAIL",
                format_sig6(report.max_rel_err).c_str());
}

int run_gradcheck(const std::string& variant_name, double threshold, double epsilon,
                  std::uint64_t seed, std::size_t layers,
                  const std::string& inject_fault) {
    if (!inject_fault.empty()) {
        testing::set_backward_fault(inject_fault);
        log_info("injecting a backward fault into kernel '" + inject_fault + "'");
    }
    std::vector<LayerVariant> variants;
    if (variant_name == "both") {
        variants = {LayerVariant::attention, LayerVariant::propagation};
    } else {
        variants = {variant_from_string(variant_name)};
    }
    bool all_passed = true;
    for (LayerVariant variant : variants) {
        GradCheckOptions options;
        options.variant = variant;
        options.threshold = threshold;
        options.epsilon = epsilon;
        options.seed = seed;
        options.layers = layers;
        GradCheckReport report = gradcheck_model(options);
        print_gradcheck_report(report);
        all_passed = all_passed && report.passed;
    }
    testing::clear_backward_fault();
    if (!all_passed) {
        if (!inject_fault.empty()) {
            std::printf("gradient check failed under injected fault '%s'\n",
                        inject_fault.c_str());
        }
        return kExitRuntime;
    }
    return kExitOk;
}

// ---- sweep ---------------------------------------------------------------

std::string overrides_to_string(const SweepOverrides& overrides) {
    std::string out;
    for (const auto& [key, value] : overrides) {
        if (!out.empty()) out += ';';
        out += key + "=" + value;
    }
    return out;
}

int run_sweep(const std::string& data_dir, const std::string& out_dir,
              const std::string& grid_path, const std::string& config_path,
              const TrainFlags& flags, std::size_t jobs, bool resume) {
    TrainConfig base = load_train_config(config_path, flags);
    SweepGrid grid = parse_grid_file(grid_path);
    ZslDataset ds = load_dataset(data_dir);
    fs::path out(out_dir);
    fs::create_directories(out);

    auto cell_dir = [&out](std::size_t index) {
        char name[32];
        std::snprintf(name, sizeof(name), "cell_%03zu", index);
        return out / name;
    };

    // Completed cells leave a result.json behind; --resume reuses them.
    SweepCellCache cache;
    if (resume) {
        cache = [&](std::size_t index, const TrainConfig&)
            -> std::optional<SweepCellResult> {
            fs::path path = cell_dir(index) / "result.json";
            if (!fs::exists(path)) return std::nullopt;
            json body = read_json_file(path);
            SweepCellResult result;
            result.index = index;
            for (const auto& item : body["overrides"]) {
                result.overrides.emplace_back(item["key"].get<std::string>(),
                                              item["value"].get<std::string>());
            }
            result.czsl_acc = body["acc_czsl"].get<double>();
            result.gzsl.acc_czsl = result.czsl_acc;
            result.gzsl.seen_acc = body["seen_acc"].get<double>();
            result.gzsl.unseen_acc = body["unseen_acc"].get<double>();
            result.gzsl.harmonic = body["harmonic_mean"].get<double>();
            result.failed = body.value("failed", false);
            result.error = body.value("error", "");
            log_debug("sweep: reusing cached cell " + std::to_string(index));
            return result;
        };
    }

    std::mutex io_mutex;
    SweepCellObserver observer = [&](const SweepCellResult& result,
                                     const VsgmnModel& model,
                                     const std::vector<EpochLoss>& trace) {
        fs::path dir = cell_dir(result.index);
        fs::create_directories(dir);
        json body{
            {"index", result.index},
            {"acc_czsl", result.czsl_acc},
            {"seen_acc", result.gzsl.seen_acc},
            {"unseen_acc", result.gzsl.unseen_acc},
            {"harmonic_mean", result.gzsl.harmonic},
            {"failed", result.failed},
            {"error", result.error},
        };
        body["overrides"] = json::array();
        for (const auto& [key, value] : result.overrides) {
            body["overrides"].push_back(json{{"key", key}, {"value", value}});
        }
        write_json_file(dir / "result.json", body);
        write_json_file(dir / "manifest.json",
                        json{{"tool", "vsgmn"},
                             {"version", kVersion},
                             {"command", "sweep-cell"},
                             {"cell", result.index},
                             {"status", result.failed ? "failed" : "completed"}});
        if (!result.failed) {
            save_model(model, dir / "params.json");
            write_loss_trace_csv(dir / "loss_trace.csv", trace);
        }
        std::lock_guard<std::mutex> lock(io_mutex);
        std::printf("cell %3zu  H %s  czsl %s  %s\n", result.index,
                    format_sig6(result.gzsl.harmonic).c_str(),
                    format_sig6(result.czsl_acc).c_str(),
                    result.failed ? result.error.c_str()
                                  : overrides_to_string(result.overrides).c_str());
    };

    std::vector<SweepCellResult> results = sweep(ds, base, grid, jobs, cache, observer);

    std::ofstream summary(out / "sweep.csv");
    if (!summary) throw IngestionError("cannot open '" + (out / "sweep.csv").string() + "' for writing");
    summary << "rank,cell,harmonic_mean,acc_czsl,seen_acc,unseen_acc,status,overrides\n";
    for (std::size_t rank = 0; rank < results.size(); ++rank) {
        const SweepCellResult& r = results[rank];
        summary << rank << ',' << r.index << ',' << format_double(r.gzsl.harmonic) << ','
                << format_double(r.czsl_acc) << ',' << format_double(r.gzsl.seen_acc)
                << ',' << format_double(r.gzsl.unseen_acc) << ','
                << (r.failed ? "failed" : "ok") << ',' << overrides_to_string(r.overrides)
                << '\n';
    }

    if (!results.empty() && !results.front().failed) {
        std::printf("best cell %zu  H %s  overrides: %s\n", results.front().index,
                    format_sig6(results.front().gzsl.harmonic).c_str(),
                    overrides_to_string(results.front().overrides).c_str());
    }
    // Failed cells are data (their error rows are in the table); the sweep
    // command itself completed.
    std::size_t failed = 0;
    for (const SweepCellResult& r : results) failed += r.failed ? 1 : 0;
    if (failed > 0) {
        log_info(std::to_string(failed) + " of " + std::to_string(results.size()) +
                 " cells failed; see sweep.csv");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visual-semantic graph matching for zero-shot learning"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // gen-synth ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic dataset");
    std::string gen_out, gen_config;
    ConfigMap gen_overrides;
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--config", gen_config, "dataset config file (key = value)");
    for (const char* key :
         {"seen_classes", "unseen_classes", "attribute_dim", "feature_dim",
          "samples_per_class", "noise_scale", "train_fraction", "seed"}) {
        gen->add_option_function<std::string>(
            std::string("--") + key,
            [&gen_overrides, key](const std::string& value) { gen_overrides[key] = value; },
            std::string("override ") + key);
    }

    // train ------------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train a model and report metrics");
    std::string train_data, train_out, train_config;
    TrainFlags train_flags;
    bool train_resume = false;
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--out", train_out, "run output directory")->required();
    train_cmd->add_option("--config", train_config, "training config file");
    train_cmd->add_option("--seed", train_flags.seed, "seed override");
    train_cmd->add_option("--variant", train_flags.variant, "layer variant: attention|propagation")
        ->check(CLI::IsMember({"attention", "propagation"}));
    train_cmd->add_option("--ablation", train_flags.ablation,
                          "preset: baseline|crc_only|gm|gm_um|gm_cg|full")
        ->check(CLI::IsMember({"baseline", "crc_only", "gm", "gm_um", "gm_cg", "full"}));
    train_cmd->add_option("--gamma", train_flags.gamma, "calibration offset override");
    train_cmd->add_flag("--resume", train_resume, "skip if this run already completed");

    // eval -------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model");
    std::string eval_data, eval_params, eval_out, eval_mode = "gzsl";
    std::optional<double> eval_gamma;
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--params", eval_params, "saved model (params.json)")->required();
    eval_cmd->add_option("--out", eval_out, "output directory (optional)");
    eval_cmd->add_option("--mode", eval_mode, "evaluation mode: czsl|gzsl")
        ->check(CLI::IsMember({"czsl", "gzsl"}));
    eval_cmd->add_option("--gamma", eval_gamma, "calibration offset override");

    // gradcheck ----------------------------------------------------------------
    auto* grad_cmd = app.add_subcommand(
        "gradcheck", "compare analytic gradients against central differences");
    std::string grad_variant = "both", grad_fault;
    double grad_threshold = 1e-4, grad_epsilon = 1e-5;
    std::uint64_t grad_seed = 11;
    std::size_t grad_layers = 2;
    grad_cmd->add_option("--variant", grad_variant, "attention|propagation|both")
        ->check(CLI::IsMember({"attention", "propagation", "both"}));
    grad_cmd->add_option("--threshold", grad_threshold, "max relative error to pass");
    grad_cmd->add_option("--eps", grad_epsilon, "finite-difference step");
    grad_cmd->add_option("--seed", grad_seed, "seed of the toy problem");
    grad_cmd->add_option("--layers", grad_layers, "match layers in the toy model");
    grad_cmd->add_option("--inject-fault", grad_fault,
                         "corrupt the named kernel's backward pass (self-test)")
        ->group("");  // hidden

    // sweep -------------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "grid search over config overrides");
    std::string sweep_data, sweep_out, sweep_grid, sweep_config;
    TrainFlags sweep_flags;
    std::size_t sweep_jobs = 1;
    bool sweep_resume = false;
    sweep_cmd->add_option("--data", sweep_data, "dataset directory")->required();
    sweep_cmd->add_option("--out", sweep_out, "sweep output directory")->required();
    sweep_cmd->add_option("--grid", sweep_grid, "grid file (key = v1, v2, ...)")->required();
    sweep_cmd->add_option("--config", sweep_config, "base training config file");
    sweep_cmd->add_option("--seed", sweep_flags.seed, "seed override");
    sweep_cmd->add_option("--jobs", sweep_jobs, "worker threads")->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--resume", sweep_resume, "reuse completed cells");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen_synth(gen_out, gen_config, gen_overrides);
        if (train_cmd->parsed())
            return run_train(train_data, train_out, train_config, train_flags, train_resume);
        if (eval_cmd->parsed())
            return run_eval(eval_data, eval_params, eval_out, eval_mode, eval_gamma);
        if (grad_cmd->parsed())
            return run_gradcheck(grad_variant, grad_threshold, grad_epsilon, grad_seed,
                                 grad_layers, grad_fault);
        if (sweep_cmd->parsed())
            return run_sweep(sweep_data, sweep_out, sweep_grid, sweep_config, sweep_flags,
                             sweep_jobs, sweep_resume);
    } catch (const ConfigError& e) {
        log_error(std::string("config: ") + e.what());
        return kExitUsage;
    } catch (const ParseError& e) {
        log_error(std::string("parse: ") + e.what());
        return kExitUsage;
    } catch (const IngestionError& e) {
        log_error(std::string("io: ") + e.what());
        return kExitUsage;
    } catch (const ValidationError& e) {
        log_error(std::string("dataset: ") + e.what());
        return kExitUsage;
    } catch (const DatasetError& e) {
        log_error(std::string("dataset: ") + e.what());
        return kExitUsage;
    } catch (const DimensionError& e) {
        log_error(std::string("shape: ") + e.what());
        return kExitUsage;
    } catch (const DivergenceError& e) {
        log_error(std::string("diverged: ") + e.what());
        return kExitRuntime;
    } catch (const Error& e) {
        log_error(e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        log_error(e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
