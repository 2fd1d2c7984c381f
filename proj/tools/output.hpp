#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "vsgmn/eval.hpp"
#include "vsgmn/train.hpp"

namespace vsgmn::cli {

// Metrics as written to metrics.json.  `mode` records which protocol produced
// the numbers ("train" runs both and reports the union).
struct MetricsReport {
    std::string mode;
    double gamma = 0.0;
    double acc_czsl = 0.0;
    double seen_acc = 0.0;
    double unseen_acc = 0.0;
    double harmonic_mean = 0.0;
    std::map<int, double> per_class_acc;
};

nlohmann::json metrics_to_json(const MetricsReport& report);

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report);

// Columns: epoch,ace,reg,sc,crc,total.  Terms that were disabled for the run
// are written as 0.
void write_loss_trace_csv(const std::filesystem::path& path,
                          const std::vector<EpochLoss>& trace);

// Columns: instance,true_class,predicted_class.
void write_predictions_csv(const std::filesystem::path& path, const EvalResult& result);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& body);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Renders metrics with six significant digits for terminal output.
std::string render_metrics(const MetricsReport& report);

}  // namespace vsgmn::cli
