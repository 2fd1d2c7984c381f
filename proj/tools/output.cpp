#include "output.hpp"

#include <fstream>
#include <sstream>

#include "vsgmn/errors.hpp"
#include "vsgmn/format.hpp"

namespace vsgmn::cli {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IngestionError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [class_id, acc] : report.per_class_acc) {
        per_class[std::to_string(class_id)] = acc;
    }
    return nlohmann::json{
        {"mode", report.mode},
        {"gamma", report.gamma},
        {"acc_czsl", report.acc_czsl},
        {"seen_acc", report.seen_acc},
        {"unseen_acc", report.unseen_acc},
        {"harmonic_mean", report.harmonic_mean},
        {"per_class_acc", per_class},
    };
}

void write_metrics_json(const std::filesystem::path& path, const MetricsReport& report) {
    write_json_file(path, metrics_to_json(report));
}

void write_loss_trace_csv(const std::filesystem::path& path,
                          const std::vector<EpochLoss>& trace) {
    std::ofstream out = open_for_write(path);
    out << "epoch,ace,reg,sc,crc,total\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const EpochLoss& row = trace[i];
        out << (i + 1) << ',' << format_double(row.ace) << ',' << format_double(row.reg)
            << ',' << format_double(row.sc) << ',' << format_double(row.crc) << ','
            << format_double(row.total) << '\n';
    }
}

void write_predictions_csv(const std::filesystem::path& path, const EvalResult& result) {
    std::ofstream out = open_for_write(path);
    out << "instance,true_class,predicted_class\n";
    for (std::size_t i = 0; i < result.instances.size(); ++i) {
        out << result.instances[i] << ',' << result.true_labels[i] << ','
            << result.predicted[i] << '\n';
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& body) {
    std::ofstream out = open_for_write(path);
    out << body.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestionError("cannot open '" + path.string() + "'");
    }
    nlohmann::json body;
    try {
        in >> body;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return body;
}

std::string render_metrics(const MetricsReport& report) {
    std::ostringstream out;
    out << "mode           " << report.mode << '\n';
    out << "acc_czsl       " << format_sig6(report.acc_czsl) << '\n';
    out << "seen_acc       " << format_sig6(report.seen_acc) << '\n';
    out << "unseen_acc     " << format_sig6(report.unseen_acc) << '\n';
    out << "harmonic_mean  " << format_sig6(report.harmonic_mean) << '\n';
    return out.str();
}

}  // namespace vsgmn::cli
