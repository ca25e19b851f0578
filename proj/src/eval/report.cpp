#include "timexl/eval/report.hpp"

#include <fstream>
#include <sstream>

#include "timexl/error.hpp"

namespace timexl::eval {

namespace {

std::string number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

nlohmann::ordered_json toJson(const ReportRecords& records) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : records.iterations) {
        nlohmann::ordered_json row;
        row["iteration"] = r.iteration;
        row["encoder_f1"] = r.encoderF1;
        row["encoder_auc"] = r.encoderAuc;
        row["llm_f1"] = r.llmF1;
        row["llm_auc"] = r.llmAuc;
        row["fused_f1"] = r.fusedF1;
        row["fused_auc"] = r.fusedAuc;
        row["alpha"] = r.alpha;
        row["text_quality"] = r.textQuality;
        rows.push_back(std::move(row));
    }
    doc["iterations"] = std::move(rows);
    doc["summary"] = records.summary ? toJson(*records.summary) : nlohmann::ordered_json(nullptr);
    return doc;
}

std::string toTable(const ReportRecords& records) {
    std::string out;
    for (std::size_t i = 0; i < kTableColumns.size(); ++i) {
        out += kTableColumns[i];
        out += i + 1 == kTableColumns.size() ? '\n' : '\t';
    }
    for (const auto& r : records.iterations) {
        out += std::to_string(r.iteration);
        for (double v : {r.encoderF1, r.encoderAuc, r.llmF1, r.llmAuc, r.fusedF1, r.fusedAuc, r.alpha, r.textQuality}) {
            out += '\t' + number(v);
        }
        out += '\n';
    }
    return out;
}

void emitReport(const ReportRecords& records, const std::filesystem::path& path, ReportFormat format) {
    if (records.iterations.empty()) throw ContractError("report: no iteration records");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report " + path.string());
    out << (format == ReportFormat::document ? toJson(records).dump(2) + "\n" : toTable(records));
    if (!out) throw IoError("failed writing report " + path.string());
}

}  // namespace timexl::eval
