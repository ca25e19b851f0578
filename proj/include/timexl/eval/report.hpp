#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "timexl/eval/metrics.hpp"

namespace timexl::eval {

struct IterationRow {
    std::size_t iteration = 0;
    double encoderF1 = 0.0;
    double encoderAuc = 0.0;
    double llmF1 = 0.0;
    double llmAuc = 0.0;
    double fusedF1 = 0.0;
    double fusedAuc = 0.0;
    double alpha = 0.0;
    double textQuality = 0.0;
};

struct ReportRecords {
    std::vector<IterationRow> iterations;
    std::optional<MetricsReport> summary;
};

enum class ReportFormat { document, table };

inline constexpr std::array<const char*, 9> kTableColumns = {
    "iteration", "encoder_f1", "encoder_auc", "llm_f1", "llm_auc", "fused_f1", "fused_auc", "alpha", "text_quality"};

nlohmann::ordered_json toJson(const ReportRecords& records);
std::string toTable(const ReportRecords& records);

// document: JSON; table: tab-separated with a header row of kTableColumns.
void emitReport(const ReportRecords& records, const std::filesystem::path& path, ReportFormat format);

}  // namespace timexl::eval
