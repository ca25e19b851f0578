#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "timexl/error.hpp"
#include "timexl/eval/report.hpp"
#include "timexl/numerics/rng.hpp"
#include "oracles.hpp"

using namespace timexl;
using namespace timexl::eval;
using timexl::oracle::pairwiseAuc;

namespace {

using Labels = std::vector<std::size_t>;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(MacroF1, HandCountedCases) {
    const auto cases = oracle::handCountedF1Cases();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        EXPECT_NEAR(macroF1(c.truth, c.pred, c.classes), c.expected, 1e-12) << "case " << i;
    }
    EXPECT_NEAR(macroF1(cases[0].truth, cases[0].pred, 2), 11.0 / 15.0, 1e-12);
}

TEST(MacroF1, ContractErrors) {
    EXPECT_THROW(macroF1(Labels{0, 1}, Labels{0}, 2), ContractError);
    EXPECT_THROW(macroF1(Labels{0, 2}, Labels{0, 1}, 2), ContractError);
    EXPECT_THROW(macroF1(Labels{0, 1}, Labels{0, 5}, 2), ContractError);
}

TEST(MacroF1, PermutationInvariant) {
    numerics::Rng rng(3);
    Labels truth(40), pred(40);
    for (auto& y : truth) y = rng.below(3);
    for (auto& y : pred) y = rng.below(3);
    const double base = macroF1(truth, pred, 3);
    std::vector<std::size_t> order(40);
    for (std::size_t i = 0; i < 40; ++i) order[i] = 39 - i;
    Labels t2, p2;
    for (auto i : order) {
        t2.push_back(truth[i]);
        p2.push_back(pred[i]);
    }
    EXPECT_EQ(macroF1(t2, p2, 3), base);
}

TEST(Auroc, SeparatedAndTied) {
    const Labels truth = {0, 0, 1, 1};
    EXPECT_EQ(aurocOvR(truth, {{0.9, 0.1}, {0.8, 0.2}, {0.3, 0.7}, {0.1, 0.9}}, 2), 1.0);
    EXPECT_EQ(aurocOvR(truth, {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, 2), 0.5);
}

TEST(Auroc, MatchesPairwiseOracle) {
    numerics::Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t classes = 2 + trial % 3;
        Labels truth(50);
        std::vector<std::vector<double>> scores(50, std::vector<double>(classes));
        for (std::size_t i = 0; i < 50; ++i) {
            truth[i] = rng.below(classes);
            double total = 0.0;
            for (auto& s : scores[i]) {
                // Coarse values force ties.
                s = static_cast<double>(rng.below(8)) + 0.01;
                total += s;
            }
            for (auto& s : scores[i]) s /= total;
        }
        double expected = 0.0;
        std::size_t used = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            const auto n = std::count(truth.begin(), truth.end(), c);
            if (n == 0 || n == 50) continue;
            expected += pairwiseAuc(truth, scores, c);
            ++used;
        }
        EXPECT_NEAR(aurocOvR(truth, scores, classes), expected / static_cast<double>(used), 1e-9);
    }
}

TEST(Auroc, BinaryMacroEqualsPositiveClass) {
    numerics::Rng rng(10);
    Labels truth(30);
    std::vector<std::vector<double>> scores(30);
    for (std::size_t i = 0; i < 30; ++i) {
        truth[i] = rng.below(2);
        const double p = rng.uniform();
        scores[i] = {1.0 - p, p};
    }
    EXPECT_NEAR(aurocOvR(truth, scores, 2), pairwiseAuc(truth, scores, 1), 1e-12);
}

TEST(Auroc, DegenerateClassesAreExcluded) {
    std::vector<std::size_t> excluded;
    const double auc = aurocOvR(Labels{0, 1, 0, 1}, {{.9, .1, 0}, {.2, .8, 0}, {.7, .3, 0}, {.4, .6, 0}}, 3, &excluded);
    EXPECT_EQ(auc, 1.0);
    EXPECT_EQ(excluded, std::vector<std::size_t>{2});
    EXPECT_EQ(aurocOvR(Labels{1, 1}, {{0.3, 0.7}, {0.6, 0.4}}, 2), 0.5);
}

TEST(Evaluate, ReportInvariants) {
    const Labels truth = {0, 0, 1, 1, 2};
    const Labels pred = {0, 1, 1, 1, 0};
    const std::vector<std::vector<double>> scores = {
        {.8, .1, .1}, {.3, .6, .1}, {.2, .7, .1}, {.1, .8, .1}, {.5, .2, .3}};
    const auto r = evaluate(truth, pred, scores, 3);
    EXPECT_EQ(r.count, 5u);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.6);
    EXPECT_EQ(r.confusion[0][0] + r.confusion[0][1] + r.confusion[0][2], 2u);
    EXPECT_EQ(r.confusion[2][0], 1u);
    EXPECT_DOUBLE_EQ(r.precision[1], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.recall[0], 0.5);
    EXPECT_EQ(r.precision[2], 0.0);
    const auto doc = toJson(r);
    EXPECT_EQ(doc.begin().key(), "macro_f1");
}

TEST(Argmax, TiesGoToFirst) {
    EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
    EXPECT_THROW(argmax(std::vector<double>{}), ContractError);
}

class ReportTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = std::filesystem::temp_directory_path() /
              ("timexl_report_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
               ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir);
    }
    void TearDown() override { std::filesystem::remove_all(dir); }
    std::filesystem::path dir;
};

TEST_F(ReportTest, SingleIterationGivesOneDataRow) {
    ReportRecords records;
    records.iterations.push_back({0, 0.8, 0.9, 0.6, 0.7, 0.85, 0.91, 0.4, 0.55});
    emitReport(records, dir / "r.tsv", ReportFormat::table);
    std::istringstream lines(slurp(dir / "r.tsv"));
    std::vector<std::string> rows;
    for (std::string line; std::getline(lines, line);) rows.push_back(line);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& row : rows) {
        EXPECT_EQ(static_cast<std::size_t>(std::count(row.begin(), row.end(), '\t')) + 1, kTableColumns.size());
    }
    EXPECT_EQ(rows[0].substr(0, 9), "iteration");
}

TEST_F(ReportTest, ReEmitIsByteIdentical) {
    ReportRecords records;
    records.iterations.push_back({0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 1.0 / 3.0});
    records.iterations.push_back({1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 2.0 / 3.0});
    records.summary = evaluate(Labels{0, 1}, Labels{0, 1}, {{.9, .1}, {.1, .9}}, 2);
    for (auto format : {ReportFormat::document, ReportFormat::table}) {
        emitReport(records, dir / "a", format);
        emitReport(records, dir / "b", format);
        EXPECT_EQ(slurp(dir / "a"), slurp(dir / "b"));
    }
    emitReport(records, dir / "doc.json", ReportFormat::document);
    const auto parsed = nlohmann::json::parse(slurp(dir / "doc.json"));
    EXPECT_EQ(parsed["iterations"].size(), 2u);
    EXPECT_DOUBLE_EQ(parsed["iterations"][1]["text_quality"].get<double>(), 2.0 / 3.0);
}

TEST_F(ReportTest, Errors) {
    EXPECT_THROW(emitReport({}, dir / "x", ReportFormat::table), ContractError);
    ReportRecords records;
    records.iterations.push_back({});
    EXPECT_THROW(emitReport(records, dir / "missing" / "x", ReportFormat::document), IoError);
}
