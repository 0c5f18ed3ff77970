#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "reflow/cli.hpp"
#include "reflow/datagen.hpp"
#include "reflow/error.hpp"
#include "reflow/io.hpp"

using namespace reflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "reflow");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("reflow_test_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // Small generated dataset with complete targets.
    std::string small_dataset(const std::string& name = "data.csv") {
        const auto r = run({"generate", "--output", path(name), "--replications", "1", "--missing-rate", "0"});
        EXPECT_EQ(r.code, 0) << r.err;
        return path(name);
    }

    fs::path dir_;
};

std::size_t line_count(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

std::vector<std::vector<std::string>> read_rows(const std::string& file) {
    std::istringstream in(io::read_text_file(file));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        rows.push_back(fields);
    }
    return rows;
}

void expect_same_table(const io::CsvTable& a, const io::CsvTable& b) {
    EXPECT_EQ(a.feature_names, b.feature_names);
    EXPECT_EQ(a.has_targets, b.has_targets);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].meta, b.rows[i].meta);
        ASSERT_EQ(a.rows[i].features.size(), b.rows[i].features.size());
        for (std::size_t j = 0; j < a.rows[i].features.size(); ++j) {
            const double x = a.rows[i].features[j];
            const double y = b.rows[i].features[j];
            EXPECT_TRUE(x == y || (std::isnan(x) && std::isnan(y))) << i << "," << j;
        }
        EXPECT_EQ(a.rows[i].targets, b.rows[i].targets);
    }
}

}  // namespace

TEST(Csv, RoundTripIsStable) {
    datagen::GenConfig g;
    g.replications = 1;
    g.missing_rate = 0.1;
    io::CsvTable table;
    table.feature_names = features::feature_names();
    table.rows = datagen::to_samples(datagen::generate(g));
    table.rows[3].features[7] = std::nan("");

    std::stringstream first;
    io::write_csv(first, table);
    const auto once = io::read_csv(first);
    std::stringstream second;
    io::write_csv(second, once);
    EXPECT_EQ(first.str(), second.str());
    const auto twice = io::read_csv(second);
    expect_same_table(once, twice);

    // Nine significant digits survive the first write.
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (std::size_t j = 0; j < table.feature_names.size(); ++j) {
            const double x = table.rows[i].features[j];
            if (!std::isfinite(x)) {
                EXPECT_TRUE(std::isnan(once.rows[i].features[j]));
                continue;
            }
            EXPECT_NEAR(once.rows[i].features[j], x, 1e-8 * std::abs(x) + 1e-300);
        }
        EXPECT_EQ(once.rows[i].targets[0].has_value(), table.rows[i].targets[0].has_value());
    }
}

TEST(Csv, ParseErrorsCarryLineAndColumn) {
    std::stringstream bad;
    bad << "board_id,combination_id,replicate_id,component_type,size_class,a,shift_x,shift_y,shift_rot\n"
        << "1,1,1,R,1005,0.5,1,2,3\n"
        << "1,1,1,R,1005,oops,1,2,3\n";
    try {
        io::read_csv(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
    }
    std::stringstream short_row;
    short_row << "board_id,combination_id,replicate_id,component_type,size_class,a\n1,1,1,R,1005\n";
    EXPECT_THROW(io::read_csv(short_row), Error);
    std::stringstream wrong_header;
    wrong_header << "id,a\n";
    try {
        io::read_csv(wrong_header);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SchemaMismatch);
    }
    std::stringstream empty;
    EXPECT_THROW(io::read_csv(empty), Error);
}

TEST(ModelJson, RoundTripPredictsIdentically) {
    datagen::GenConfig g;
    g.replications = 1;
    g.missing_rate = 0.0;
    const Dataset d = preprocess::drop_missing(datagen::to_samples(datagen::generate(g)), features::feature_names()).data;
    const Matrix x = d.features();
    for (Family family : {Family::Svr, Family::Nn, Family::Rfr, Family::Mean}) {
        ModelConfig c;
        c.family = family;
        c.nn.epochs = 5;
        c.rfr.trees = 5;
        const auto model = fit_model(d, Target::ShiftY, c);
        const auto back = io::model_from_json(json::parse(io::to_json(model).dump()));
        EXPECT_EQ(back.family, family);
        EXPECT_EQ(back.kept, model.kept);
        EXPECT_EQ(back.predict(x), model.predict(x)) << to_string(family);
    }
}

TEST(ModelJson, SchemaMismatchIsRejected) {
    datagen::GenConfig g;
    g.replications = 1;
    g.missing_rate = 0.0;
    const Dataset d = preprocess::drop_missing(datagen::to_samples(datagen::generate(g)), features::feature_names()).data;
    ModelConfig c;
    c.family = Family::Mean;
    auto j = io::to_json(fit_model(d, Target::ShiftX, c));
    auto wrong_version = j;
    wrong_version["schema_version"] = "reflow-model/0";
    auto wrong_features = j;
    wrong_features["feature_schema"] = "reflow-features/0";
    auto renamed = j;
    renamed["input_names"][0] = "something_else";
    for (const auto& bad : {wrong_version, wrong_features, renamed}) {
        try {
            io::model_from_json(bad);
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::SchemaMismatch);
        }
    }
    auto truncated = j;
    truncated.erase("model");
    try {
        io::model_from_json(truncated);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    }
}

TEST_F(CliTest, GenerateIsReproducible) {
    const auto r = run({"generate", "--output", path("a.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("wrote 3960 records"), std::string::npos);
    EXPECT_NE(r.out.find("seed: 1"), std::string::npos);
    const std::string a = io::read_text_file(path("a.csv"));
    EXPECT_EQ(line_count(a), 3961u);
    ASSERT_EQ(run({"generate", "--output", path("b.csv")}).code, 0);
    EXPECT_EQ(a, io::read_text_file(path("b.csv")));
    EXPECT_TRUE(fs::exists(path("a.schema.json")));

    ASSERT_EQ(run({"generate", "--output", path("c.csv"), "--replications", "1"}).code, 0);
    EXPECT_EQ(line_count(io::read_text_file(path("c.csv"))), 199u);
    ASSERT_EQ(run({"generate", "--output", path("d.csv"), "--seed", "2"}).code, 0);
    EXPECT_NE(a, io::read_text_file(path("d.csv")));
}

TEST_F(CliTest, PreprocessReportsRemovals) {
    const std::string data = small_dataset();
    auto r = run({"preprocess", "--input", data, "--output", path("clean.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto report = json::parse(io::read_text_file(path("clean.report.json")));
    EXPECT_EQ(report["missing_removed"], 0);
    EXPECT_EQ(report["input_rows"], 198);

    auto table = io::read_csv_file(data);
    table.rows[10].targets[1].reset();
    io::write_csv_file(path("holed.csv"), table);
    r = run({"preprocess", "--input", path("holed.csv"), "--output", path("clean2.csv"), "--report",
             path("r2.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    report = json::parse(io::read_text_file(path("r2.json")));
    EXPECT_EQ(report["missing_removed"], 1);
    EXPECT_NE(r.out.find("missing_removed: 1"), std::string::npos);

    // Counts agree with a library recount.
    const auto missing = preprocess::drop_missing(table.rows, table.feature_names);
    const auto outliers = preprocess::remove_outliers(missing.data);
    EXPECT_EQ(report["outliers_removed"], outliers.removed);
    EXPECT_EQ(report["output_rows"], outliers.data.size());
    EXPECT_EQ(line_count(io::read_text_file(path("clean2.csv"))), outliers.data.size() + 1);
}

TEST_F(CliTest, TrainMemorizingForestAndPredictTargets) {
    const std::string data = small_dataset();
    auto r = run({"train", "--input", data, "--output", path("rfr.json"), "--model", "rfr", "--target", "shift_x",
                  "--trees", "1", "--feature-fraction", "1", "--no-filter"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("train R2: 1.000"), std::string::npos) << r.out;

    r = run({"predict", "--input", data, "--output", path("pred.csv"), "--model-file", path("rfr.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_rows(path("pred.csv"));
    ASSERT_EQ(rows.size(), 199u);
    const std::size_t target_col = rows[0].size() - 4;
    EXPECT_EQ(rows[0][target_col], "shift_x");
    EXPECT_EQ(rows[0].back(), "pred_shift_x");
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][target_col], rows[i].back()) << i;
}

TEST_F(CliTest, SvrPredictMatchesLibrary) {
    const std::string data = small_dataset();
    ASSERT_EQ(run({"train", "--input", data, "--output", path("svr.json"), "--model", "svr", "--target", "shift_y"})
                  .code,
              0);
    ASSERT_EQ(run({"predict", "--input", data, "--output", path("pred.csv"), "--model-file", path("svr.json")}).code,
              0);
    const auto model = io::load_model(path("svr.json"));
    const auto& s = std::get<svr::SvrModel>(model.model);
    const auto table = io::read_csv_file(data);
    const auto rows = read_rows(path("pred.csv"));
    ASSERT_EQ(rows.size(), table.rows.size() + 1);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        std::vector<double> x;
        for (std::size_t k : model.kept) x.push_back(table.rows[i].features[k]);
        const double expected = svr::predict_svr(s, x);
        EXPECT_NEAR(std::stod(rows[i + 1].back()), expected, 1e-8 * std::max(1.0, std::abs(expected))) << i;
    }
}

TEST_F(CliTest, NnTrainingIsReproducible) {
    const std::string data = small_dataset();
    for (const char* name : {"a.json", "b.json"}) {
        const auto r = run({"train", "--input", data, "--output", path(name), "--model", "nn", "--target", "shift_rot",
                            "--epochs", "5", "--seed", "3"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(io::read_text_file(path("a.json")), io::read_text_file(path("b.json")));
}

TEST_F(CliTest, SvrOnConstantTargetsNeedsNoFilter) {
    const std::string data = small_dataset();
    auto table = io::read_csv_file(data);
    for (auto& row : table.rows) row.targets[0] = 12.5;
    io::write_csv_file(path("flat.csv"), table);
    // Every Spearman coefficient is zero against a constant target.
    auto r = run({"train", "--input", path("flat.csv"), "--output", path("svr.json"), "--model", "svr", "--target",
                  "shift_x"});
    EXPECT_EQ(r.code, cli::kOther) << r.err;
    EXPECT_NE(r.err.find("error: NoFeaturesLeft"), std::string::npos) << r.err;

    r = run({"train", "--input", path("flat.csv"), "--output", path("svr.json"), "--model", "svr", "--target",
             "shift_x", "--no-filter"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto model = io::load_model(path("svr.json"));
    const auto& s = std::get<svr::SvrModel>(model.model);
    for (double w : s.hyperplane.w) EXPECT_NEAR(w, 0.0, 1e-4);
    EXPECT_NEAR(model.predict(table.rows[0].features), 12.5, 1e-3);
}

TEST_F(CliTest, ImportanceRanksAndChecksFamily) {
    const std::string data = small_dataset();
    ASSERT_EQ(run({"train", "--input", data, "--output", path("rfr.json"), "--target", "shift_rot", "--trees", "20"})
                  .code,
              0);
    auto r = run({"importance", "--model-file", path("rfr.json"), "--output", path("imp.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(io::read_text_file(path("imp.json")));
    double total = 0.0;
    double previous = 1.0;
    for (const auto& e : j["ranked"]) {
        const double v = e["importance"].get<double>();
        total += v;
        EXPECT_LE(v, previous);
        previous = v;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(j["ranked"][0]["feature"], "placement_offset_rot");
    EXPECT_FALSE(j["selected"].empty());

    ASSERT_EQ(run({"train", "--input", data, "--output", path("mean.json"), "--model", "mean", "--target", "shift_x"})
                  .code,
              0);
    r = run({"importance", "--model-file", path("mean.json")});
    EXPECT_EQ(r.code, cli::kWrongModelFamily);
    EXPECT_EQ(r.err.rfind("error: WrongModelFamily: ", 0), 0u) << r.err;
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
    EXPECT_EQ(run({"generate"}).code, cli::kUsage);
    EXPECT_EQ(run({"--help"}).code, cli::kOk);

    auto r = run({"preprocess", "--input", path("absent.csv"), "--output", path("x.csv")});
    EXPECT_EQ(r.code, cli::kIoError);
    EXPECT_EQ(r.err.rfind("error: IoError: ", 0), 0u) << r.err;

    io::write_text_file(path("bad.csv"), "board_id,combination_id,replicate_id,component_type,size_class,a,shift_x,"
                                         "shift_y,shift_rot\n1,1,1,Q,1005,1,2,3,4\n");
    r = run({"preprocess", "--input", path("bad.csv"), "--output", path("x.csv")});
    EXPECT_EQ(r.code, cli::kParseError);

    const std::string data = small_dataset();
    EXPECT_EQ(run({"evaluate", "--input", data, "--output", path("e.json"), "--folds", "500"}).code, cli::kNoData);
    EXPECT_EQ(run({"train", "--input", data, "--output", path("m.json"), "--target", "shift_z"}).code, cli::kUsage);
    EXPECT_EQ(run({"generate", "--output", path("g.csv"), "--replications", "0"}).code, cli::kUsage);
    EXPECT_EQ(run({"generate", "--output", path("no_such_dir/g.csv")}).code, cli::kIoError);
}

TEST_F(CliTest, ConfigFileLosesToFlags) {
    io::write_text_file(path("cfg.json"), R"({"replications": 2, "seed": 5, "missing_rate": 0})");
    auto r = run({"generate", "--output", path("a.csv"), "--config", path("cfg.json"), "--seed", "7"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("seed: 7"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("wrote 396 records"), std::string::npos) << r.out;
    ASSERT_EQ(run({"generate", "--output", path("b.csv"), "--replications", "2", "--seed", "7", "--missing-rate", "0"})
                  .code,
              0);
    EXPECT_EQ(io::read_text_file(path("a.csv")), io::read_text_file(path("b.csv")));

    io::write_text_file(path("bad.json"), R"({"no_such_option": 1})");
    EXPECT_EQ(run({"generate", "--output", path("c.csv"), "--config", path("bad.json")}).code, cli::kUsage);
    io::write_text_file(path("broken.json"), "{");
    EXPECT_EQ(run({"generate", "--output", path("c.csv"), "--config", path("broken.json")}).code, cli::kParseError);
}

TEST_F(CliTest, EmptyInputGivesHeaderOnlyPredictions) {
    const std::string data = small_dataset();
    ASSERT_EQ(run({"train", "--input", data, "--output", path("m.json"), "--model", "svr", "--target", "shift_x"})
                  .code,
              0);
    const std::string text = io::read_text_file(data);
    io::write_text_file(path("empty.csv"), text.substr(0, text.find('\n') + 1));
    const auto r = run({"predict", "--input", path("empty.csv"), "--output", path("p.csv"), "--model-file",
                        path("m.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string out = io::read_text_file(path("p.csv"));
    EXPECT_EQ(line_count(out), 1u);
    EXPECT_NE(out.find("pred_shift_x"), std::string::npos);
}

TEST_F(CliTest, EvaluateWritesConsistentReport) {
    const std::string data = small_dataset();
    const auto r = run({"evaluate", "--input", data, "--output", path("cv.json"), "--model", "rfr", "--target",
                        "shift_rot", "--trees", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(io::read_text_file(path("cv.json")));
    ASSERT_EQ(j.size(), 1u);
    const auto& t = j[0]["targets"][0];
    ASSERT_EQ(t["folds"].size(), 10u);
    std::vector<double> rmse;
    for (const auto& f : t["folds"]) rmse.push_back(f["test_rmse"].get<double>());
    const double mean = std::accumulate(rmse.begin(), rmse.end(), 0.0) / rmse.size();
    double ss = 0.0;
    for (double v : rmse) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(t["test_rmse"]["mean"].get<double>(), mean, 1e-12);
    EXPECT_NEAR(t["test_rmse"]["std"].get<double>(), std::sqrt(ss / (rmse.size() - 1)), 1e-12);
    EXPECT_TRUE(fs::exists(path("cv.txt")));

    // Same inputs and seed, same bytes at any thread count.
    ASSERT_EQ(run({"evaluate", "--input", data, "--output", path("cv2.json"), "--model", "rfr", "--target",
                   "shift_rot", "--trees", "10", "--threads", "3"})
                  .code,
              0);
    EXPECT_EQ(io::read_text_file(path("cv.json")), io::read_text_file(path("cv2.json")));
}

TEST_F(CliTest, SchemaCommandListsEveryColumn) {
    const auto r = run({"schema"});
    ASSERT_EQ(r.code, 0);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["columns"].size(), 5u + features::kFeatureCount + 3u);
}
