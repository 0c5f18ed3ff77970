#include "reflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "reflow/datagen.hpp"
#include "reflow/eval.hpp"
#include "reflow/io.hpp"
#include "reflow/model.hpp"

namespace reflow::cli {

using nlohmann::json;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::IoError: return kIoError;
        case ErrorKind::ParseError: return kParseError;
        case ErrorKind::EmptyDataset:
        case ErrorKind::TooFewRows: return kNoData;
        case ErrorKind::SchemaMismatch: return kSchemaMismatch;
        case ErrorKind::NotConverged: return kNotConverged;
        case ErrorKind::Diverged: return kDiverged;
        case ErrorKind::WrongModelFamily: return kWrongModelFamily;
        case ErrorKind::InvalidArgument: return kUsage;
        default: return kOther;
    }
}

namespace {

struct RunConfig {
    std::string input;
    std::string output;
    std::string config;
    std::uint64_t seed = 1;
    std::string model = "rfr";
    std::string target = "all";
    std::size_t folds = 10;
    std::size_t threads = 1;

    // generate
    int replications = 20;
    double missing_rate = 0.005;
    std::array<double, 3> noise{8.0, 8.0, 0.5};
    double interaction = 0.0;

    // preprocess
    std::string report;
    double outlier_k = 3.0;

    // model hyperparameters
    double tau = preprocess::kDefaultSpearmanThreshold;
    bool no_filter = false;
    std::size_t trees = 1000;
    double feature_fraction = 1.0 / 3.0;
    bool per_node = false;
    double svr_c = 1.0;
    double svr_epsilon = 0.1;
    double svr_tol = 1e-4;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t hidden = 100;

    // evaluate / predict / importance
    bool stratified = false;
    std::string tables;
    std::vector<std::string> model_files;
    std::size_t top_k = 0;
};

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::vector<Target> parse_targets(const std::string& text) {
    if (text == "all") return {kAllTargets.begin(), kAllTargets.end()};
    return {parse_target(text)};
}

std::vector<Family> parse_families(const std::string& text) {
    if (text == "all") return {Family::Svr, Family::Nn, Family::Rfr};
    return {parse_family(text)};
}

ModelConfig model_config(const RunConfig& rc, Family family) {
    ModelConfig mc;
    mc.family = family;
    mc.filter_features = !rc.no_filter;
    mc.spearman_threshold = rc.tau;
    mc.svr.C = rc.svr_c;
    mc.svr.epsilon = rc.svr_epsilon;
    mc.svr.tol = rc.svr_tol;
    mc.nn.epochs = rc.epochs;
    mc.nn.batch_size = rc.batch_size;
    mc.nn.adam.learning_rate = rc.learning_rate;
    mc.nn.second_hidden = rc.hidden;
    mc.nn.seed = rc.seed;
    mc.rfr.trees = rc.trees;
    mc.rfr.feature_fraction = rc.feature_fraction;
    mc.rfr.per_node_subsample = rc.per_node;
    mc.rfr.seed = rc.seed;
    mc.rfr.threads = rc.threads;
    return mc;
}

/// Complete rows only; a file with absent values must go through preprocess.
Dataset load_dataset(const std::string& path) {
    io::CsvTable table = io::read_csv_file(path);
    if (!table.has_targets) throw Error(ErrorKind::SchemaMismatch, "'" + path + "' has no target columns");
    return preprocess::drop_missing(table.rows, table.feature_names).data;
}

std::string sibling(const std::string& path, const std::string& suffix) {
    const auto dot = path.rfind('.');
    const auto slash = path.rfind('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot) + suffix;
    return path + suffix;
}

int cmd_generate(const RunConfig& rc, std::ostream& out) {
    datagen::GenConfig g;
    g.seed = rc.seed;
    g.replications = rc.replications;
    g.missing_rate = rc.missing_rate;
    g.target_noise = rc.noise;
    g.truth.interaction = rc.interaction;
    const auto records = datagen::generate(g);
    io::CsvTable table;
    table.feature_names = features::feature_names();
    table.rows = datagen::to_samples(records);
    io::write_csv_file(rc.output, table);
    const std::string schema_path = sibling(rc.output, ".schema.json");
    io::write_text_file(schema_path, io::schema_json().dump(2) + "\n");
    std::size_t missing = 0;
    for (const auto& r : records) missing += r.targets ? 0 : 1;
    out << "wrote " << records.size() << " records (" << missing << " with missing targets) to " << rc.output
        << "\nschema: " << schema_path << "\nseed: " << rc.seed << "\n";
    return kOk;
}

int cmd_preprocess(const RunConfig& rc, std::ostream& out) {
    const io::CsvTable table = io::read_csv_file(rc.input);
    if (!table.has_targets) throw Error(ErrorKind::SchemaMismatch, "'" + rc.input + "' has no target columns");
    const auto missing = preprocess::drop_missing(table.rows, table.feature_names);
    const auto outliers = preprocess::remove_outliers(missing.data, rc.outlier_k);
    if (outliers.data.size() == 0) throw Error(ErrorKind::EmptyDataset, "every row was removed as an outlier");
    io::write_csv_file(rc.output, io::to_table(outliers.data));
    json report = io::to_json(outliers, missing);
    report["outlier_k"] = rc.outlier_k;
    const std::string report_path = rc.report.empty() ? sibling(rc.output, ".report.json") : rc.report;
    io::write_text_file(report_path, report.dump(2) + "\n");
    out << "input rows: " << missing.input_rows << "\nmissing_removed: " << missing.removed
        << "\noutliers_removed: " << outliers.removed << "\noutput rows: " << outliers.data.size()
        << "\nreport: " << report_path << "\n";
    return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
    if (rc.target == "all") throw Error(ErrorKind::InvalidArgument, "train needs a single --target");
    const Target target = parse_target(rc.target);
    const Family family = parse_family(rc.model);
    const Dataset data = load_dataset(rc.input);
    const FittedModel model = fit_model(data, target, model_config(rc, family));
    io::save_model(rc.output, model);
    const std::vector<double> pred = model.predict(data.features());
    const std::vector<double> actual = data.target(target);
    out << "model: " << to_string(family) << "\ntarget: " << to_string(target) << "\nrows: " << data.size()
        << "\nkept features: " << model.kept.size() << "\nseed: " << rc.seed << "\n";
    try {
        out << "train R2: " << fmt("%.3f", eval::r2(pred, actual)) << "\n";
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ConstantActual) throw;
        out << "train R2: undefined (constant target)\n";
    }
    out << "train RMSE: " << fmt("%.4f", eval::rmse(pred, actual)) << "\n";
    return kOk;
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out) {
    const Dataset data = load_dataset(rc.input);
    const std::vector<Target> targets = parse_targets(rc.target);
    eval::CvOptions options;
    options.folds = rc.folds;
    options.seed = rc.seed;
    options.stratified = rc.stratified;
    options.threads = rc.threads;

    std::vector<eval::CvReport> reports;
    json j = json::array();
    for (Family family : parse_families(rc.model)) {
        ModelConfig mc = model_config(rc, family);
        // Folds already run in parallel; keep each forest on one thread.
        if (rc.threads > 1) mc.rfr.threads = 1;
        reports.push_back(eval::cross_validate(data, mc, targets, options));
        j.push_back(io::to_json(reports.back()));
    }
    const std::string text = "Test RMSE (mean, std over folds) and train R2\n" +
                             eval::format_summary_table(reports) + "\nTest RMSE by component type\n" +
                             eval::format_type_table(reports);
    io::write_text_file(rc.output, j.dump(1) + "\n");
    const std::string tables = rc.tables.empty() ? sibling(rc.output, ".txt") : rc.tables;
    io::write_text_file(tables, text);
    out << text << "\nrows: " << data.size() << "\nfolds: " << rc.folds << "\nseed: " << rc.seed
        << "\nreport: " << rc.output << "\ntables: " << tables << "\n";
    return kOk;
}

int cmd_predict(const RunConfig& rc, std::ostream& out) {
    if (rc.model_files.empty()) throw Error(ErrorKind::InvalidArgument, "predict needs --model-file");
    io::CsvTable table = io::read_csv_file(rc.input);
    io::ExtraColumns extra;
    for (const auto& path : rc.model_files) {
        const FittedModel model = io::load_model(path);
        if (model.input_names != table.feature_names) {
            throw Error(ErrorKind::SchemaMismatch, "'" + path + "' expects different feature columns than '" +
                                                       rc.input + "'");
        }
        std::vector<double> pred(table.rows.size());
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto& f = table.rows[r].features;
            if (std::any_of(f.begin(), f.end(), [](double v) { return !std::isfinite(v); })) {
                throw Error(ErrorKind::InvalidRecord, "row " + std::to_string(r + 1) + " has a missing feature");
            }
            pred[r] = model.predict(f);
        }
        extra.emplace_back("pred_" + std::string(to_string(model.target)), std::move(pred));
    }
    io::write_csv_file(rc.output, table, extra);
    out << "wrote " << table.rows.size() << " rows with " << extra.size() << " prediction column(s) to "
        << rc.output << "\n";
    return kOk;
}

int cmd_importance(const RunConfig& rc, std::ostream& out) {
    if (rc.model_files.size() != 1) throw Error(ErrorKind::InvalidArgument, "importance needs one --model-file");
    const FittedModel model = io::load_model(rc.model_files.front());
    if (model.family != Family::Rfr) {
        throw Error(ErrorKind::WrongModelFamily,
                    "importance needs an rfr model, got " + std::string(to_string(model.family)));
    }
    const auto& forest = std::get<rfr::RfrModel>(model.model);
    rfr::ImportanceRule rule;
    if (rc.top_k > 0) rule = {rfr::ImportanceRule::Kind::TopK, rc.top_k};
    const auto ranking = rfr::select_important(forest.importances, rule);
    const auto names = model.kept_names();

    json ranked = json::array();
    char line[160];
    out << "target: " << to_string(model.target) << "\n";
    std::snprintf(line, sizeof line, "%4s  %-32s %10s\n", "rank", "feature", "importance");
    out << line;
    for (std::size_t i = 0; i < ranking.ranked.size(); ++i) {
        const auto& [idx, value] = ranking.ranked[i];
        std::snprintf(line, sizeof line, "%4zu  %-32s %10.6f\n", i + 1, names[idx].c_str(), value);
        out << line;
        ranked.push_back({{"feature", names[idx]}, {"importance", value}});
    }
    json selected = json::array();
    out << "selected (" << (rc.top_k > 0 ? "top " + std::to_string(rc.top_k) : std::string("above 1/p")) << "):";
    for (std::size_t idx : ranking.selected) {
        out << " " << names[idx];
        selected.push_back(names[idx]);
    }
    out << "\n";
    if (!rc.output.empty()) {
        io::write_text_file(rc.output, json{{"target", std::string(to_string(model.target))},
                                            {"ranked", ranked},
                                            {"selected", selected}}
                                               .dump(2) +
                                           "\n");
    }
    return kOk;
}

// Appends "--key value" tokens from a JSON config file for every option of
// `sub` not given on the command line.
std::vector<std::string> config_tokens(const CLI::App& sub, const std::string& path) {
    json j;
    try {
        j = json::parse(io::read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, "config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "config '" + path + "' must be a JSON object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : j.items()) {
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        const CLI::Option* opt = sub.get_option_no_throw("--" + name);
        if (opt == nullptr) {
            throw Error(ErrorKind::InvalidArgument, "config key '" + key + "' is not an option of " + sub.get_name());
        }
        if (opt->count() > 0 || name == "config") continue;
        auto scalar = [&](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_boolean()) {
            if (value.get<bool>()) tokens.push_back("--" + name);
        } else if (value.is_array()) {
            for (const auto& v : value) {
                tokens.push_back("--" + name);
                tokens.push_back(scalar(v));
            }
        } else {
            tokens.push_back("--" + name);
            tokens.push_back(scalar(value));
        }
    }
    return tokens;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    CLI::App app{"Reflow component shift: synthetic data, learners and cross-validation"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", rc.config, "JSON file of option values; command-line flags win");
        sub->add_option("--seed", rc.seed, "random seed")->capture_default_str();
    };
    auto add_model_options = [&](CLI::App* sub) {
        sub->add_option("--threads", rc.threads, "worker threads")->capture_default_str();
        sub->add_option("--tau", rc.tau, "Spearman |rho| threshold for keeping a feature")->capture_default_str();
        sub->add_flag("--no-filter", rc.no_filter, "skip the Spearman feature filter");
        sub->add_option("--trees", rc.trees, "rfr: number of trees")->capture_default_str();
        sub->add_option("--feature-fraction", rc.feature_fraction, "rfr: fraction of features per tree")
            ->capture_default_str();
        sub->add_flag("--per-node", rc.per_node, "rfr: draw the feature subset at every node");
        sub->add_option("--C", rc.svr_c, "svr: penalty")->capture_default_str();
        sub->add_option("--epsilon", rc.svr_epsilon, "svr: tube half-width")->capture_default_str();
        sub->add_option("--svr-tol", rc.svr_tol, "svr: stopping tolerance")->capture_default_str();
        sub->add_option("--epochs", rc.epochs, "nn: training epochs")->capture_default_str();
        sub->add_option("--batch-size", rc.batch_size, "nn: mini-batch size")->capture_default_str();
        sub->add_option("--learning-rate", rc.learning_rate, "nn: Adam step size")->capture_default_str();
        sub->add_option("--hidden", rc.hidden, "nn: width of the second hidden layer")->capture_default_str();
    };

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset CSV");
    add_common(gen);
    gen->add_option("--output", rc.output, "dataset CSV")->required();
    gen->add_option("--replications", rc.replications, "replications per combination")->capture_default_str();
    gen->add_option("--missing-rate", rc.missing_rate, "fraction of records with missing targets")
        ->capture_default_str();
    gen->add_option("--noise-x", rc.noise[0], "target noise std, um")->capture_default_str();
    gen->add_option("--noise-y", rc.noise[1], "target noise std, um")->capture_default_str();
    gen->add_option("--noise-rot", rc.noise[2], "target noise std, deg")->capture_default_str();
    gen->add_option("--interaction", rc.interaction, "weight of the placement y x rotation term in shift_x")
        ->capture_default_str();

    auto* pre = app.add_subcommand("preprocess", "drop incomplete rows and target outliers");
    add_common(pre);
    pre->add_option("--input", rc.input, "dataset CSV")->required();
    pre->add_option("--output", rc.output, "cleaned CSV")->required();
    pre->add_option("--report", rc.report, "cleaning report JSON (default: next to --output)");
    pre->add_option("--outlier-k", rc.outlier_k, "IQR fence multiplier")->capture_default_str();

    auto* train = app.add_subcommand("train", "fit one model for one target");
    add_common(train);
    add_model_options(train);
    train->add_option("--input", rc.input, "cleaned CSV")->required();
    train->add_option("--output", rc.output, "model JSON")->required();
    train->add_option("--model", rc.model, "svr | nn | rfr | mean")->capture_default_str();
    train->add_option("--target", rc.target, "shift_x | shift_y | shift_rot")->required();

    auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation");
    add_common(evaluate);
    add_model_options(evaluate);
    evaluate->add_option("--input", rc.input, "cleaned CSV")->required();
    evaluate->add_option("--output", rc.output, "report JSON")->required();
    evaluate->add_option("--tables", rc.tables, "text tables (default: --output with .txt)");
    evaluate->add_option("--model", rc.model, "svr | nn | rfr | mean | all")->capture_default_str();
    evaluate->add_option("--target", rc.target, "shift_x | shift_y | shift_rot | all")->capture_default_str();
    evaluate->add_option("--folds", rc.folds, "number of folds")->capture_default_str();
    evaluate->add_flag("--stratified", rc.stratified, "stratify folds by component type");

    auto* predict = app.add_subcommand("predict", "append model predictions to a CSV");
    add_common(predict);
    predict->add_option("--input", rc.input, "feature CSV")->required();
    predict->add_option("--output", rc.output, "output CSV")->required();
    predict->add_option("--model-file", rc.model_files, "model JSON (repeatable)")->required();

    auto* importance = app.add_subcommand("importance", "rank the features of an rfr model");
    add_common(importance);
    importance->add_option("--model-file", rc.model_files, "rfr model JSON")->required()->expected(1);
    importance->add_option("--output", rc.output, "ranking JSON");
    importance->add_option("--top-k", rc.top_k, "select the k best instead of those above 1/p");

    auto* schema = app.add_subcommand("schema", "print the dataset column schema");

    std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
    try {
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(reversed);
        CLI::App* sub = app.get_subcommands().front();
        if (!rc.config.empty()) {
            auto extra = config_tokens(*sub, rc.config);
            if (!extra.empty()) {
                argv.insert(argv.end(), extra.begin(), extra.end());
                rc = RunConfig{};
                app.clear();
                std::vector<std::string> again(argv.rbegin(), argv.rend());
                app.parse(again);
            }
        }
        if (sub == gen) return cmd_generate(rc, out);
        if (sub == pre) return cmd_preprocess(rc, out);
        if (sub == train) return cmd_train(rc, out);
        if (sub == evaluate) return cmd_evaluate(rc, out);
        if (sub == predict) return cmd_predict(rc, out);
        if (sub == importance) return cmd_importance(rc, out);
        if (sub == schema) {
            out << io::schema_json().dump(2) << "\n";
            return kOk;
        }
        return kUsage;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const Error& e) {
        err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: Internal: " << e.what() << "\n";
        return kOther;
    }
}

}  // namespace reflow::cli
