#include "reflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "reflow/error.hpp"
#include "reflow/parallel.hpp"

namespace reflow::eval {

namespace {

void check_fold_args(std::size_t n, std::size_t k) {
    if (k < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
    if (n < k) {
        throw Error(ErrorKind::TooFewRows,
                    std::to_string(n) + " rows cannot fill " + std::to_string(k) + " folds");
    }
}

std::vector<std::vector<std::size_t>> cut(std::span<const std::size_t> order, std::size_t k) {
    const std::size_t n = order.size();
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + pos, order.begin() + pos + size);
        std::sort(folds[f].begin(), folds[f].end());
        pos += size;
    }
    return folds;
}

void check_lengths(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size()) throw Error(ErrorKind::LengthMismatch, "prediction/actual length mismatch");
    if (pred.empty()) throw Error(ErrorKind::EmptyDataset, "no predictions");
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    check_fold_args(n, k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return cut(order, k);
}

std::vector<std::vector<std::size_t>> stratified_kfold_indices(std::span<const int> groups, std::size_t k,
                                                               std::uint64_t seed) {
    const std::size_t n = groups.size();
    check_fold_args(n, k);
    std::map<int, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < n; ++i) by_group[groups[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> dealt;
    dealt.reserve(n);
    for (auto& [g, rows] : by_group) {
        std::shuffle(rows.begin(), rows.end(), rng);
        dealt.insert(dealt.end(), rows.begin(), rows.end());
    }
    // Position i goes to fold i mod k; gathering fold by fold keeps the
    // "first n mod k folds are larger" layout of kfold_indices.
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(dealt[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
    check_lengths(pred, actual);
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    return std::sqrt(ss / static_cast<double>(pred.size()));
}

double r2(std::span<const double> pred, std::span<const double> actual) {
    check_lengths(pred, actual);
    const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ss_res += (pred[i] - actual[i]) * (pred[i] - actual[i]);
        ss_tot += (actual[i] - mean) * (actual[i] - mean);
    }
    if (!(ss_tot > 0.0)) throw Error(ErrorKind::ConstantActual, "r2 undefined for constant actual values");
    return 1.0 - ss_res / ss_tot;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

ComponentSpec type_group(std::size_t i) {
    static constexpr SizeClass sizes[3] = {SizeClass::S1005, SizeClass::S0603, SizeClass::S0402};
    if (i >= kTypeGroups) throw Error(ErrorKind::InvalidArgument, "type group out of range");
    return ComponentSpec::make(i % 2 == 0 ? ComponentType::Capacitor : ComponentType::Resistor, sizes[i / 2]);
}

std::optional<std::size_t> type_group_index(ComponentType type, SizeClass size) {
    for (std::size_t i = 0; i < kTypeGroups; ++i) {
        const ComponentSpec g = type_group(i);
        if (g.type == type && g.size == size) return i;
    }
    return std::nullopt;
}

TypeTable per_type_rmse(std::span<const TestPrediction> predictions) {
    std::array<double, kTypeGroups> ss{};
    std::array<std::size_t, kTypeGroups> count{};
    for (const auto& p : predictions) {
        const auto g = type_group_index(p.meta.type, p.meta.size);
        if (!g) continue;
        ss[*g] += (p.predicted - p.actual) * (p.predicted - p.actual);
        ++count[*g];
    }
    TypeTable table;
    for (std::size_t g = 0; g < kTypeGroups; ++g) {
        if (count[g] > 0) table[g] = GroupRmse{count[g], std::sqrt(ss[g] / static_cast<double>(count[g]))};
    }
    return table;
}

TargetReport cross_validate(const Dataset& data, const ModelConfig& config, Target target,
                            const CvOptions& options) {
    std::vector<std::vector<std::size_t>> folds;
    if (options.stratified) {
        std::vector<int> groups(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& m = data.rows[i].meta;
            groups[i] = static_cast<int>(m.type) * 10000 + static_cast<int>(m.size);
        }
        folds = stratified_kfold_indices(groups, options.folds, options.seed);
    } else {
        folds = kfold_indices(data.size(), options.folds, options.seed);
    }

    const std::vector<double> y = data.target(target);
    std::vector<FoldResult> results(folds.size());
    std::vector<std::vector<TestPrediction>> fold_predictions(folds.size());

    parallel_for(folds.size(), options.threads, [&](std::size_t f) {
        std::vector<std::size_t> train_idx;
        train_idx.reserve(data.size() - folds[f].size());
        std::size_t t = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (t < folds[f].size() && folds[f][t] == i) {
                ++t;
                continue;
            }
            train_idx.push_back(i);
        }
        const Dataset train = data.subset(train_idx);
        FittedModel model;
        try {
            model = fit_model(train, target, config);
        } catch (const Error& e) {
            throw Error(e.kind(), "fold " + std::to_string(f + 1) + ": " + e.what());
        }

        FoldResult& r = results[f];
        r.fold = f;
        r.train_rows = train_idx.size();
        r.test_rows = folds[f].size();
        r.kept_features = model.kept_names();

        const std::vector<double> y_train = train.target(target);
        const std::vector<double> train_pred = model.predict(train.features());
        r.train_r2 = r2(train_pred, y_train);
        r.train_rmse = rmse(train_pred, y_train);

        std::vector<double> test_pred;
        std::vector<double> test_actual;
        auto& preds = fold_predictions[f];
        for (std::size_t i : folds[f]) {
            const Sample& s = data.rows[i];
            const double p = model.predict(s.features);
            test_pred.push_back(p);
            test_actual.push_back(y[i]);
            preds.push_back({i, f, s.meta, p, y[i]});
        }
        r.test_rmse = rmse(test_pred, test_actual);
        try {
            r.test_r2 = r2(test_pred, test_actual);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ConstantActual) throw;
        }
    });

    TargetReport report;
    report.target = target;
    report.folds = std::move(results);
    std::vector<double> train_r2;
    std::vector<double> test_rmse;
    std::vector<double> train_rmse;
    for (const auto& r : report.folds) {
        train_r2.push_back(r.train_r2);
        test_rmse.push_back(r.test_rmse);
        train_rmse.push_back(r.train_rmse);
    }
    report.train_r2 = summarize(train_r2);
    report.test_rmse = summarize(test_rmse);
    report.train_rmse = summarize(train_rmse);
    for (auto& p : fold_predictions) report.predictions.insert(report.predictions.end(), p.begin(), p.end());
    report.per_type = per_type_rmse(report.predictions);
    return report;
}

CvReport cross_validate(const Dataset& data, const ModelConfig& config, std::span<const Target> targets,
                        const CvOptions& options) {
    CvReport report;
    report.config = config;
    report.options = options;
    report.rows = data.size();
    for (Target t : targets) report.targets.push_back(cross_validate(data, config, t, options));
    return report;
}

std::string format_summary_table(std::span<const CvReport> reports) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %-10s %12s %12s %10s %10s\n", "model", "target", "RMSE avg",
                  "RMSE std", "R2 avg", "R2 std");
    out += line;
    for (const auto& rep : reports) {
        for (const auto& t : rep.targets) {
            std::snprintf(line, sizeof line, "%-6s %-10s %12.4f %12.4f %10.4f %10.4f\n",
                          std::string(to_string(rep.config.family)).c_str(),
                          std::string(to_string(t.target)).c_str(), t.test_rmse.mean, t.test_rmse.stddev,
                          t.train_r2.mean, t.train_r2.stddev);
            out += line;
        }
    }
    return out;
}

std::string format_type_table(std::span<const CvReport> reports) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %-6s", "model", "type");
    out += line;
    // Column per target present in the first report.
    std::vector<Target> targets;
    if (!reports.empty()) {
        for (const auto& t : reports.front().targets) targets.push_back(t.target);
    }
    for (Target t : targets) {
        std::snprintf(line, sizeof line, " %12s", std::string(to_string(t)).c_str());
        out += line;
    }
    out += '\n';
    for (const auto& rep : reports) {
        for (std::size_t g = 0; g < kTypeGroups; ++g) {
            std::snprintf(line, sizeof line, "%-6s %-6s", std::string(to_string(rep.config.family)).c_str(),
                          type_group(g).label().c_str());
            out += line;
            for (Target target : targets) {
                std::string cell = "-";
                for (const auto& t : rep.targets) {
                    if (t.target == target && t.per_type[g]) cell = fmt("%.4f", t.per_type[g]->rmse);
                }
                std::snprintf(line, sizeof line, " %12s", cell.c_str());
                out += line;
            }
            out += '\n';
        }
    }
    return out;
}

}  // namespace reflow::eval
