#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reflow/model.hpp"
#include "reflow/preprocess.hpp"

namespace reflow::eval {

/// Seeded shuffle of 0..n-1 cut into k folds; the first n mod k folds hold
/// one extra row. Throws TooFewRows when n < k.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Same fold sizes, but rows of each group are dealt round-robin so every
/// fold sees every group in proportion.
std::vector<std::vector<std::size_t>> stratified_kfold_indices(std::span<const int> groups, std::size_t k,
                                                               std::uint64_t seed);

double rmse(std::span<const double> pred, std::span<const double> actual);

/// Throws ConstantActual when `actual` has zero variance.
double r2(std::span<const double> pred, std::span<const double> actual);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds (n - 1)
};
Summary summarize(std::span<const double> values);

struct FoldResult {
    std::size_t fold = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    double train_r2 = 0.0;
    double test_rmse = 0.0;
    // Diagnostics beyond the reported pair.
    double train_rmse = 0.0;
    std::optional<double> test_r2;  // absent when the test targets are constant
    std::vector<std::string> kept_features;
};

struct TestPrediction {
    std::size_t row = 0;  // index into the evaluated dataset
    std::size_t fold = 0;
    SampleMeta meta;
    double predicted = 0.0;
    double actual = 0.0;
};

/// The six component types in report order (C1005, R1005, C0603, R0603,
/// C0402, R0402).
inline constexpr std::size_t kTypeGroups = 6;
ComponentSpec type_group(std::size_t i);
std::optional<std::size_t> type_group_index(ComponentType type, SizeClass size);

struct GroupRmse {
    std::size_t count = 0;
    double rmse = 0.0;
};
using TypeTable = std::array<std::optional<GroupRmse>, kTypeGroups>;

/// RMSE within each (type, size) group; empty groups stay absent.
TypeTable per_type_rmse(std::span<const TestPrediction> predictions);

struct TargetReport {
    Target target = Target::ShiftX;
    std::vector<FoldResult> folds;
    Summary train_r2;
    Summary test_rmse;
    Summary train_rmse;
    std::vector<TestPrediction> predictions;  // ordered by fold, then row
    TypeTable per_type;                       // pooled over all folds
};

struct CvOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    bool stratified = false;
    std::size_t threads = 1;
};

struct CvReport {
    ModelConfig config;
    CvOptions options;
    std::size_t rows = 0;
    std::vector<TargetReport> targets;
};

/// k-fold CV of one target. Feature filter and scalers are fit on the
/// training split of every fold; folds run on up to options.threads workers.
TargetReport cross_validate(const Dataset& data, const ModelConfig& config, Target target,
                            const CvOptions& options);

CvReport cross_validate(const Dataset& data, const ModelConfig& config, std::span<const Target> targets,
                        const CvOptions& options);

/// Model x target x {RMSE avg, RMSE std, R2 avg, R2 std}.
std::string format_summary_table(std::span<const CvReport> reports);

/// Model x component type x target test RMSE.
std::string format_type_table(std::span<const CvReport> reports);

}  // namespace reflow::eval
