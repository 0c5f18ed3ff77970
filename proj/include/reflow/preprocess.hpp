#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reflow/features.hpp"
#include "reflow/matrix.hpp"

namespace reflow {

struct SampleMeta {
    RecordMeta ids;
    ComponentType type = ComponentType::Resistor;
    SizeClass size = SizeClass::S1005;

    friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// A row as read from disk: features may be NaN and targets absent.
struct RawSample {
    SampleMeta meta;
    std::vector<double> features;
    std::array<std::optional<double>, 3> targets;
};

struct Sample {
    SampleMeta meta;
    std::vector<double> features;
    TargetTriple targets;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Complete rows sharing one feature schema.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<Sample> rows;

    std::size_t size() const { return rows.size(); }
    std::size_t feature_count() const { return feature_names.size(); }

    Matrix features() const;
    std::vector<double> target(Target t) const;
    Dataset subset(std::span<const std::size_t> idx) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

RawSample to_raw(const Sample& s);

namespace preprocess {

struct MissingResult {
    Dataset data;
    std::size_t input_rows = 0;
    std::size_t removed = 0;
};

/// Drops every row with an absent target or a non-finite feature.
/// Throws EmptyDataset when nothing survives.
MissingResult drop_missing(const std::vector<RawSample>& raw, std::vector<std::string> feature_names);

struct Fence {
    double q1 = 0.0;
    double q3 = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct OutlierResult {
    Dataset data;
    std::size_t removed = 0;
    std::array<std::size_t, 3> flagged_by_target{};  // a row may be flagged by several targets
    std::array<Fence, 3> fences{};
};

/// Linear-interpolation quantile (the "type 7" definition) of unsorted data.
double quantile(std::vector<double> values, double q);

/// Per-target IQR fence on the targets only: a row is removed when any target
/// lies outside [Q1 - k IQR, Q3 + k IQR].
OutlierResult remove_outliers(const Dataset& d, double k = 3.0);

/// Midranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Tie-aware Spearman rank correlation. Returns 0 when either input is
/// constant. Throws LengthMismatch for unequal lengths and InvalidArgument
/// for fewer than 3 points.
double spearman(std::span<const double> x, std::span<const double> y);

struct FeatureSelection {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;
    std::vector<double> correlations;  // one per input column
};

inline constexpr double kDefaultSpearmanThreshold = 0.02;

/// Keeps column j iff |spearman(column j, y)| >= threshold.
/// Throws NoFeaturesLeft when every column is dropped.
FeatureSelection select_features(const Matrix& x, std::span<const double> y, double threshold);
FeatureSelection select_features(const Dataset& d, Target target, double threshold);

/// Per-column z-score parameters fit on training rows only.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> stddev;

    static constexpr double kMinStd = 1e-12;

    std::size_t size() const { return mean.size(); }
    double transform(std::size_t j, double v) const;
    double inverse(std::size_t j, double z) const;
    void transform_row(std::span<const double> in, std::span<double> out) const;
    Matrix transform(const Matrix& x) const;
    Matrix inverse(const Matrix& z) const;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Population mean and standard deviation per column.
Scaler fit_scaler(const Matrix& train);

/// Mean/std of a single series, in the same convention as fit_scaler.
struct SeriesScale {
    double mean = 0.0;
    double stddev = 1.0;

    double transform(double v) const { return stddev < Scaler::kMinStd ? 0.0 : (v - mean) / stddev; }
    double inverse(double z) const { return stddev < Scaler::kMinStd ? mean : mean + z * stddev; }

    friend bool operator==(const SeriesScale&, const SeriesScale&) = default;
};
SeriesScale fit_series(std::span<const double> y);

}  // namespace preprocess
}  // namespace reflow
