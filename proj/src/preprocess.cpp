#include "reflow/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "reflow/error.hpp"

namespace reflow {

Matrix Dataset::features() const {
    Matrix x(rows.size(), feature_names.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].features.begin(), rows[i].features.end(), x.row(i).begin());
    }
    return x;
}

std::vector<double> Dataset::target(Target t) const {
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = get(rows[i].targets, t);
    return y;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.feature_names = feature_names;
    out.rows.reserve(idx.size());
    for (std::size_t i : idx) out.rows.push_back(rows[i]);
    return out;
}

RawSample to_raw(const Sample& s) {
    RawSample r;
    r.meta = s.meta;
    r.features = s.features;
    for (Target t : kAllTargets) r.targets[static_cast<std::size_t>(t)] = get(s.targets, t);
    return r;
}

namespace preprocess {

MissingResult drop_missing(const std::vector<RawSample>& raw, std::vector<std::string> feature_names) {
    MissingResult result;
    result.input_rows = raw.size();
    result.data.feature_names = std::move(feature_names);
    const std::size_t p = result.data.feature_names.size();
    for (const auto& r : raw) {
        bool complete = r.features.size() == p;
        for (double v : r.features) complete = complete && std::isfinite(v);
        for (const auto& t : r.targets) complete = complete && t.has_value() && std::isfinite(*t);
        if (!complete) {
            ++result.removed;
            continue;
        }
        Sample s;
        s.meta = r.meta;
        s.features = r.features;
        s.targets = {*r.targets[0], *r.targets[1], *r.targets[2]};
        result.data.rows.push_back(std::move(s));
    }
    if (result.data.rows.empty()) {
        throw Error(ErrorKind::EmptyDataset, "no complete rows among " + std::to_string(raw.size()));
    }
    return result;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorKind::EmptyDataset, "quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

// Fences are recomputed on the survivors until a pass removes nothing, which
// makes the rule idempotent.
OutlierResult remove_outliers(const Dataset& d, double k) {
    if (d.rows.empty()) throw Error(ErrorKind::EmptyDataset, "outlier removal on empty dataset");
    if (!(k >= 0.0)) throw Error(ErrorKind::InvalidArgument, "fence multiplier must be non-negative");

    OutlierResult result;
    result.data = d;
    for (;;) {
        std::vector<bool> flagged(result.data.rows.size(), false);
        std::size_t pass_flags = 0;
        for (Target t : kAllTargets) {
            const auto ti = static_cast<std::size_t>(t);
            const std::vector<double> y = result.data.target(t);
            Fence f;
            f.q1 = quantile(y, 0.25);
            f.q3 = quantile(y, 0.75);
            const double iqr = f.q3 - f.q1;
            f.lower = f.q1 - k * iqr;
            f.upper = f.q3 + k * iqr;
            result.fences[ti] = f;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (y[i] < f.lower || y[i] > f.upper) {
                    ++result.flagged_by_target[ti];
                    if (!flagged[i]) ++pass_flags;
                    flagged[i] = true;
                }
            }
        }
        if (pass_flags == 0) break;
        std::vector<Sample> kept;
        kept.reserve(result.data.rows.size() - pass_flags);
        for (std::size_t i = 0; i < flagged.size(); ++i) {
            if (!flagged[i]) kept.push_back(std::move(result.data.rows[i]));
        }
        result.removed += pass_flags;
        result.data.rows = std::move(kept);
        if (result.data.rows.empty()) {
            throw Error(ErrorKind::EmptyDataset, "outlier removal left no rows");
        }
    }
    return result;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        // positions i..j-1 (0-based) share rank mean((i+1)..j)
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t m = i; m < j; ++m) ranks[order[m]] = rank;
        i = j;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorKind::LengthMismatch, "spearman inputs differ in length (" + std::to_string(x.size()) +
                                                   " vs " + std::to_string(y.size()) + ")");
    }
    if (x.size() < 3) throw Error(ErrorKind::InvalidArgument, "spearman needs at least 3 points");
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;  // midranks always average to (n+1)/2
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

FeatureSelection select_features(const Matrix& x, std::span<const double> y, double threshold) {
    if (x.rows() == 0) throw Error(ErrorKind::EmptyDataset, "feature selection on empty data");
    if (!(threshold >= 0.0 && threshold < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "Spearman threshold must lie in [0, 1)");
    }
    FeatureSelection sel;
    sel.correlations.resize(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const std::vector<double> column = x.column(j);
        sel.correlations[j] = spearman(column, y);
        if (std::abs(sel.correlations[j]) >= threshold) {
            sel.kept.push_back(j);
        } else {
            sel.dropped.push_back(j);
        }
    }
    if (sel.kept.empty()) {
        throw Error(ErrorKind::NoFeaturesLeft, "every feature fell below the Spearman threshold");
    }
    return sel;
}

FeatureSelection select_features(const Dataset& d, Target target, double threshold) {
    return select_features(d.features(), d.target(target), threshold);
}

double Scaler::transform(std::size_t j, double v) const {
    return stddev[j] < kMinStd ? 0.0 : (v - mean[j]) / stddev[j];
}

double Scaler::inverse(std::size_t j, double z) const {
    return stddev[j] < kMinStd ? mean[j] : mean[j] + z * stddev[j];
}

void Scaler::transform_row(std::span<const double> in, std::span<double> out) const {
    if (in.size() != size() || out.size() != size()) {
        throw Error(ErrorKind::ShapeMismatch, "scaler width does not match row");
    }
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = transform(j, in[j]);
}

Matrix Scaler::transform(const Matrix& x) const {
    if (x.cols() != size()) throw Error(ErrorKind::ShapeMismatch, "scaler width does not match matrix");
    Matrix z(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) transform_row(x.row(r), z.row(r));
    return z;
}

Matrix Scaler::inverse(const Matrix& z) const {
    if (z.cols() != size()) throw Error(ErrorKind::ShapeMismatch, "scaler width does not match matrix");
    Matrix x(z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        for (std::size_t j = 0; j < z.cols(); ++j) x(r, j) = inverse(j, z(r, j));
    }
    return x;
}

SeriesScale fit_series(std::span<const double> y) {
    if (y.empty()) throw Error(ErrorKind::EmptyDataset, "cannot fit scale on empty series");
    const double n = static_cast<double>(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

Scaler fit_scaler(const Matrix& train) {
    if (train.rows() == 0) throw Error(ErrorKind::EmptyDataset, "cannot fit scaler on zero rows");
    Scaler s;
    s.mean.resize(train.cols());
    s.stddev.resize(train.cols());
    for (std::size_t j = 0; j < train.cols(); ++j) {
        const std::vector<double> column = train.column(j);
        const SeriesScale fit = fit_series(column);
        s.mean[j] = fit.mean;
        s.stddev[j] = fit.stddev;
    }
    return s;
}

}  // namespace preprocess
}  // namespace reflow
