#include "reflow/model.hpp"

#include <numeric>

#include "reflow/error.hpp"

namespace reflow {

std::string_view to_string(Family family) {
    switch (family) {
        case Family::Svr: return "svr";
        case Family::Nn: return "nn";
        case Family::Rfr: return "rfr";
        case Family::Mean: return "mean";
    }
    return "?";
}

Family parse_family(std::string_view text) {
    for (Family f : {Family::Svr, Family::Nn, Family::Rfr, Family::Mean}) {
        if (to_string(f) == text) return f;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown model family '" + std::string(text) + "'");
}

double FittedModel::predict(std::span<const double> row) const {
    if (row.size() != input_names.size()) {
        throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(input_names.size()) + " features, got " +
                                                  std::to_string(row.size()));
    }
    std::vector<double> x(kept.size());
    for (std::size_t j = 0; j < kept.size(); ++j) x[j] = row[kept[j]];
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, svr::SvrModel>) return svr::predict_svr(m, x);
            else if constexpr (std::is_same_v<M, nn::NnModel>) return nn::predict_nn(m, x);
            else if constexpr (std::is_same_v<M, rfr::RfrModel>) return rfr::predict_rfr(m, x);
            else return m.value;
        },
        model);
}

std::vector<double> FittedModel::predict(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
    return out;
}

std::vector<std::string> FittedModel::kept_names() const {
    std::vector<std::string> names;
    names.reserve(kept.size());
    for (std::size_t j : kept) names.push_back(input_names[j]);
    return names;
}

FittedModel fit_model(const Dataset& train, Target target, const ModelConfig& config) {
    if (train.size() == 0) throw Error(ErrorKind::EmptyDataset, "no training rows");
    FittedModel fm;
    fm.family = config.family;
    fm.target = target;
    fm.input_names = train.feature_names;

    const Matrix x_all = train.features();
    const std::vector<double> y = train.target(target);
    if (config.filter_features && config.family != Family::Mean) {
        fm.kept = preprocess::select_features(x_all, y, config.spearman_threshold).kept;
    } else {
        fm.kept.resize(train.feature_count());
        std::iota(fm.kept.begin(), fm.kept.end(), std::size_t{0});
    }
    const Matrix x = x_all.select_cols(fm.kept);

    switch (config.family) {
        case Family::Svr: fm.model = svr::fit_svr(x, y, config.svr); break;
        case Family::Nn: fm.model = nn::fit_nn(x, y, config.nn); break;
        case Family::Rfr: fm.model = rfr::train_rfr(x, y, config.rfr); break;
        case Family::Mean:
            fm.model = MeanModel{std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size())};
            break;
    }
    return fm;
}

}  // namespace reflow
