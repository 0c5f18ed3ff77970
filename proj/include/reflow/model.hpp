#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "reflow/nn.hpp"
#include "reflow/preprocess.hpp"
#include "reflow/rfr.hpp"
#include "reflow/svr.hpp"

namespace reflow {

/// Mean is a constant-prediction baseline, not one of the studied learners.
enum class Family { Svr, Nn, Rfr, Mean };

std::string_view to_string(Family family);  // "svr" / "nn" / "rfr" / "mean"
Family parse_family(std::string_view text);

struct ModelConfig {
    Family family = Family::Rfr;
    svr::SvrParams svr;
    nn::NnConfig nn;
    rfr::ForestParams rfr;
    /// Spearman filter applied to the training rows before fitting.
    bool filter_features = true;
    double spearman_threshold = preprocess::kDefaultSpearmanThreshold;
};

struct MeanModel {
    double value = 0.0;
};

/// One trained model for one target. Inputs are full-width feature rows;
/// the model reads only the columns in `kept`.
struct FittedModel {
    Family family = Family::Rfr;
    Target target = Target::ShiftX;
    std::vector<std::string> input_names;  // schema the model expects
    std::vector<std::size_t> kept;         // columns of input_names used
    std::variant<svr::SvrModel, nn::NnModel, rfr::RfrModel, MeanModel> model;

    double predict(std::span<const double> row) const;
    std::vector<double> predict(const Matrix& x) const;
    std::vector<std::string> kept_names() const;
};

/// Feature filter (on `train` only) followed by the family's fit.
FittedModel fit_model(const Dataset& train, Target target, const ModelConfig& config);

}  // namespace reflow
