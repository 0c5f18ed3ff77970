#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "reflow/matrix.hpp"

namespace reflow::rfr {

struct Split {
    double threshold;   // rows with x <= threshold go left
    double child_sse;   // n_L * MSE_L + n_R * MSE_R
};

/// Exhaustive search over midpoints between adjacent distinct values of
/// `column` restricted to `rows`. Absent when the column is constant on the
/// rows. Ties resolve to the smallest threshold.
std::optional<Split> best_split(std::span<const double> column, std::span<const double> y,
                                std::span<const std::size_t> rows);

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;               // mean training target in the node
    std::uint32_t count = 0;          // training rows in the node
    double impurity_decrease = 0.0;   // SSE(parent) - SSE(children), internal nodes only

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Regression tree; nodes[0] is the root.
struct SplitTree {
    std::vector<TreeNode> nodes;
    std::vector<std::size_t> feature_subset;

    std::size_t leaf_index(std::span<const double> x) const;
    double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }
    std::size_t leaf_count() const;

    friend bool operator==(const SplitTree&, const SplitTree&) = default;
};

struct GrowOptions {
    /// When set, every node draws this many candidates from feature_subset
    /// instead of searching all of it.
    std::size_t per_node_features = 0;
    std::uint64_t seed = 0;
};

/// Fully grown CART regression tree: splits until a node is pure (target
/// variance <= 1e-12) or no candidate feature varies within it.
SplitTree grow_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> feature_subset,
                    const GrowOptions& options = {});

struct ForestParams {
    std::size_t trees = 1000;
    double feature_fraction = 1.0 / 3.0;
    bool per_node_subsample = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct RfrModel {
    std::vector<SplitTree> trees;
    std::vector<double> importances;  // per input feature, sums to 1 unless all zero
    ForestParams params;
    std::size_t feature_count = 0;
};

/// Number of features each tree (or node) sees: ceil(fraction * p), at least 1.
std::size_t subset_size(std::size_t p, double fraction);

/// Every tree sees all rows; randomness enters only through feature subsets
/// drawn from a stream derived from (seed, tree index).
RfrModel train_rfr(const Matrix& x, std::span<const double> y, const ForestParams& params = {});

double predict_rfr(const RfrModel& model, std::span<const double> x);

struct ImportanceRule {
    enum class Kind { AboveUniform, TopK };
    Kind kind = Kind::AboveUniform;
    std::size_t k = 0;
};

struct ImportanceRanking {
    std::vector<std::pair<std::size_t, double>> ranked;  // descending importance
    std::vector<std::size_t> selected;                   // in ranked order
};

/// AboveUniform keeps features with importance strictly greater than 1/p;
/// TopK keeps the k highest.
ImportanceRanking select_important(std::span<const double> importances, const ImportanceRule& rule = {});

}  // namespace reflow::rfr
