#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "reflow/error.hpp"
#include "reflow/rfr.hpp"
#include "support.hpp"

using namespace reflow;
using namespace reflow::rfr;

namespace {

using reflow::testing::oracle_split;
using reflow::testing::sse_of;

struct OracleNode {
    int feature;
    double threshold;
    double value;
};

// Greedy recursive construction over all features, preorder (left first).
// Equal child SSE (to rounding) resolves to the smaller threshold, then the
// smaller feature index.
void oracle_tree(const Matrix& x, const std::vector<double>& y, const std::vector<std::size_t>& rows,
                 std::vector<OracleNode>& out) {
    std::vector<double> ys;
    for (std::size_t r : rows) ys.push_back(y[r]);
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    std::optional<Split> best;
    int best_f = -1;
    if (rows.size() >= 2 && sse_of(ys) / static_cast<double>(ys.size()) > 1e-12) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            const auto s = oracle_split(x.column(f), y, rows);
            if (!s) continue;
            const bool tie = best && std::abs(s->child_sse - best->child_sse) <= 1e-10 * sse_of(ys);
            if (!best || (!tie && s->child_sse < best->child_sse) || (tie && s->threshold < best->threshold)) {
                best = s;
                best_f = static_cast<int>(f);
            }
        }
    }
    if (!best) {
        out.push_back({-1, 0.0, mean});
        return;
    }
    out.push_back({best_f, best->threshold, mean});
    std::vector<std::size_t> l;
    std::vector<std::size_t> r;
    for (std::size_t row : rows) (x(row, best_f) <= best->threshold ? l : r).push_back(row);
    oracle_tree(x, y, l, out);
    oracle_tree(x, y, r, out);
}

void preorder(const SplitTree& t, std::size_t i, std::vector<OracleNode>& out) {
    const auto& n = t.nodes[i];
    out.push_back({n.feature, n.is_leaf() ? 0.0 : n.threshold, n.value});
    if (!n.is_leaf()) {
        preorder(t, n.left, out);
        preorder(t, n.right, out);
    }
}

std::vector<std::size_t> all_features(std::size_t p) {
    std::vector<std::size_t> f(p);
    std::iota(f.begin(), f.end(), std::size_t{0});
    return f;
}

std::vector<std::size_t> all_rows(std::size_t n) { return all_features(n); }

}  // namespace

TEST(BestSplit, Examples) {
    const std::vector<double> x{1, 2, 3, 4};
    const auto perfect = best_split(x, std::vector<double>{0, 0, 10, 10}, all_rows(4));
    ASSERT_TRUE(perfect);
    EXPECT_EQ(perfect->threshold, 2.5);
    EXPECT_EQ(perfect->child_sse, 0.0);

    // Candidates 1.5, 2.5, 3.5 give child SSE 14.0, 8.5, 4.6667.
    const std::vector<double> y{1, 2, 4, 8};
    const auto s = best_split(x, y, all_rows(4));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->threshold, 3.5);
    EXPECT_NEAR(s->child_sse, 14.0 / 3.0, 1e-12);
    EXPECT_NEAR(oracle_split(x, y, all_rows(4))->child_sse, s->child_sse, 1e-12);

    EXPECT_FALSE(best_split(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}, all_rows(3)));
    // Constant targets: every split ties at zero, so the smallest wins.
    const auto flat = best_split(x, std::vector<double>{5, 5, 5, 5}, all_rows(4));
    ASSERT_TRUE(flat);
    EXPECT_EQ(flat->threshold, 1.5);
    EXPECT_EQ(flat->child_sse, 0.0);
}

TEST(BestSplit, MatchesExhaustiveEnumeration) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> level(0, 6);
    std::normal_distribution<double> z;
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 2 + k % 15;
        std::vector<double> x(n + 3);
        std::vector<double> y(n + 3);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = level(rng) * 0.5;
            y[i] = z(rng);
        }
        // A node over a subset of the rows.
        std::vector<std::size_t> rows = all_rows(x.size());
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(n);
        const auto got = best_split(x, y, rows);
        const auto want = oracle_split(x, y, rows);
        ASSERT_EQ(got.has_value(), want.has_value()) << "case " << k;
        if (got) {
            EXPECT_EQ(got->threshold, want->threshold) << "case " << k;
            EXPECT_NEAR(got->child_sse, want->child_sse, 1e-9) << "case " << k;
        }
    }
}

TEST(GrowTree, SixRowHandDataset) {
    Matrix x(6, 2);
    const double c0[] = {1, 2, 3, 4, 5, 6};
    const double c1[] = {3, 1, 2, 6, 5, 4};
    for (std::size_t i = 0; i < 6; ++i) {
        x(i, 0) = c0[i];
        x(i, 1) = c1[i];
    }
    const std::vector<double> y{1.0, 1.5, 4.0, 7.0, 6.2, 9.9};
    const auto tree = grow_tree(x, y, all_features(2));
    std::vector<OracleNode> want;
    oracle_tree(x, y, all_rows(6), want);
    std::vector<OracleNode> got;
    preorder(tree, 0, got);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].feature, want[i].feature) << "node " << i;
        EXPECT_EQ(got[i].threshold, want[i].threshold) << "node " << i;
        EXPECT_NEAR(got[i].value, want[i].value, 1e-12) << "node " << i;
    }
    // The root separates {1, 1.5, 4} from {7, 6.2, 9.9} on feature 0.
    EXPECT_EQ(tree.nodes[0].feature, 0);
    EXPECT_EQ(tree.nodes[0].threshold, 3.5);
}

TEST(GrowTree, RandomTreesMatchGreedyOracle) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    for (int k = 0; k < 20; ++k) {
        const Matrix x = reflow::testing::random_matrix(12 + k, 3, rng);
        std::vector<double> y(x.rows());
        for (auto& v : y) v = z(rng);
        std::vector<OracleNode> want;
        oracle_tree(x, y, all_rows(x.rows()), want);
        std::vector<OracleNode> got;
        preorder(grow_tree(x, y, all_features(3)), 0, got);
        ASSERT_EQ(got.size(), want.size()) << "case " << k;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].feature, want[i].feature);
            EXPECT_NEAR(got[i].threshold, want[i].threshold, 1e-12);
        }
    }
}

TEST(GrowTree, MemorizesDistinctRowsAndHandlesOneRow) {
    std::mt19937_64 rng(3);
    const Matrix x = reflow::testing::random_matrix(200, 4, rng);
    std::normal_distribution<double> z;
    std::vector<double> y(200);
    for (auto& v : y) v = z(rng);
    const auto tree = grow_tree(x, y, all_features(4));
    for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(tree.predict(x.row(i)), y[i]);
    EXPECT_EQ(tree.leaf_count(), 200u);

    Matrix one(1, 2, 0.5);
    const auto single = grow_tree(one, std::vector<double>{4.25}, all_features(2));
    EXPECT_EQ(single.nodes.size(), 1u);
    EXPECT_EQ(single.predict(std::vector<double>{9, 9}), 4.25);
}

TEST(GrowTree, MonotoneTransformKeepsPartitions) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    for (int k = 0; k < 10; ++k) {
        const Matrix x = reflow::testing::random_matrix(60, 3, rng);
        std::vector<double> y(60);
        for (auto& v : y) v = z(rng);
        Matrix t = x;
        for (std::size_t r = 0; r < 60; ++r) t(r, 1) = std::exp(3 * x(r, 1)) + std::pow(x(r, 1), 3);
        const auto a = grow_tree(x, y, all_features(3));
        const auto b = grow_tree(t, y, all_features(3));
        ASSERT_EQ(a.nodes.size(), b.nodes.size());
        // Leaf numbering may differ where two features induce the same
        // partition; the grouping of rows must not.
        std::map<std::size_t, std::size_t> forward;
        std::map<std::size_t, std::size_t> backward;
        for (std::size_t r = 0; r < 60; ++r) {
            const std::size_t la = a.leaf_index(x.row(r));
            const std::size_t lb = b.leaf_index(t.row(r));
            EXPECT_EQ(forward.emplace(la, lb).first->second, lb);
            EXPECT_EQ(backward.emplace(lb, la).first->second, la);
        }
    }
}

TEST(Forest, SingleFullTreeIsPlainCart) {
    std::mt19937_64 rng(5);
    const Matrix x = reflow::testing::random_matrix(80, 5, rng);
    std::vector<double> y(80);
    for (std::size_t i = 0; i < 80; ++i) y[i] = x(i, 0) - 2 * x(i, 3);
    ForestParams params;
    params.trees = 1;
    params.feature_fraction = 1.0;
    const auto forest = train_rfr(x, y, params);
    ASSERT_EQ(forest.trees.size(), 1u);
    EXPECT_EQ(forest.trees[0].nodes, grow_tree(x, y, all_features(5)).nodes);
    for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(predict_rfr(forest, x.row(i)), y[i]);
}

TEST(Forest, DeterministicAcrossThreadCounts) {
    std::mt19937_64 rng(6);
    const Matrix x = reflow::testing::random_matrix(150, 9, rng);
    std::normal_distribution<double> z;
    std::vector<double> y(150);
    for (std::size_t i = 0; i < 150; ++i) y[i] = x(i, 0) * x(i, 1) + z(rng);
    for (bool per_node : {false, true}) {
        ForestParams params;
        params.trees = 40;
        params.seed = 99;
        params.per_node_subsample = per_node;
        params.threads = 1;
        const auto a = train_rfr(x, y, params);
        params.threads = 4;
        const auto b = train_rfr(x, y, params);
        ASSERT_EQ(a.trees.size(), b.trees.size());
        for (std::size_t t = 0; t < a.trees.size(); ++t) EXPECT_EQ(a.trees[t], b.trees[t]);
        EXPECT_EQ(a.importances, b.importances);
        params.seed = 100;
        EXPECT_NE(train_rfr(x, y, params).importances, a.importances);
    }
}

TEST(Forest, PerTreeSubsetsHaveTheRightSize) {
    EXPECT_EQ(subset_size(48, 1.0 / 3.0), 16u);
    EXPECT_EQ(subset_size(10, 1.0 / 3.0), 4u);
    EXPECT_EQ(subset_size(2, 0.01), 1u);
    std::mt19937_64 rng(7);
    const Matrix x = reflow::testing::random_matrix(30, 10, rng);
    std::vector<double> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, 2);
    ForestParams params;
    params.trees = 25;
    const auto forest = train_rfr(x, y, params);
    for (const auto& t : forest.trees) {
        EXPECT_EQ(t.feature_subset.size(), 4u);
        EXPECT_TRUE(std::is_sorted(t.feature_subset.begin(), t.feature_subset.end()));
        for (const auto& n : t.nodes) {
            if (!n.is_leaf()) {
                EXPECT_TRUE(std::binary_search(t.feature_subset.begin(), t.feature_subset.end(),
                                               static_cast<std::size_t>(n.feature)));
            }
        }
    }
}

TEST(Forest, SingleSignalFeatureDominatesImportance) {
    std::mt19937_64 rng(8);
    const Matrix x = reflow::testing::random_matrix(300, 10, rng);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = std::sin(3 * x(i, 3)) + x(i, 3);
    ForestParams params;
    params.trees = 50;
    params.feature_fraction = 1.0;
    const auto forest = train_rfr(x, y, params);
    EXPECT_GE(forest.importances[3], 0.9);
    const double sum = std::accumulate(forest.importances.begin(), forest.importances.end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (double v : forest.importances) EXPECT_GE(v, 0.0);
    EXPECT_EQ(select_important(forest.importances).ranked.front().first, 3u);
}

TEST(Forest, ThreeSignalFeaturesSelected) {
    std::mt19937_64 rng(9);
    const Matrix x = reflow::testing::random_matrix(400, 10, rng);
    std::vector<double> y(400);
    for (std::size_t i = 0; i < 400; ++i) y[i] = 2 * x(i, 1) - 2 * x(i, 4) + 2 * x(i, 7);
    ForestParams params;
    params.trees = 200;
    const auto forest = train_rfr(x, y, params);
    const auto chosen = select_important(forest.importances);
    std::vector<std::size_t> kept = chosen.selected;
    std::sort(kept.begin(), kept.end());
    EXPECT_EQ(kept, (std::vector<std::size_t>{1, 4, 7}));
}

TEST(Forest, PredictionsStayWithinTrainingRange) {
    std::mt19937_64 rng(10);
    const Matrix x = reflow::testing::random_matrix(100, 4, rng);
    std::normal_distribution<double> z;
    std::vector<double> y(100);
    for (auto& v : y) v = z(rng);
    ForestParams params;
    params.trees = 30;
    const auto forest = train_rfr(x, y, params);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    std::uniform_real_distribution<double> wide(-5, 5);
    for (int k = 0; k < 500; ++k) {
        std::vector<double> q(4);
        for (auto& v : q) v = wide(rng);
        const double p = predict_rfr(forest, q);
        EXPECT_GE(p, *lo);
        EXPECT_LE(p, *hi);
    }
}

TEST(Forest, ConstantTargetsGiveZeroImportances) {
    std::mt19937_64 rng(11);
    const Matrix x = reflow::testing::random_matrix(20, 3, rng);
    ForestParams params;
    params.trees = 5;
    const auto forest = train_rfr(x, std::vector<double>(20, 2.0), params);
    for (double v : forest.importances) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(predict_rfr(forest, x.row(0)), 2.0);
}

TEST(Forest, AveragesTreePredictions) {
    RfrModel m;
    m.feature_count = 2;
    SplitTree a;
    a.nodes.push_back(TreeNode{});
    a.nodes[0].value = 1.0;
    SplitTree b = a;
    b.nodes[0].value = 3.0;
    m.trees = {a, b};
    EXPECT_EQ(predict_rfr(m, std::vector<double>{0, 0}), 2.0);
    m.trees = {a, a};
    EXPECT_EQ(predict_rfr(m, std::vector<double>{0, 0}), 1.0);
    try {
        predict_rfr(m, std::vector<double>{0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(SelectImportant, Rules) {
    const std::vector<double> uniform(10, 0.1);
    EXPECT_TRUE(select_important(uniform).selected.empty());
    EXPECT_EQ(select_important(uniform).ranked.size(), 10u);

    std::vector<double> dominant(10, 0.1 / 9);
    dominant[6] = 0.9;
    EXPECT_EQ(select_important(dominant).selected, (std::vector<std::size_t>{6}));

    const std::vector<double> imp{0.1, 0.4, 0.2, 0.3};
    const auto top = select_important(imp, {ImportanceRule::Kind::TopK, 2});
    EXPECT_EQ(top.selected, (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(top.ranked.front(), (std::pair<std::size_t, double>{1, 0.4}));
    EXPECT_EQ(top.ranked.back(), (std::pair<std::size_t, double>{0, 0.1}));
}
