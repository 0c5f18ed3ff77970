#include "reflow/rfr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "reflow/error.hpp"
#include "reflow/parallel.hpp"
#include "reflow/random.hpp"

namespace reflow::rfr {

namespace {

constexpr double kPurityVariance = 1e-12;

// Child SSEs closer than this fraction of the node SSE count as equal, so
// identical partitions reached through different features or summation
// orders tie instead of being ordered by rounding.
constexpr double kTieFraction = 1e-10;

// Midpoint that still separates lo from hi after rounding.
double midpoint(double lo, double hi) {
    const double mid = lo + 0.5 * (hi - lo);
    return mid < hi ? mid : lo;
}

// Scans candidate thresholds of one feature. `order` lists the node's rows
// sorted by feature value; value(r) returns that value. Targets are centred
// on the node mean to keep the running sums well conditioned.
template <typename RowIndex, typename ValueOf>
std::optional<Split> scan_sorted(std::span<const RowIndex> order, ValueOf value, std::span<const double> y,
                                 double mean) {
    const std::size_t n = order.size();
    if (n < 2) return std::nullopt;
    double s1 = 0.0;
    double s2 = 0.0;
    for (RowIndex r : order) {
        const double d = y[r] - mean;
        s1 += d;
        s2 += d * d;
    }
    std::optional<Split> best;
    double l1 = 0.0;
    double l2 = 0.0;
    double v = value(order[0]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = y[order[i]] - mean;
        l1 += d;
        l2 += d * d;
        const double v_next = value(order[i + 1]);
        if (!(v_next > v)) {
            v = v_next;
            continue;
        }
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double sse_l = std::max(0.0, l2 - l1 * l1 / nl);
        const double r1 = s1 - l1;
        const double sse_r = std::max(0.0, (s2 - l2) - r1 * r1 / nr);
        const double sse = sse_l + sse_r;
        if (!best || sse < best->child_sse - kTieFraction * s2) best = Split{midpoint(v, v_next), sse};
        v = v_next;
    }
    return best;
}

struct Candidate {
    std::size_t position;  // index into the tree's feature subset
    Split split;
};

bool better(const Candidate& c, const std::optional<Candidate>& incumbent, std::span<const std::size_t> subset,
            double tie) {
    if (!incumbent) return true;
    if (std::abs(c.split.child_sse - incumbent->split.child_sse) > tie) {
        return c.split.child_sse < incumbent->split.child_sse;
    }
    if (c.split.threshold != incumbent->split.threshold) return c.split.threshold < incumbent->split.threshold;
    return subset[c.position] < subset[incumbent->position];
}

}  // namespace

std::optional<Split> best_split(std::span<const double> column, std::span<const double> y,
                                std::span<const std::size_t> rows) {
    if (column.size() != y.size()) throw Error(ErrorKind::ShapeMismatch, "column and targets differ in length");
    if (rows.size() < 2) return std::nullopt;
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return column[a] < column[b] || (column[a] == column[b] && a < b);
    });
    double mean = 0.0;
    for (std::size_t r : order) mean += y[r];
    mean /= static_cast<double>(order.size());
    return scan_sorted<std::size_t>(order, [&](std::size_t r) { return column[r]; }, y, mean);
}

std::size_t SplitTree::leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& node = nodes[i];
        i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return i;
}

std::size_t SplitTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

SplitTree grow_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> feature_subset,
                    const GrowOptions& options) {
    const std::size_t n = x.rows();
    if (n == 0) throw Error(ErrorKind::TooFewRows, "cannot grow a tree on zero rows");
    if (y.size() != n) throw Error(ErrorKind::ShapeMismatch, "tree rows and targets differ");
    if (feature_subset.empty()) throw Error(ErrorKind::InvalidArgument, "tree needs at least one feature");

    SplitTree tree;
    tree.feature_subset.assign(feature_subset.begin(), feature_subset.end());
    std::sort(tree.feature_subset.begin(), tree.feature_subset.end());
    for (std::size_t f : tree.feature_subset) {
        if (f >= x.cols()) throw Error(ErrorKind::ShapeMismatch, "feature index out of range");
    }
    const auto& subset = tree.feature_subset;
    const std::size_t m = subset.size();

    // sorted[k] holds every row ordered by feature subset[k]; each node owns the
    // same [begin, end) range in all of them.
    std::vector<std::vector<std::uint32_t>> sorted(m, std::vector<std::uint32_t>(n));
    for (std::size_t k = 0; k < m; ++k) {
        auto& order = sorted[k];
        std::iota(order.begin(), order.end(), std::uint32_t{0});
        const std::size_t f = subset[k];
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = x(a, f);
            const double vb = x(b, f);
            return va < vb || (va == vb && a < b);
        });
    }

    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> positions(m);
    std::vector<std::uint8_t> goes_left(n, 0);
    std::vector<std::uint32_t> scratch(n);

    struct Pending {
        std::uint32_t node;
        std::uint32_t begin;
        std::uint32_t end;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, static_cast<std::uint32_t>(n)});

    while (!stack.empty()) {
        const Pending job = stack.back();
        stack.pop_back();
        const std::span<const std::uint32_t> rows(sorted[0].data() + job.begin, job.end - job.begin);
        const std::size_t count = rows.size();

        double mean = 0.0;
        for (std::uint32_t r : rows) mean += y[r];
        mean /= static_cast<double>(count);
        double sse = 0.0;
        for (std::uint32_t r : rows) sse += (y[r] - mean) * (y[r] - mean);
        {
            TreeNode& node = tree.nodes[job.node];
            node.value = mean;
            node.count = static_cast<std::uint32_t>(count);
        }
        if (count < 2 || sse / static_cast<double>(count) <= kPurityVariance) continue;

        std::iota(positions.begin(), positions.end(), std::size_t{0});
        std::size_t n_candidates = m;
        if (options.per_node_features > 0 && options.per_node_features < m) {
            n_candidates = options.per_node_features;
            for (std::size_t i = 0; i < n_candidates; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, m - 1);
                std::swap(positions[i], positions[pick(rng)]);
            }
            std::sort(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(n_candidates));
        }

        std::optional<Candidate> best;
        for (std::size_t c = 0; c < n_candidates; ++c) {
            const std::size_t k = positions[c];
            const std::size_t f = subset[k];
            const std::span<const std::uint32_t> order(sorted[k].data() + job.begin, count);
            auto split = scan_sorted<std::uint32_t>(order, [&](std::uint32_t r) { return x(r, f); }, y, mean);
            if (split) {
                Candidate cand{k, *split};
                if (better(cand, best, subset, kTieFraction * sse)) best = cand;
            }
        }
        if (!best) continue;

        const std::size_t feature = subset[best->position];
        const double threshold = best->split.threshold;
        std::uint32_t n_left = 0;
        for (std::uint32_t r : rows) {
            goes_left[r] = x(r, feature) <= threshold ? 1 : 0;
            n_left += goes_left[r];
        }
        for (std::size_t k = 0; k < m; ++k) {
            std::uint32_t* seg = sorted[k].data() + job.begin;
            std::uint32_t li = 0;
            std::uint32_t ri = n_left;
            for (std::size_t i = 0; i < count; ++i) {
                const std::uint32_t r = seg[i];
                if (goes_left[r]) {
                    scratch[li++] = r;
                } else {
                    scratch[ri++] = r;
                }
            }
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(count), seg);
        }

        const auto left = static_cast<std::uint32_t>(tree.nodes.size());
        const auto right = left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[job.node];
        node.feature = static_cast<std::int32_t>(feature);
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        node.impurity_decrease = std::max(0.0, sse - best->split.child_sse);
        stack.push_back({right, job.begin + n_left, job.end});
        stack.push_back({left, job.begin, job.begin + n_left});
    }
    return tree;
}

std::size_t subset_size(std::size_t p, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "feature fraction must lie in (0, 1]");
    }
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(p) - 1e-12));
    return std::clamp<std::size_t>(k, 1, p);
}

RfrModel train_rfr(const Matrix& x, std::span<const double> y, const ForestParams& params) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (n < 2) throw Error(ErrorKind::TooFewRows, "random forest needs at least 2 rows");
    if (y.size() != n) throw Error(ErrorKind::ShapeMismatch, "forest rows and targets differ");
    if (params.trees == 0) throw Error(ErrorKind::InvalidArgument, "forest needs at least one tree");
    if (p == 0) throw Error(ErrorKind::InvalidArgument, "forest needs at least one feature");
    const std::size_t k = subset_size(p, params.feature_fraction);

    RfrModel model;
    model.params = params;
    model.feature_count = p;
    model.trees.resize(params.trees);

    parallel_for(params.trees, params.threads, [&](std::size_t t) {
        const std::uint64_t tree_seed = derive_seed(params.seed, t);
        std::vector<std::size_t> all(p);
        std::iota(all.begin(), all.end(), std::size_t{0});
        GrowOptions options;
        options.seed = derive_seed(tree_seed, 1);
        if (params.per_node_subsample) {
            options.per_node_features = k;
            model.trees[t] = grow_tree(x, y, all, options);
            return;
        }
        std::mt19937_64 rng(tree_seed);
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, p - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        all.resize(k);
        std::sort(all.begin(), all.end());
        model.trees[t] = grow_tree(x, y, all, options);
    });

    model.importances.assign(p, 0.0);
    for (const auto& tree : model.trees) {
        for (const auto& node : tree.nodes) {
            if (!node.is_leaf()) model.importances[static_cast<std::size_t>(node.feature)] += node.impurity_decrease;
        }
    }
    const double total = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
    if (total > 0.0) {
        for (double& v : model.importances) v /= total;
    }
    return model;
}

double predict_rfr(const RfrModel& model, std::span<const double> x) {
    if (x.size() != model.feature_count) {
        throw Error(ErrorKind::ShapeMismatch, "forest expects " + std::to_string(model.feature_count) +
                                                  " features, got " + std::to_string(x.size()));
    }
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(x);
    return sum / static_cast<double>(model.trees.size());
}

ImportanceRanking select_important(std::span<const double> importances, const ImportanceRule& rule) {
    ImportanceRanking out;
    const std::size_t p = importances.size();
    out.ranked.reserve(p);
    for (std::size_t j = 0; j < p; ++j) out.ranked.emplace_back(j, importances[j]);
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (p == 0) return out;
    if (rule.kind == ImportanceRule::Kind::TopK) {
        for (std::size_t i = 0; i < std::min(rule.k, p); ++i) out.selected.push_back(out.ranked[i].first);
    } else {
        const double uniform = 1.0 / static_cast<double>(p);
        for (const auto& [j, v] : out.ranked) {
            if (v > uniform) out.selected.push_back(j);
        }
    }
    return out;
}

}  // namespace reflow::rfr
