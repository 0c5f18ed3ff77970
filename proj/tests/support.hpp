#pragma once

// Helpers shared by the unit tests and the acceptance binary. Oracles here
// are written independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <numbers>
#include <random>
#include <vector>

#include "reflow/features.hpp"
#include "reflow/geometry.hpp"
#include "reflow/matrix.hpp"
#include "reflow/nn.hpp"
#include "reflow/rfr.hpp"

namespace reflow::testing {

/// Point membership by projecting onto the rectangle's own axes.
inline bool inside(const geometry::Rect2D& r, double x, double y) {
    const double t = r.rotation * std::numbers::pi / 180.0;
    const double dx = x - r.center_x;
    const double dy = y - r.center_y;
    const double u = std::cos(t) * dx + std::sin(t) * dy;
    const double v = -std::sin(t) * dx + std::cos(t) * dy;
    return std::abs(u) <= 0.5 * r.length && std::abs(v) <= 0.5 * r.width;
}

struct McEstimate {
    double area;
    double std_error;
};

/// Overlap area of a and b from uniform samples over a's bounding circle box.
inline McEstimate mc_overlap(const geometry::Rect2D& a, const geometry::Rect2D& b, std::size_t samples,
                             std::uint64_t seed) {
    const double half = 0.5 * std::hypot(a.length, a.width);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(a.center_x - half, a.center_x + half);
    std::uniform_real_distribution<double> uy(a.center_y - half, a.center_y + half);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        if (inside(a, x, y) && inside(b, x, y)) ++hits;
    }
    const double box = 4.0 * half * half;
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    return {box * p, box * std::sqrt(p * (1.0 - p) / static_cast<double>(samples))};
}

inline geometry::Rect2D random_rect(std::mt19937_64& rng, double spread) {
    std::uniform_real_distribution<double> c(-spread, spread);
    std::uniform_real_distribution<double> s(0.2, 2.0);
    std::uniform_real_distribution<double> r(-179.0, 180.0);
    return {c(rng), c(rng), s(rng), s(rng), r(rng)};
}

/// A well-formed record of the given size with every offset zero and both
/// deposits identical.
inline AssemblyRecord centered_record(SizeClass size = SizeClass::S1005,
                                      ComponentType type = ComponentType::Capacitor) {
    AssemblyRecord r;
    r.component = ComponentSpec::make(type, size);
    const double L = r.component.length;
    const double W = r.component.width;
    r.pads.pad1 = {-0.4 * L, 0.0, 0.4 * L, 1.1 * W, 0.0};
    r.pads.pad2 = {0.4 * L, 0.0, 0.4 * L, 1.1 * W, 0.0};
    const double area = 1.1 * 0.4 * L * 1.1 * W;
    r.paste1 = {area * 0.1, area, 0.1, {}};
    r.paste2 = r.paste1;
    r.placement.pressure = 2.0;
    return r;
}

/// Random matrix with entries uniform in [-1, 1].
inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = u(rng);
    }
    return m;
}

/// Pearson correlation, straight from the definition.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Midranks by counting: rank = 1 + #smaller + (#equal - 1) / 2. Quadratic,
/// deliberately unlike the sort-based library version.
inline std::vector<double> brute_midranks(const std::vector<double>& v) {
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t smaller = 0;
        std::size_t equal = 0;
        for (double w : v) {
            if (w < v[i]) ++smaller;
            if (w == v[i]) ++equal;
        }
        ranks[i] = 1.0 + static_cast<double>(smaller) + 0.5 * static_cast<double>(equal - 1);
    }
    return ranks;
}

inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(brute_midranks(x), brute_midranks(y));
}

/// 1 - 6 sum d^2 / (n (n^2 - 1)); valid only without ties.
inline double rank_difference_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = brute_midranks(x);
    const auto ry = brute_midranks(y);
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double n = static_cast<double>(x.size());
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// Objective at a fixed w with the bias chosen exactly: the slack term is
/// convex piecewise linear in b, so one of the breakpoints y_i - <w,x_i> +- eps
/// is a minimiser.
inline double svr_objective_best_b(const Matrix& x, const std::vector<double>& y, const std::vector<double>& w,
                                   double C, double eps) {
    const std::size_t n = y.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = y[i];
        for (std::size_t j = 0; j < w.size(); ++j) r[i] -= w[j] * x(i, j);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 2 * n; ++k) {
        const double b = r[k / 2] + (k % 2 == 0 ? eps : -eps);
        double slack = 0.0;
        for (double ri : r) slack += std::max(0.0, std::abs(ri - b) - eps);
        best = std::min(best, slack);
    }
    double ww = 0.0;
    for (double v : w) ww += v * v;
    return 0.5 * ww + C * best;
}

/// Linear SVR grid oracle over w (exact in b): a coarse sweep followed by a fine sweep around
/// the coarse winner.
inline double svr_grid_oracle(const Matrix& x, const std::vector<double>& y, double C, double eps) {
    const std::size_t p = x.cols();
    std::vector<double> center(p, 0.0);
    double best = std::numeric_limits<double>::infinity();
    for (auto [half, step] : {std::pair{4.0, 0.05}, std::pair{0.1, p == 1 ? 1e-5 : 5e-4}}) {
        const auto steps = static_cast<long>(std::lround(2 * half / step));
        std::vector<double> w(p);
        std::vector<double> winner = center;
        if (p == 1) {
            for (long a = 0; a <= steps; ++a) {
                w[0] = center[0] - half + a * step;
                const double v = svr_objective_best_b(x, y, w, C, eps);
                if (v < best) best = v, winner = w;
            }
        } else {
            for (long a = 0; a <= steps; ++a) {
                for (long c = 0; c <= steps; ++c) {
                    w[0] = center[0] - half + a * step;
                    w[1] = center[1] - half + c * step;
                    const double v = svr_objective_best_b(x, y, w, C, eps);
                    if (v < best) best = v, winner = w;
                }
            }
        }
        center = winner;
    }
    return best;
}

/// Smallest |pre-activation| over hidden units and batch rows.
inline double min_hidden_margin(const nn::Network& net, const Matrix& x) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> h(x.row(r).begin(), x.row(r).end());
        for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
            std::vector<double> z(net.sizes[l + 1]);
            for (std::size_t o = 0; o < z.size(); ++o) {
                double s = net.bias(l, o);
                for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * net.weight(l, i, o);
                m = std::min(m, std::abs(s));
                z[o] = std::max(0.0, s);
            }
            h = z;
        }
    }
    return m;
}

/// He-initialised network with random nonzero biases.
inline nn::Network randomized_network(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    auto net = nn::init_network(sizes, seed);
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> z(0.0, 0.3);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (std::size_t o = 0; o < net.sizes[l + 1]; ++o) net.bias(l, o) = z(rng);
    }
    return net;
}

inline double sse_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
}

/// Every midpoint between adjacent distinct values, child SSE computed from
/// scratch; a candidate must beat the incumbent by more than 1e-10 of the node
/// SSE, so ties keep the smallest threshold.
inline std::optional<rfr::Split> oracle_split(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<std::size_t>& rows) {
    std::vector<double> vals;
    std::vector<double> node_y;
    for (std::size_t r : rows) {
        vals.push_back(x[r]);
        node_y.push_back(y[r]);
    }
    const double tie = 1e-10 * sse_of(node_y);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::optional<rfr::Split> best;
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const double t = 0.5 * (vals[i] + vals[i + 1]);
        std::vector<double> l;
        std::vector<double> r;
        for (std::size_t row : rows) (x[row] <= t ? l : r).push_back(y[row]);
        const double s = sse_of(l) + sse_of(r);
        if (!best || s < best->child_sse - tie) best = rfr::Split{t, s};
    }
    return best;
}

}  // namespace reflow::testing
