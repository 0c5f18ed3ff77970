#include "reflow/svr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace reflow::svr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_shapes(const Matrix& x, std::span<const double> y) {
    if (x.rows() != y.size()) {
        throw Error(ErrorKind::ShapeMismatch, "SVR: " + std::to_string(x.rows()) + " rows but " +
                                                  std::to_string(y.size()) + " targets");
    }
}

// Change of the dual objective when beta_a += t and beta_b -= t.
struct PairLine {
    double eta;    // |x_a - x_b|^2
    double slope;  // G_b - G_a
    double beta_a;
    double beta_b;
    double epsilon;

    double operator()(double t) const {
        return 0.5 * eta * t * t + slope * t +
               epsilon * (std::abs(beta_a + t) - std::abs(beta_a) + std::abs(beta_b - t) - std::abs(beta_b));
    }
};

// Exact minimiser of the convex piecewise quadratic on [0, hi].
double minimise_on_segment(const PairLine& f, double hi) {
    std::array<double, 4> cuts{};
    std::size_t n_cuts = 0;
    cuts[n_cuts++] = 0.0;
    if (-f.beta_a > 0.0 && -f.beta_a < hi) cuts[n_cuts++] = -f.beta_a;
    if (f.beta_b > 0.0 && f.beta_b < hi) cuts[n_cuts++] = f.beta_b;
    cuts[n_cuts++] = hi;
    std::sort(cuts.begin(), cuts.begin() + n_cuts);

    double best_t = 0.0;
    double best_v = 0.0;
    auto consider = [&](double t) {
        const double v = f(t);
        if (v < best_v) {
            best_v = v;
            best_t = t;
        }
    };
    for (std::size_t k = 0; k + 1 < n_cuts; ++k) {
        const double lo_t = cuts[k];
        const double hi_t = cuts[k + 1];
        consider(hi_t);
        if (f.eta > 0.0) {
            const double mid = 0.5 * (lo_t + hi_t);
            const double s_a = sign(f.beta_a + mid);
            const double s_b = sign(f.beta_b - mid);
            const double stationary = -(f.slope + f.epsilon * (s_a - s_b)) / f.eta;
            if (stationary > lo_t && stationary < hi_t) consider(stationary);
        }
    }
    return best_t;
}

// Minimiser over b of sum_i max(0, |r_i - b| - eps): any point between the
// n-th and (n+1)-th smallest of the 2n breakpoints r_i -+ eps.
double best_bias(std::span<const double> r, double eps, std::vector<double>& scratch) {
    const std::size_t n = r.size();
    scratch.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        scratch[2 * i] = r[i] - eps;
        scratch[2 * i + 1] = r[i] + eps;
    }
    std::nth_element(scratch.begin(), scratch.begin() + n, scratch.end());
    const double upper = scratch[n];
    const double lower = *std::max_element(scratch.begin(), scratch.begin() + n);
    return 0.5 * (lower + upper);
}

double slack_sum(std::span<const double> r, double b, double eps) {
    double s = 0.0;
    for (double v : r) s += std::max(0.0, std::abs(v - b) - eps);
    return s;
}

// Epsilon-insensitive loss with its kinks rounded over a width delta:
// quadratic for eps < |r| <= eps + delta, linear beyond.
struct SmoothLoss {
    double eps;
    double delta;

    double value(double r) const {
        const double a = std::abs(r) - eps;
        if (a <= 0.0) return 0.0;
        if (a <= delta) return 0.5 * a * a / delta;
        return a - 0.5 * delta;
    }
    double slope(double r) const {
        const double a = std::abs(r) - eps;
        if (a <= 0.0) return 0.0;
        return sign(r) * std::min(1.0, a / delta);
    }
    bool curved(double r) const {
        const double a = std::abs(r) - eps;
        return a > 0.0 && a <= delta;
    }
};

// Dual starting point from Newton's method on the smoothed primal, with delta
// shrinking stage by stage. At a smoothed optimum beta_i = C * slope(r_i)
// lies in the box and sums to zero; the remaining round-off in the sum is
// spread over the coordinates with room to move.
std::vector<double> smoothed_start(const Matrix& x, std::span<const double> y, double C, double eps) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const auto dim = static_cast<Eigen::Index>(p + 1);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);  // (w, b)
    std::vector<double> r(n);

    auto residuals = [&](const Eigen::VectorXd& t, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            auto row = x.row(i);
            double f = t[dim - 1];
            for (std::size_t j = 0; j < p; ++j) f += t[static_cast<Eigen::Index>(j)] * row[j];
            out[i] = y[i] - f;
        }
    };
    auto objective = [&](const Eigen::VectorXd& t, const std::vector<double>& res, const SmoothLoss& loss) {
        double v = 0.5 * t.head(dim - 1).squaredNorm();
        for (double ri : res) v += C * loss.value(ri);
        return v;
    };

    std::vector<double> trial(n);
    SmoothLoss loss{eps, 1.0};
    for (double delta = 1.0; delta >= 1e-7; delta *= 0.1) {
        loss.delta = delta;
        residuals(theta, r);
        double f = objective(theta, r, loss);
        for (int iter = 0; iter < 100; ++iter) {
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
            grad.head(dim - 1) = theta.head(dim - 1);
            Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(dim, dim);
            hess(dim - 1, dim - 1) = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = C * loss.slope(r[i]);
                auto row = x.row(i);
                if (g != 0.0) {
                    for (std::size_t j = 0; j < p; ++j) grad[static_cast<Eigen::Index>(j)] -= g * row[j];
                    grad[dim - 1] -= g;
                }
                if (loss.curved(r[i])) {
                    const double h = C / delta;
                    for (std::size_t j = 0; j < p; ++j) {
                        const auto jj = static_cast<Eigen::Index>(j);
                        for (std::size_t k = 0; k <= j; ++k) hess(jj, static_cast<Eigen::Index>(k)) += h * row[j] * row[k];
                        hess(dim - 1, jj) += h * row[j];
                    }
                    hess(dim - 1, dim - 1) += h;
                }
            }
            hess.diagonal().array() += 1e-10;
            const Eigen::VectorXd step = -hess.selfadjointView<Eigen::Lower>().ldlt().solve(grad);
            const double decrease = -grad.dot(step);
            if (!(decrease > 1e-14 * std::max(1.0, f))) break;
            double t = 1.0;
            bool accepted = false;
            for (int k = 0; k < 60; ++k, t *= 0.5) {
                const Eigen::VectorXd cand = theta + t * step;
                residuals(cand, trial);
                const double fc = objective(cand, trial, loss);
                if (fc <= f - 1e-4 * t * decrease) {
                    theta = cand;
                    f = fc;
                    r.swap(trial);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }
    }

    std::vector<double> beta(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        beta[i] = std::clamp(C * loss.slope(r[i]), -C, C);
        total += beta[i];
    }
    double room = 0.0;
    for (double b : beta) room += total > 0.0 ? b + C : C - b;
    if (room > 0.0 && total != 0.0) {
        const double scale = total / room;
        for (double& b : beta) b = std::clamp(b - scale * (total > 0.0 ? b + C : C - b), -C, C);
    }
    return beta;
}

}  // namespace

double LinearSvr::predict(std::span<const double> x) const {
    if (x.size() != w.size()) {
        throw Error(ErrorKind::ShapeMismatch, "SVR expects " + std::to_string(w.size()) + " features, got " +
                                                  std::to_string(x.size()));
    }
    return dot(w, x) + b;
}

double svr_objective(const LinearSvr& model, const Matrix& x, std::span<const double> y, double C,
                     double epsilon) {
    check_shapes(x, y);
    if (x.cols() != model.w.size()) throw Error(ErrorKind::ShapeMismatch, "SVR weight length mismatch");
    double slack = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        slack += std::max(0.0, std::abs(y[i] - model.predict(x.row(i))) - epsilon);
    }
    return 0.5 * dot(model.w, model.w) + C * slack;
}

double svr_dual_objective(const Matrix& x, std::span<const double> y, std::span<const double> beta,
                          double epsilon) {
    check_shapes(x, y);
    std::vector<double> w(x.cols(), 0.0);
    double linear = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += beta[i] * row[j];
        linear += -y[i] * beta[i] + epsilon * std::abs(beta[i]);
    }
    return 0.5 * dot(w, w) + linear;
}

SvrSolution train_linear_svr(const Matrix& x, std::span<const double> y, const SvrParams& params,
                             bool record_trace) {
    check_shapes(x, y);
    if (!(params.C > 0.0) || !(params.epsilon > 0.0) || !(params.tol > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "SVR requires C > 0, epsilon > 0 and tol > 0");
    }
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (n < 2) throw Error(ErrorKind::TooFewRows, "SVR needs at least 2 rows");
    const double C = params.C;
    const double eps = params.epsilon;

    SvrSolution sol;
    sol.model.w.assign(p, 0.0);
    sol.beta.assign(n, 0.0);
    auto& w = sol.model.w;
    auto& beta = sol.beta;
    if (params.warm_start) {
        beta = smoothed_start(x, y, C, eps);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) w[j] += beta[i] * row[j];
        }
    }

    // resid[i] = y_i - <w, x_i>, the residual without bias. Refreshed once
    // per pass; within a pass the two rows of each pair are recomputed.
    std::vector<double> resid(n);
    std::vector<double> direction(p);
    std::vector<std::pair<double, std::size_t>> ups;
    std::vector<std::pair<double, std::size_t>> downs;
    std::vector<double> scratch;
    double dual = svr_dual_objective(x, y, beta, eps);

    auto up_value = [&](std::size_t i, double r) { return r - eps * (beta[i] >= 0.0 ? 1.0 : -1.0); };
    auto down_value = [&](std::size_t i, double r) { return r + eps * (beta[i] > 0.0 ? -1.0 : 1.0); };

    const std::size_t budget = params.max_passes * n;
    bool converged = false;
    while (!converged && sol.iterations < budget) {
        ups.clear();
        downs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            resid[i] = y[i] - dot(w, x.row(i));
            if (beta[i] < C) ups.emplace_back(up_value(i, resid[i]), i);
            if (beta[i] > -C) downs.emplace_back(down_value(i, resid[i]), i);
        }
        // Certificate: primal at the best bias against the current dual.
        const double bias = best_bias(resid, eps, scratch);
        const double primal = 0.5 * dot(w, w) + C * slack_sum(resid, bias, eps);
        double dual_value = 0.5 * dot(w, w);
        for (std::size_t i = 0; i < n; ++i) dual_value += -y[i] * beta[i] + eps * std::abs(beta[i]);
        sol.gap = primal + dual_value;
        if (ups.empty() || downs.empty()) {
            sol.violation = 0.0;
            converged = true;
            break;
        }
        std::sort(ups.begin(), ups.end(), [](const auto& l, const auto& r) {
            return l.first > r.first || (l.first == r.first && l.second < r.second);
        });
        std::sort(downs.begin(), downs.end());
        sol.violation = ups.front().first - downs.front().first;
        if (sol.violation <= params.tol || sol.gap <= params.tol * std::max(1.0, primal)) {
            converged = true;
            break;
        }

        // Pair the k-th most violating "up" index with the k-th most
        // violating "down" index, each update using current gradients.
        bool progressed = false;
        const std::size_t pairs = std::min(ups.size(), downs.size());
        for (std::size_t k = 0; k < pairs && sol.iterations < budget; ++k) {
            if (ups[k].first - downs[k].first <= params.tol) break;
            const std::size_t a = ups[k].second;
            const std::size_t b = downs[k].second;
            if (a == b || !(beta[a] < C) || !(beta[b] > -C)) continue;
            auto xa = x.row(a);
            auto xb = x.row(b);
            const double ra = y[a] - dot(w, xa);
            const double rb = y[b] - dot(w, xb);
            if (up_value(a, ra) - down_value(b, rb) <= params.tol) continue;
            for (std::size_t j = 0; j < p; ++j) direction[j] = xa[j] - xb[j];
            const PairLine line{dot(direction, direction), rb - ra, beta[a], beta[b], eps};
            const double hi = std::min(C - beta[a], beta[b] + C);
            const double t = minimise_on_segment(line, hi);
            if (t <= 0.0) continue;
            dual += line(t);
            beta[a] = std::min(C, beta[a] + t);
            beta[b] = std::max(-C, beta[b] - t);
            for (std::size_t j = 0; j < p; ++j) w[j] += t * direction[j];
            ++sol.iterations;
            progressed = true;
            if (record_trace) sol.dual_trace.push_back(dual);
        }
        // Violating pairs exist but none can move: numerically stalled.
        if (!progressed) converged = true;
    }

    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - dot(w, x.row(i));
    sol.model.b = best_bias(resid, eps, scratch);

    if (!converged) {
        const std::string message = "SVR did not converge after " + std::to_string(sol.iterations) +
                                    " updates; KKT violation " + std::to_string(sol.violation);
        throw NotConverged(std::move(sol), message);
    }
    return sol;
}

SvrModel fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params) {
    check_shapes(x, y);
    SvrModel model;
    model.epsilon = params.epsilon;
    model.C = params.C;
    model.scaler = preprocess::fit_scaler(x);
    model.target_scale = preprocess::fit_series(y);
    const Matrix z = model.scaler.transform(x);
    std::vector<double> yz(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yz[i] = model.target_scale.transform(y[i]);
    model.hyperplane = train_linear_svr(z, yz, params).model;
    return model;
}

double predict_svr(const SvrModel& model, std::span<const double> x) {
    if (x.size() != model.scaler.size()) {
        throw Error(ErrorKind::ShapeMismatch, "SVR expects " + std::to_string(model.scaler.size()) +
                                                  " features, got " + std::to_string(x.size()));
    }
    std::vector<double> z(x.size());
    model.scaler.transform_row(x, z);
    return model.target_scale.inverse(model.hyperplane.predict(z));
}

}  // namespace reflow::svr
