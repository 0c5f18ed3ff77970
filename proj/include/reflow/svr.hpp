#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reflow/error.hpp"
#include "reflow/matrix.hpp"
#include "reflow/preprocess.hpp"

namespace reflow::svr {

struct SvrParams {
    double C = 1.0;
    double epsilon = 0.1;
    /// Training stops once the duality gap is at most tol * max(1, primal)
    /// or the maximal KKT violation of the dual is at most tol.
    double tol = 1e-4;
    /// Pair-update budget is max_passes * n.
    std::size_t max_passes = 100000;
    /// Start the pairwise solver from the optimum of a smoothed primal
    /// instead of beta = 0.
    bool warm_start = true;
};

/// f(x) = <w, x> + b.
struct LinearSvr {
    std::vector<double> w;
    double b = 0.0;

    double predict(std::span<const double> x) const;

    friend bool operator==(const LinearSvr&, const LinearSvr&) = default;
};

struct SvrSolution {
    LinearSvr model;
    /// Dual coefficients alpha_i - alpha_i*, each in [-C, C], summing to zero.
    std::vector<double> beta;
    std::size_t iterations = 0;
    double violation = 0.0;
    /// Primal minus (maximisation-form) dual objective at the returned point.
    double gap = 0.0;
    /// Dual objective 0.5 |w|^2 - y.beta + eps sum |beta| after every update,
    /// when requested. Non-increasing by construction.
    std::vector<double> dual_trace;
};

class NotConverged : public Error {
public:
    NotConverged(SvrSolution best, const std::string& message)
        : Error(ErrorKind::NotConverged, message), best_(std::move(best)) {}

    const SvrSolution& best() const { return best_; }

private:
    SvrSolution best_;
};

/// 0.5 |w|^2 + C sum_i max(0, |y_i - f(x_i)| - epsilon).
double svr_objective(const LinearSvr& model, const Matrix& x, std::span<const double> y, double C,
                     double epsilon);

/// Dual objective in minimisation form for given coefficients.
double svr_dual_objective(const Matrix& x, std::span<const double> y, std::span<const double> beta,
                          double epsilon);

/// Solves the linear epsilon-insensitive SVR with an unregularised bias by
/// SMO-style pairwise updates on the dual, each update an exact line search.
/// The bias is the minimiser of the primal for the final w.
/// Throws NotConverged (carrying the last iterate) when the budget runs out.
SvrSolution train_linear_svr(const Matrix& x, std::span<const double> y, const SvrParams& params,
                             bool record_trace = false);

/// Linear SVR on z-scored features and targets. Predictions are reported in
/// the original target units.
struct SvrModel {
    LinearSvr hyperplane;
    double epsilon = 0.1;
    double C = 1.0;
    preprocess::Scaler scaler;
    preprocess::SeriesScale target_scale;
};

SvrModel fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params = {});

double predict_svr(const SvrModel& model, std::span<const double> x);

}  // namespace reflow::svr
