#include "reflow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "reflow/error.hpp"

namespace reflow::nn {

std::size_t Network::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return off;
}

std::size_t parameter_count(std::span<const std::size_t> sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
}

std::vector<std::size_t> default_architecture(std::size_t p, std::size_t second_hidden) {
    return {p, p, second_hidden, 1};
}

Network init_network(std::span<const std::size_t> sizes, std::uint64_t seed) {
    if (sizes.size() < 2 || sizes.back() != 1) {
        throw Error(ErrorKind::InvalidArgument, "network needs at least one layer and a scalar output");
    }
    for (std::size_t s : sizes) {
        if (s == 0) throw Error(ErrorKind::InvalidArgument, "layer sizes must be positive");
    }
    Network net;
    net.sizes.assign(sizes.begin(), sizes.end());
    net.params.assign(parameter_count(sizes), 0.0);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(sizes[l])));
        const std::size_t off = net.weight_offset(l);
        for (std::size_t k = 0; k < sizes[l] * sizes[l + 1]; ++k) net.params[off + k] = dist(rng);
    }
    return net;
}

Network init_nn(std::size_t p, std::uint64_t seed) {
    if (p == 0) throw Error(ErrorKind::InvalidArgument, "network needs at least one input");
    const auto sizes = default_architecture(p);
    return init_network(sizes, seed);
}

namespace {

void check_input(const Network& net, std::size_t n) {
    if (n != net.input_size()) {
        throw Error(ErrorKind::ShapeMismatch, "network expects " + std::to_string(net.input_size()) +
                                                  " inputs, got " + std::to_string(n));
    }
}

// Forward pass keeping every layer's pre-activation; returns the output.
double forward_trace(const Network& net, std::span<const double> x, std::vector<std::vector<double>>& pre) {
    pre.resize(net.layer_count());
    std::vector<double> h(x.begin(), x.end());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const std::size_t in = net.sizes[l];
        const std::size_t out = net.sizes[l + 1];
        const double* w = net.params.data() + net.weight_offset(l);
        const double* b = net.params.data() + net.bias_offset(l);
        auto& z = pre[l];
        z.assign(b, b + out);
        for (std::size_t i = 0; i < in; ++i) {
            const double hi = h[i];
            if (hi == 0.0) continue;
            const double* wi = w + i * out;
            for (std::size_t o = 0; o < out; ++o) z[o] += hi * wi[o];
        }
        if (l + 1 < net.layer_count()) {
            h.resize(out);
            for (std::size_t o = 0; o < out; ++o) h[o] = std::max(0.0, z[o]);
        }
    }
    return pre.back()[0];
}

// Adds grad_out * df/dparams into grad.
void backward(const Network& net, std::span<const double> x, const std::vector<std::vector<double>>& pre,
              double grad_out, std::vector<double>& grad, std::vector<double>& delta, std::vector<double>& next) {
    const std::size_t layers = net.layer_count();
    delta.assign(1, grad_out);
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = net.sizes[l];
        const std::size_t out = net.sizes[l + 1];
        const double* w = net.params.data() + net.weight_offset(l);
        double* gw = grad.data() + net.weight_offset(l);
        double* gb = grad.data() + net.bias_offset(l);
        for (std::size_t o = 0; o < out; ++o) gb[o] += delta[o];
        next.assign(in, 0.0);
        for (std::size_t i = 0; i < in; ++i) {
            const double hi = l == 0 ? x[i] : std::max(0.0, pre[l - 1][i]);
            const double* wi = w + i * out;
            double* gwi = gw + i * out;
            double back = 0.0;
            for (std::size_t o = 0; o < out; ++o) {
                gwi[o] += hi * delta[o];
                back += wi[o] * delta[o];
            }
            next[i] = back;
        }
        if (l > 0) {
            for (std::size_t i = 0; i < in; ++i) {
                if (!(pre[l - 1][i] > 0.0)) next[i] = 0.0;
            }
        }
        delta.swap(next);
    }
}

struct Workspace {
    std::vector<std::vector<double>> pre;
    std::vector<double> delta;
    std::vector<double> next;
};

// Adds the batch-mean MSE gradient over `rows` into grad; returns the loss.
double accumulate_batch(const Network& net, const Matrix& x, std::span<const double> y,
                        std::span<const std::size_t> rows, std::vector<double>& grad, Workspace& ws) {
    const double scale = 2.0 / static_cast<double>(rows.size());
    double loss = 0.0;
    for (std::size_t r : rows) {
        const double f = forward_trace(net, x.row(r), ws.pre);
        const double resid = f - y[r];
        loss += resid * resid;
        backward(net, x.row(r), ws.pre, scale * resid, grad, ws.delta, ws.next);
    }
    return loss / static_cast<double>(rows.size());
}

}  // namespace

double forward(const Network& net, std::span<const double> x) {
    check_input(net, x.size());
    std::vector<std::vector<double>> pre;
    return forward_trace(net, x, pre);
}

std::vector<double> first_layer_preactivation(const Network& net, std::span<const double> x) {
    check_input(net, x.size());
    std::vector<std::vector<double>> pre;
    forward_trace(net, x, pre);
    return pre.front();
}

double mse_loss(const Network& net, const Matrix& x, std::span<const double> y) {
    if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::ShapeMismatch, "batch shape mismatch");
    check_input(net, x.cols());
    std::vector<std::vector<double>> pre;
    double loss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double d = forward_trace(net, x.row(r), pre) - y[r];
        loss += d * d;
    }
    return loss / static_cast<double>(x.rows());
}

std::vector<double> gradients(const Network& net, const Matrix& x, std::span<const double> y) {
    if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::ShapeMismatch, "batch shape mismatch");
    check_input(net, x.cols());
    std::vector<double> grad(net.params.size(), 0.0);
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Workspace ws;
    accumulate_batch(net, x, y, rows, grad, ws);
    return grad;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error(ErrorKind::ShapeMismatch, "Adam state does not match parameter count");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correct1 = 1.0 - std::pow(config.beta1, t);
    const double correct2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / correct1;
        const double v_hat = state.v[i] / correct2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

TrainedNetwork train_nn(const Matrix& x, std::span<const double> y, const NnConfig& config) {
    if (x.rows() != y.size()) throw Error(ErrorKind::ShapeMismatch, "training rows and targets differ");
    if (config.batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch size must be positive");
    if (x.rows() < config.batch_size) {
        throw Error(ErrorKind::TooFewRows, "fewer training rows than the batch size");
    }
    const auto sizes = default_architecture(x.cols(), config.second_hidden);
    TrainedNetwork result{init_network(sizes, config.seed), {}};
    Network& net = result.net;

    // Separate stream from initialisation so changing epochs never alters init.
    std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(net.params.size());
    AdamState adam(net.params.size());
    Workspace ws;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            std::span<const std::size_t> rows(order.data() + start, len);
            std::fill(grad.begin(), grad.end(), 0.0);
            epoch_loss += accumulate_batch(net, x, y, rows, grad, ws);
            ++batches;
            adam_step(net.params, grad, adam, config.adam);
        }
        epoch_loss /= static_cast<double>(batches);
        if (!std::isfinite(epoch_loss)) {
            throw Error(ErrorKind::Diverged, "training loss became non-finite at epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(epoch_loss);
    }
    return result;
}

NnModel fit_nn(const Matrix& x, std::span<const double> y, const NnConfig& config) {
    NnModel model;
    model.config = config;
    model.scaler = preprocess::fit_scaler(x);
    model.target_scale = preprocess::fit_series(y);
    const Matrix z = model.scaler.transform(x);
    std::vector<double> yz(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yz[i] = model.target_scale.transform(y[i]);
    TrainedNetwork trained = train_nn(z, yz, config);
    model.net = std::move(trained.net);
    model.loss_history = std::move(trained.loss_history);
    return model;
}

double predict_nn(const NnModel& model, std::span<const double> x) {
    check_input(model.net, x.size());
    std::vector<double> z(x.size());
    model.scaler.transform_row(x, z);
    return model.target_scale.inverse(forward(model.net, z));
}

}  // namespace reflow::nn
