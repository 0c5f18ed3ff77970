#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reflow/matrix.hpp"
#include "reflow/preprocess.hpp"

namespace reflow::nn {

/// Fully connected ReLU network with an identity output unit. Parameters are
/// stored flat: for each layer, an (in x out) row-major weight block followed
/// by `out` biases. Pre-activation of layer l is W_l^T h + b_l.
struct Network {
    std::vector<std::size_t> sizes;  // e.g. {p, p, 100, 1}
    std::vector<double> params;

    std::size_t layer_count() const { return sizes.size() - 1; }
    std::size_t input_size() const { return sizes.front(); }
    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const { return weight_offset(layer) + sizes[layer] * sizes[layer + 1]; }
    double& weight(std::size_t layer, std::size_t in, std::size_t out) {
        return params[weight_offset(layer) + in * sizes[layer + 1] + out];
    }
    double weight(std::size_t layer, std::size_t in, std::size_t out) const {
        return params[weight_offset(layer) + in * sizes[layer + 1] + out];
    }
    double& bias(std::size_t layer, std::size_t out) { return params[bias_offset(layer) + out]; }
    double bias(std::size_t layer, std::size_t out) const { return params[bias_offset(layer) + out]; }

    friend bool operator==(const Network&, const Network&) = default;
};

std::size_t parameter_count(std::span<const std::size_t> sizes);

/// Architecture {p, p, hidden, 1}.
std::vector<std::size_t> default_architecture(std::size_t p, std::size_t second_hidden = 100);

/// Weights ~ N(0, 2 / fan_in), biases zero. Deterministic in seed.
Network init_network(std::span<const std::size_t> sizes, std::uint64_t seed);
Network init_nn(std::size_t p, std::uint64_t seed);

double forward(const Network& net, std::span<const double> x);

/// Pre-activations of the first hidden layer.
std::vector<double> first_layer_preactivation(const Network& net, std::span<const double> x);

/// Mean squared error over the batch.
double mse_loss(const Network& net, const Matrix& x, std::span<const double> y);

/// Exact gradient of the batch MSE with respect to every parameter, laid out
/// like Network::params.
std::vector<double> gradients(const Network& net, const Matrix& x, std::span<const double> y);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config = {});

struct NnConfig {
    AdamConfig adam;
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    std::size_t second_hidden = 100;
    std::uint64_t seed = 0;
};

struct TrainedNetwork {
    Network net;
    /// Mean mini-batch loss of every epoch.
    std::vector<double> loss_history;
};

/// Adam on MSE over shuffled mini-batches. Throws Diverged on a non-finite
/// loss.
TrainedNetwork train_nn(const Matrix& x, std::span<const double> y, const NnConfig& config);

/// Network plus the feature and target scaling it was trained under.
struct NnModel {
    Network net;
    preprocess::Scaler scaler;
    preprocess::SeriesScale target_scale;
    NnConfig config;
    std::vector<double> loss_history;
};

NnModel fit_nn(const Matrix& x, std::span<const double> y, const NnConfig& config = {});
double predict_nn(const NnModel& model, std::span<const double> x);

}  // namespace reflow::nn
