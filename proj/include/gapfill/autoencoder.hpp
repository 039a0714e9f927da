#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gapfill/schema.hpp"

namespace gapfill {

// 10-9-10 bottleneck, tanh hidden units, linear output.
struct NetworkConfig {
    int n_in = 10;
    int n_hidden = 9;
    int n_out = 10;
    int max_cycles = 1000;
    int early_stop_patience = 50;
    std::uint64_t seed = 0;
};

struct AutoencoderModel {
    NetworkConfig config;
    std::vector<double> w1;  // n_hidden x n_in, row-major
    std::vector<double> b1;  // n_hidden
    std::vector<double> w2;  // n_out x n_hidden, row-major
    std::vector<double> b2;  // n_out
    NormalizationParams norm;  // baked in so a saved model is self-contained

    std::size_t parameter_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }
};

struct TrainReport {
    int cycles_run = 0;
    std::vector<double> train_mse_history;
    std::vector<double> validation_mse_history;
    bool stopped_early = false;
    double final_train_mse = 0.0;
};

struct GradientBundle {
    std::vector<double> w1, b1, w2, b2;
};

// Weights uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero,
// deterministic per config.seed.
AutoencoderModel init_model(const NetworkConfig& config, const NormalizationParams& norm);

// y = W2 * tanh(W1 * x + b1) + b2
std::vector<double> forward(const AutoencoderModel& m, std::span<const double> x);

// Mean over all records and components of the squared reconstruction error.
// Dataset must be normalized and complete.
double loss_mse(const AutoencoderModel& m, const Dataset& data);

// Analytic partials of loss_mse w.r.t. every weight and bias.
GradientBundle gradient(const AutoencoderModel& m, const Dataset& data);

// Full-batch conjugate gradient (Polak-Ribiere, periodic restart, backtracking
// line search) with early stopping on validation MSE. Returns the weight
// snapshot with the lowest validation MSE seen.
std::pair<AutoencoderModel, TrainReport> train(const AutoencoderModel& m, const Dataset& train_set,
                                               const Dataset& validation_set);

// Versioned line-oriented text format; values round-trip bit-equal.
void save_model(const AutoencoderModel& m, const std::string& path);
AutoencoderModel load_model(const std::string& path);

// Rows of a complete dataset as a dense row-major matrix.
std::vector<double> dataset_matrix(const Dataset& d);

}  // namespace gapfill
