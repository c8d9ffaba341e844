#pragma once

#include "pqr/common.hpp"

#include <nlohmann/json.hpp>

namespace pqr {

enum class Optimizer { gd, adam };

/// Full-batch trainer settings shared by every regressor in the pipeline.
struct TrainerConfig {
    int hidden_width = 32;
    double learning_rate = 1e-2;
    int iterations = 500;
    std::uint64_t seed = 0;
    double clip_floor = 1e-6;
    Optimizer optimizer = Optimizer::adam;
    // Regression targets are centred and scaled before training; the net's
    // output affine undoes it.
    bool standardize_targets = true;

    nlohmann::json to_json() const;
    static TrainerConfig from_json(const nlohmann::json& j);
};

/// Parameter gradient in the same layout as the net.
struct NetGradient {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
};

/**
 * y = scale * (W2 relu(W1 x + b1) + b2) + shift
 *
 * Samples are columns: a batch is an input_dim x n matrix and the output is
 * output_dim x n. `scale` and `shift` are fixed at training time and are not
 * trained.
 */
class TwoLayerReluNet {
public:
    TwoLayerReluNet() = default;
    TwoLayerReluNet(int input_dim, int hidden_width, int output_dim, std::uint64_t seed);

    int input_dim() const { return static_cast<int>(w1_.cols()); }
    int hidden_width() const { return static_cast<int>(w1_.rows()); }
    int output_dim() const { return static_cast<int>(w2_.rows()); }
    std::uint64_t seed() const { return seed_; }

    Matrix forward(const Matrix& x) const;
    double predict(std::span<const double> x) const;
    std::vector<double> predict_all(std::span<const double> x) const;

    /// Gradient of the raw network output (before scale/shift) given
    /// dL/d(raw output).
    NetGradient backward(const Matrix& x, const Matrix& d_out) const;

    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    std::size_t parameter_count() const;

    void set_output_affine(double scale, double shift) { scale_ = scale; shift_ = shift; }
    double output_scale() const { return scale_; }
    double output_shift() const { return shift_; }

    Matrix& w1() { return w1_; }
    Vector& b1() { return b1_; }
    Matrix& w2() { return w2_; }
    Vector& b2() { return b2_; }
    const Matrix& w1() const { return w1_; }
    const Vector& b1() const { return b1_; }
    const Matrix& w2() const { return w2_; }
    const Vector& b2() const { return b2_; }

    nlohmann::json to_json() const;
    static TwoLayerReluNet from_json(const nlohmann::json& j);

    /// Bitwise equality of every weight and the output affine.
    friend bool operator==(const TwoLayerReluNet& a, const TwoLayerReluNet& b);

private:
    Matrix w1_;
    Vector b1_;
    Matrix w2_;
    Vector b2_;
    double scale_ = 1.0;
    double shift_ = 0.0;
    std::uint64_t seed_ = 0;
};

struct TrainResult {
    TwoLayerReluNet net;
    std::vector<double> loss_curve;  // one entry per iteration, in standardized units
    double final_loss = 0.0;         // mean squared error in target units
};

/// Mean squared error and its gradient for a single-output net, raw outputs
/// (no scale/shift). Exposed for gradient checks.
double mse_loss_and_gradient(const TwoLayerReluNet& net, const Matrix& x, const Vector& y,
                             NetGradient* grad);

/// Mean softmax cross-entropy over integer labels and its gradient.
double softmax_loss_and_gradient(const TwoLayerReluNet& net, const Matrix& x,
                                 std::span<const int> labels, NetGradient* grad);

/// Least-squares fit of a single-output net by full-batch gradient descent.
/// Throws std::invalid_argument on empty or ragged data and DivergenceError
/// on a non-finite loss.
TrainResult train_regressor(const Matrix& x, const Vector& y, const TrainerConfig& config);
TrainResult train_regressor(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                            const TrainerConfig& config);

/// Continue training an existing net (used by the warm-started soft-Q expert).
TrainResult continue_regressor(TwoLayerReluNet net, const Matrix& x, const Vector& y,
                               const TrainerConfig& config);

/// Maximum-likelihood multinomial logit net: output_dim = n_classes.
TrainResult train_softmax(const Matrix& x, std::span<const int> labels, int n_classes,
                          const TrainerConfig& config);

}  // namespace pqr
