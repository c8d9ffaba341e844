#include "pqr/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pqr {

namespace {

// Scratch buffers reused across training iterations; hidden activations are
// the large allocations at these batch sizes.
struct Workspace {
    Matrix h;       // hidden activations, width x n
    Matrix d_out;   // output_dim x n
    Matrix dh;      // width x n
};

void hidden(const TwoLayerReluNet& net, const Matrix& x, Workspace& ws) {
    ws.h.resize(net.w1().rows(), x.cols());
    ws.h.noalias() = net.w1() * x;
    ws.h.colwise() += net.b1();
    ws.h = ws.h.cwiseMax(0.0);
}

// d_out must already hold dL/d(raw output).
void backprop(const TwoLayerReluNet& net, const Matrix& x, Workspace& ws, NetGradient& grad) {
    grad.w2.noalias() = ws.d_out * ws.h.transpose();
    grad.b2 = ws.d_out.rowwise().sum();
    ws.dh.resize(ws.h.rows(), ws.h.cols());
    ws.dh.noalias() = net.w2().transpose() * ws.d_out;
    ws.dh = (ws.h.array() > 0.0).select(ws.dh, 0.0);
    grad.w1.noalias() = ws.dh * x.transpose();
    grad.b1 = ws.dh.rowwise().sum();
}

double mse_step(const TwoLayerReluNet& net, const Matrix& x, const Vector& y, NetGradient* grad, Workspace& ws) {
    hidden(net, x, ws);
    ws.d_out.resize(1, x.cols());
    ws.d_out.noalias() = net.w2() * ws.h;
    ws.d_out.array() += net.b2()(0) - y.transpose().array();
    const double n = static_cast<double>(x.cols());
    const double loss = ws.d_out.squaredNorm() / n;
    if (grad) {
        ws.d_out *= 2.0 / n;
        backprop(net, x, ws, *grad);
    }
    return loss;
}

double softmax_step(const TwoLayerReluNet& net, const Matrix& x, std::span<const int> labels, NetGradient* grad,
                    Workspace& ws) {
    hidden(net, x, ws);
    ws.d_out.resize(net.w2().rows(), x.cols());
    ws.d_out.noalias() = net.w2() * ws.h;
    ws.d_out.colwise() += net.b2();
    const double n = static_cast<double>(x.cols());
    double loss = 0.0;
    for (Eigen::Index c = 0; c < ws.d_out.cols(); ++c) {
        auto col = ws.d_out.col(c);
        const double mx = col.maxCoeff();
        col.array() = (col.array() - mx).exp();
        const double z = col.sum();
        const int label = labels[static_cast<std::size_t>(c)];
        loss -= std::log(col(label) / z);
        col /= z;
        col(label) -= 1.0;
    }
    loss /= n;
    if (grad) {
        ws.d_out /= n;
        backprop(net, x, ws, *grad);
    }
    return loss;
}


std::string optimizer_name(Optimizer o) { return o == Optimizer::gd ? "gd" : "adam"; }

Optimizer optimizer_from(const std::string& name) {
    if (name == "gd") return Optimizer::gd;
    if (name == "adam") return Optimizer::adam;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected gd or adam)");
}

nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

Matrix matrix_from(const nlohmann::json& j, Eigen::Index cols_if_empty) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw std::invalid_argument("ragged weight matrix in net JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

Vector vector_from(const nlohmann::json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

// Adam / plain GD state over the four parameter blocks.
class Stepper {
public:
    Stepper(const TwoLayerReluNet& net, const TrainerConfig& cfg) : cfg_(cfg) {
        if (cfg.optimizer == Optimizer::adam) {
            m_ = {Matrix::Zero(net.w1().rows(), net.w1().cols()), Vector::Zero(net.b1().size()),
                  Matrix::Zero(net.w2().rows(), net.w2().cols()), Vector::Zero(net.b2().size())};
            v_ = m_;
        }
    }

    void step(TwoLayerReluNet& net, const NetGradient& g) {
        const double lr = cfg_.learning_rate;
        if (cfg_.optimizer == Optimizer::gd) {
            net.w1() -= lr * g.w1;
            net.b1() -= lr * g.b1;
            net.w2() -= lr * g.w2;
            net.b2() -= lr * g.b2;
            return;
        }
        ++t_;
        const double b1c = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double b2c = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        update(net.w1(), m_.w1, v_.w1, g.w1, lr, b1c, b2c);
        update(net.b1(), m_.b1, v_.b1, g.b1, lr, b1c, b2c);
        update(net.w2(), m_.w2, v_.w2, g.w2, lr, b1c, b2c);
        update(net.b2(), m_.b2, v_.b2, g.b2, lr, b1c, b2c);
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    template <typename P>
    static void update(P& param, P& m, P& v, const P& g, double lr, double b1c, double b2c) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / b1c) / ((v.array() / b2c).sqrt() + kEps);
    }

    TrainerConfig cfg_;
    NetGradient m_;
    NetGradient v_;
    long t_ = 0;
};

void check_batch(const Matrix& x, Eigen::Index n_targets) {
    if (x.cols() == 0) throw std::invalid_argument("training data is empty");
    if (x.cols() != n_targets)
        throw std::invalid_argument("feature count " + std::to_string(x.cols()) +
                                    " does not match target count " + std::to_string(n_targets));
    if (!x.allFinite()) throw std::invalid_argument("training features contain non-finite values");
}

Matrix pack_columns(const std::vector<std::vector<double>>& x) {
    if (x.empty()) return Matrix(0, 0);
    const auto dim = x.front().size();
    Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != dim)
            throw std::invalid_argument("feature vector " + std::to_string(i) + " has dimension " +
                                        std::to_string(x[i].size()) + ", expected " +
                                        std::to_string(dim));
        for (std::size_t d = 0; d < dim; ++d)
            m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = x[i][d];
    }
    return m;
}

TrainResult run_regression(TwoLayerReluNet net, const Matrix& x, const Vector& y,
                           const TrainerConfig& config) {
    check_batch(x, y.size());
    if (!y.allFinite()) throw std::invalid_argument("training targets contain non-finite values");
    if (x.rows() != net.input_dim())
        throw std::invalid_argument("feature dimension does not match the net input");

    const double old_scale = net.output_scale();
    const double old_shift = net.output_shift();
    double scale = 1.0;
    double shift = 0.0;
    if (config.standardize_targets) {
        shift = y.mean();
        const double sd = std::sqrt((y.array() - shift).square().mean());
        scale = sd > 1e-12 ? sd : 1.0;
    }
    // Re-express the current function under the new output affine.
    net.w2() *= old_scale / scale;
    net.b2() = (old_scale * net.b2().array() + old_shift - shift) / scale;
    net.set_output_affine(scale, shift);
    if (config.standardize_targets && scale == 1.0 && (y.array() == shift).all()) {
        // constant target
        net.w2().setZero();
        net.b2().setZero();
    }

    const Vector target = (y.array() - shift) / scale;
    TrainResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(config.iterations));
    Stepper stepper(net, config);
    NetGradient grad;
    Workspace ws;
    for (int it = 0; it < config.iterations; ++it) {
        const double loss = mse_step(net, x, target, &grad, ws);
        if (!std::isfinite(loss)) throw DivergenceError("regression loss is not finite", it);
        result.loss_curve.push_back(loss);
        stepper.step(net, grad);
    }
    const double final_std = mse_step(net, x, target, nullptr, ws);
    if (!std::isfinite(final_std)) throw DivergenceError("regression loss is not finite", config.iterations);
    result.final_loss = final_std * scale * scale;
    result.net = std::move(net);
    return result;
}

}  // namespace

nlohmann::json TrainerConfig::to_json() const {
    return {{"hidden_width", hidden_width}, {"learning_rate", learning_rate},
            {"iterations", iterations},     {"seed", seed},
            {"clip_floor", clip_floor},     {"optimizer", optimizer_name(optimizer)},
            {"standardize_targets", standardize_targets}};
}

TrainerConfig TrainerConfig::from_json(const nlohmann::json& j) {
    TrainerConfig c;
    c.hidden_width = j.value("hidden_width", c.hidden_width);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.iterations = j.value("iterations", c.iterations);
    c.seed = j.value("seed", c.seed);
    c.clip_floor = j.value("clip_floor", c.clip_floor);
    c.optimizer = optimizer_from(j.value("optimizer", optimizer_name(c.optimizer)));
    c.standardize_targets = j.value("standardize_targets", c.standardize_targets);
    if (c.hidden_width < 1) throw std::invalid_argument("hidden_width must be >= 1");
    if (c.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(c.clip_floor > 0.0 && c.clip_floor < 1.0))
        throw std::invalid_argument("clip_floor must lie in (0, 1)");
    return c;
}

TwoLayerReluNet::TwoLayerReluNet(int input_dim, int hidden_width, int output_dim, std::uint64_t seed)
    : w1_(hidden_width, input_dim),
      b1_(hidden_width),
      w2_(output_dim, hidden_width),
      b2_(Vector::Zero(output_dim)),
      seed_(seed) {
    if (input_dim < 1 || hidden_width < 1 || output_dim < 1)
        throw std::invalid_argument("net dimensions must be positive");
    Rng rng(seed);
    const double s1 = std::sqrt(2.0 / input_dim);
    for (Eigen::Index c = 0; c < w1_.cols(); ++c)
        for (Eigen::Index r = 0; r < w1_.rows(); ++r) w1_(r, c) = s1 * standard_normal(rng);
    for (Eigen::Index r = 0; r < b1_.size(); ++r) b1_(r) = 0.1 * standard_normal(rng);
    const double s2 = std::sqrt(1.0 / hidden_width);
    for (Eigen::Index c = 0; c < w2_.cols(); ++c)
        for (Eigen::Index r = 0; r < w2_.rows(); ++r) w2_(r, c) = s2 * standard_normal(rng);
}

Matrix TwoLayerReluNet::forward(const Matrix& x) const {
    Matrix h = ((w1_ * x).colwise() + b1_).cwiseMax(0.0);
    Matrix out = (w2_ * h).colwise() + b2_;
    if (scale_ != 1.0 || shift_ != 0.0) out = (scale_ * out.array() + shift_).matrix();
    return out;
}

std::vector<double> TwoLayerReluNet::predict_all(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                    " does not match net input " + std::to_string(input_dim()));
    Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Vector h = (w1_ * xv + b1_).cwiseMax(0.0);
    Vector out = w2_ * h + b2_;
    std::vector<double> res(static_cast<std::size_t>(out.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) res[static_cast<std::size_t>(i)] = scale_ * out(i) + shift_;
    return res;
}

double TwoLayerReluNet::predict(std::span<const double> x) const { return predict_all(x).front(); }

NetGradient TwoLayerReluNet::backward(const Matrix& x, const Matrix& d_out) const {
    const Matrix pre = (w1_ * x).colwise() + b1_;
    const Matrix h = pre.cwiseMax(0.0);
    NetGradient g;
    g.w2 = d_out * h.transpose();
    g.b2 = d_out.rowwise().sum();
    Matrix dh = (w2_.transpose() * d_out).array() * (pre.array() > 0.0).cast<double>();
    g.w1 = dh * x.transpose();
    g.b1 = dh.rowwise().sum();
    return g;
}

std::size_t TwoLayerReluNet::parameter_count() const {
    return static_cast<std::size_t>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
}

std::vector<double> TwoLayerReluNet::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    flat.insert(flat.end(), w1_.data(), w1_.data() + w1_.size());
    flat.insert(flat.end(), b1_.data(), b1_.data() + b1_.size());
    flat.insert(flat.end(), w2_.data(), w2_.data() + w2_.size());
    flat.insert(flat.end(), b2_.data(), b2_.data() + b2_.size());
    return flat;
}

void TwoLayerReluNet::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("parameter count mismatch");
    auto it = flat.begin();
    std::copy_n(it, w1_.size(), w1_.data());
    it += w1_.size();
    std::copy_n(it, b1_.size(), b1_.data());
    it += b1_.size();
    std::copy_n(it, w2_.size(), w2_.data());
    it += w2_.size();
    std::copy_n(it, b2_.size(), b2_.data());
}

bool operator==(const TwoLayerReluNet& a, const TwoLayerReluNet& b) {
    auto same = [](const auto& x, const auto& y) {
        return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    };
    return same(a.w1_, b.w1_) && same(a.b1_, b.b1_) && same(a.w2_, b.w2_) && same(a.b2_, b.b2_) &&
           a.scale_ == b.scale_ && a.shift_ == b.shift_;
}

nlohmann::json TwoLayerReluNet::to_json() const {
    nlohmann::json b1 = std::vector<double>(b1_.data(), b1_.data() + b1_.size());
    nlohmann::json b2 = std::vector<double>(b2_.data(), b2_.data() + b2_.size());
    return {{"input_dim", input_dim()}, {"hidden_width", hidden_width()},
            {"output_dim", output_dim()}, {"seed", seed_},
            {"w1", matrix_json(w1_)},     {"b1", b1},
            {"w2", matrix_json(w2_)},     {"b2", b2},
            {"output_scale", scale_},     {"output_shift", shift_}};
}

TwoLayerReluNet TwoLayerReluNet::from_json(const nlohmann::json& j) {
    TwoLayerReluNet net;
    const int in = j.at("input_dim").get<int>();
    const int width = j.at("hidden_width").get<int>();
    const int out = j.at("output_dim").get<int>();
    net.w1_ = matrix_from(j.at("w1"), in);
    net.b1_ = vector_from(j.at("b1"));
    net.w2_ = matrix_from(j.at("w2"), width);
    net.b2_ = vector_from(j.at("b2"));
    net.seed_ = j.value("seed", std::uint64_t{0});
    net.scale_ = j.value("output_scale", 1.0);
    net.shift_ = j.value("output_shift", 0.0);
    if (net.w1_.rows() != width || net.w1_.cols() != in || net.b1_.size() != width ||
        net.w2_.rows() != out || net.w2_.cols() != width || net.b2_.size() != out)
        throw std::invalid_argument("net JSON shapes are inconsistent");
    return net;
}

double mse_loss_and_gradient(const TwoLayerReluNet& net, const Matrix& x, const Vector& y,
                             NetGradient* grad) {
    Workspace ws;
    return mse_step(net, x, y, grad, ws);
}

double softmax_loss_and_gradient(const TwoLayerReluNet& net, const Matrix& x,
                                 std::span<const int> labels, NetGradient* grad) {
    Workspace ws;
    return softmax_step(net, x, labels, grad, ws);
}

TrainResult train_regressor(const Matrix& x, const Vector& y, const TrainerConfig& config) {
    check_batch(x, y.size());
    TwoLayerReluNet net(static_cast<int>(x.rows()), config.hidden_width, 1, config.seed);
    return run_regression(std::move(net), x, y, config);
}

TrainResult train_regressor(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                            const TrainerConfig& config) {
    if (x.empty()) throw std::invalid_argument("training data is empty");
    Eigen::Map<const Vector> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    return train_regressor(pack_columns(x), Vector(yv), config);
}

TrainResult continue_regressor(TwoLayerReluNet net, const Matrix& x, const Vector& y,
                               const TrainerConfig& config) {
    return run_regression(std::move(net), x, y, config);
}

TrainResult train_softmax(const Matrix& x, std::span<const int> labels, int n_classes,
                          const TrainerConfig& config) {
    check_batch(x, static_cast<Eigen::Index>(labels.size()));
    for (int l : labels)
        if (l < 0 || l >= n_classes)
            throw std::invalid_argument("class label " + std::to_string(l) + " out of range");
    TwoLayerReluNet net(static_cast<int>(x.rows()), config.hidden_width, n_classes, config.seed);
    TrainResult result;
    Stepper stepper(net, config);
    NetGradient grad;
    Workspace ws;
    for (int it = 0; it < config.iterations; ++it) {
        const double loss = softmax_step(net, x, labels, &grad, ws);
        if (!std::isfinite(loss)) throw DivergenceError("softmax likelihood is not finite", it);
        result.loss_curve.push_back(loss);
        stepper.step(net, grad);
    }
    result.final_loss = softmax_step(net, x, labels, nullptr, ws);
    result.net = std::move(net);
    return result;
}

}  // namespace pqr
