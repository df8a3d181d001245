#pragma once

// Fully connected network with ReLU hidden layers and one linear output unit.
// Regression fits standardized targets with half squared error; classification
// uses binary cross-entropy on the output logit. Minibatch training with Adam
// at a fixed learning rate and early stopping on validation loss.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "discover/error.hpp"
#include "discover/models/dataset.hpp"
#include "discover/models/gbdt.hpp"
#include "discover/rng.hpp"

namespace discover {

struct MlpParams {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  std::size_t patience = 20;
};

// Parameters are stored flat, layer by layer: weights (out x in, row-major)
// followed by biases (out).
inline std::size_t mlp_param_count(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
  return n;
}

namespace detail {

// Forward pass; acts[0] is the input, acts[l] the post-ReLU activations of
// hidden layer l, and acts.back() holds the single output logit.
inline void mlp_forward(std::span<const std::size_t> sizes, std::span<const double> params,
                        std::span<const double> input, std::vector<std::vector<double>>& acts) {
  const std::size_t layers = sizes.size() - 1;
  acts.resize(sizes.size());
  acts[0].assign(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const double* w = params.data() + offset;
    const double* b = w + out * in;
    auto& a = acts[l + 1];
    a.resize(out);
    const auto& prev = acts[l];
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* wr = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += wr[i] * prev[i];
      a[o] = (l + 1 < layers) ? std::max(z, 0.0) : z;
    }
    offset += out * (in + 1);
  }
}

inline double output_loss(double out, double target, bool classification) {
  if (classification)
    return std::max(out, 0.0) + std::log1p(std::exp(-std::abs(out))) - target * out;
  const double e = out - target;
  return 0.5 * e * e;
}

}  // namespace detail

// Mean loss over `rows` and its gradient with respect to every parameter,
// written into `grad` (overwritten).
inline double mlp_loss_and_gradient(std::span<const std::size_t> sizes, std::span<const double> params,
                                    const Dataset& data, std::span<const std::size_t> rows,
                                    std::span<const double> targets, bool classification,
                                    std::span<double> grad) {
  require(sizes.size() >= 2 && sizes.back() == 1, ErrorKind::invalid_argument,
          "network must end in one output unit");
  require(params.size() == mlp_param_count(sizes) && grad.size() == params.size(),
          ErrorKind::invalid_argument, "parameter vector has the wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  if (rows.empty()) return 0.0;
  const std::size_t layers = sizes.size() - 1;
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += sizes[l + 1] * (sizes[l] + 1);
  }
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, prev_delta;
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    detail::mlp_forward(sizes, params, data.row(r), acts);
    const double out = acts.back()[0];
    const double t = targets[r];
    loss += detail::output_loss(out, t, classification);
    delta.assign(1, (classification ? sigmoid(out) - t : out - t) * scale);
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = sizes[l], outs = sizes[l + 1];
      const double* w = params.data() + offsets[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + outs * in;
      const auto& a = acts[l];
      for (std::size_t o = 0; o < outs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* gwr = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += d * a[i];
        gb[o] += d;
      }
      if (l == 0) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < outs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += wr[i] * d;
      }
      for (std::size_t i = 0; i < in; ++i)
        if (!(a[i] > 0.0)) prev_delta[i] = 0.0;
      delta.swap(prev_delta);
    }
  }
  return loss * scale;
}

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> sizes, std::vector<double> params, bool classification,
      double target_mean, double target_scale)
      : sizes_(std::move(sizes)), params_(std::move(params)), classification_(classification),
        target_mean_(target_mean), target_scale_(target_scale) {
    require(sizes_.size() >= 2 && sizes_.back() == 1 && params_.size() == mlp_param_count(sizes_),
            ErrorKind::invalid_argument, "inconsistent network shape");
  }

  double output(std::span<const double> row) const {
    std::vector<std::vector<double>> acts;
    detail::mlp_forward(sizes_, params_, row, acts);
    return acts.back()[0];
  }

  double predict(std::span<const double> row) const {
    const double o = output(row);
    return classification_ ? sigmoid(o) : target_mean_ + target_scale_ * o;
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<double>& params() const { return params_; }
  bool classification() const { return classification_; }
  double target_mean() const { return target_mean_; }
  double target_scale() const { return target_scale_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> params_;
  bool classification_ = false;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
};

struct MlpFit {
  Mlp model;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 0 = the initial weights
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
};

// He-normal weights for hidden layers, variance 1/fan_in for the output layer,
// zero biases.
inline std::vector<double> mlp_initial_params(std::span<const std::size_t> sizes, Rng& rng) {
  std::vector<double> p(mlp_param_count(sizes), 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    const double sd = std::sqrt((last ? 1.0 : 2.0) / static_cast<double>(std::max<std::size_t>(in, 1)));
    for (std::size_t k = 0; k < out * in; ++k) p[offset + k] = sd * rng.normal();
    offset += out * (in + 1);
  }
  return p;
}

inline MlpFit fit_mlp(const Dataset& train, const Dataset& validation, const MlpParams& params,
                      bool classification, std::uint64_t seed) {
  require(train.rows >= 1, ErrorKind::invalid_argument, "network needs training rows");
  require(params.batch >= 1 && params.learning_rate > 0.0, ErrorKind::invalid_argument,
          "batch and learning_rate must be positive");
  std::vector<std::size_t> sizes{train.cols};
  for (auto u : params.hidden) {
    require(u >= 1, ErrorKind::invalid_argument, "hidden layers need at least one unit");
    sizes.push_back(u);
  }
  sizes.push_back(1);

  double mean = 0.0, scale = 1.0;
  if (!classification) {
    const double n = static_cast<double>(train.rows);
    mean = std::accumulate(train.y.begin(), train.y.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : train.y) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (sd > 0.0) scale = sd;
  }
  auto standardize = [&](const std::vector<double>& y) {
    std::vector<double> t(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) t[i] = classification ? y[i] : (y[i] - mean) / scale;
    return t;
  };
  const auto t_train = standardize(train.y);
  const auto t_valid = standardize(validation.y);

  Rng rng(seed);
  auto theta = mlp_initial_params(sizes, rng);
  const std::size_t np = theta.size();
  std::vector<double> grad(np), m(np, 0.0), v(np, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::vector<std::size_t> all_train(train.rows), all_valid(validation.rows);
  std::iota(all_train.begin(), all_train.end(), std::size_t{0});
  std::iota(all_valid.begin(), all_valid.end(), std::size_t{0});
  std::vector<double> scratch(np);
  auto loss_on = [&](const Dataset& d, std::span<const std::size_t> rows, std::span<const double> t) {
    return mlp_loss_and_gradient(sizes, theta, d, rows, t, classification, scratch);
  };

  MlpFit fit;
  const bool validate = validation.rows > 0;
  fit.train_loss.push_back(loss_on(train, all_train, t_train));
  double best = validate ? loss_on(validation, all_valid, t_valid) : 0.0;
  if (validate) fit.validation_loss.push_back(best);
  auto best_theta = theta;
  std::vector<std::size_t> order = all_train;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch) {
      const std::size_t end = std::min(order.size(), start + params.batch);
      mlp_loss_and_gradient(sizes, theta, train,
                            std::span<const std::size_t>(order.data() + start, end - start), t_train,
                            classification, grad);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < np; ++k) {
        m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
        theta[k] -= params.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      }
    }
    fit.epochs_run = epoch;
    fit.train_loss.push_back(loss_on(train, all_train, t_train));
    if (!validate) {
      fit.best_epoch = epoch;
      best_theta = theta;
      continue;
    }
    const double loss = loss_on(validation, all_valid, t_valid);
    fit.validation_loss.push_back(loss);
    if (loss < best) {
      best = loss;
      fit.best_epoch = epoch;
      best_theta = theta;
    } else if (epoch - fit.best_epoch >= params.patience) {
      break;
    }
  }
  fit.model = Mlp(std::move(sizes), std::move(best_theta), classification, mean, scale);
  return fit;
}

}  // namespace discover
