// Dense autoencoder with a scalar bottleneck and its secondary manifold.
//
// The network reconstructs [x, onehot(t), y] (x and y standardized) through a
// 1-D code h1. The anomaly manifold pairs h1 with h2 = |y_hat - y|, the part
// of the reconstruction error that concerns the response, each axis min-max
// normalized to [0, 1].
//
// Training minimizes the mean over samples of the squared reconstruction error
// with mini-batch Adam. After every epoch the full-data loss is compared with
// the last accepted epoch; on an increase the epoch is rolled back and the step
// size halved, so the recorded loss trace never increases.

#ifndef MANIFOLD_AD_AUTOENCODER_HPP
#define MANIFOLD_AD_AUTOENCODER_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "manifold_ad/dataset.hpp"
#include "manifold_ad/errors.hpp"
#include "manifold_ad/manifold.hpp"
#include "manifold_ad/rng.hpp"

namespace manifold_ad {

enum class Activation { tanh, relu };

struct MlpSpec {
  std::vector<int> layer_widths;  // encoder widths, input first, bottleneck (1) last
  Activation activation = Activation::tanh;
  std::uint64_t seed = 0;
  int epochs = 2000;
  int batch_size = 64;
  double step_size = 1e-3;
};

/// Input width of the autoencoder for a dataset: numeric features, one-hot columns, response.
inline int autoencoder_input_width(const Dataset& d) {
  int w = static_cast<int>(d.dx()) + 1;
  for (int l : d.level_counts) w += l;
  return w;
}

inline MlpSpec default_mlp_spec(const Dataset& d) {
  MlpSpec s;
  s.layer_widths = {autoencoder_input_width(d), 32, 8, 1};
  return s;
}

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
  bool activated = true;
};

/// Encoder layers followed by the mirrored decoder; the bottleneck and output layers are linear.
struct Mlp {
  std::vector<DenseLayer> layers;
  std::size_t encoder_depth = 0;  // output of layers[encoder_depth - 1] is h1
  Activation activation = Activation::tanh;

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.W.size() + l.b.size();
    return c;
  }
};

inline Mlp make_autoencoder(const MlpSpec& spec, Rng& rng) {
  const auto& w = spec.layer_widths;
  if (w.size() < 2) throw InputError("autoencoder needs at least an input and a bottleneck width");
  if (w.back() != 1) throw InputError("autoencoder bottleneck width must be 1");
  for (int v : w)
    if (v < 1) throw InputError("layer widths must be positive");
  std::vector<int> widths(w.begin(), w.end());
  widths.insert(widths.end(), w.rbegin() + 1, w.rend());

  Mlp net;
  net.activation = spec.activation;
  net.encoder_depth = w.size() - 1;
  const std::size_t depth = widths.size() - 1;
  for (std::size_t k = 0; k < depth; ++k) {
    DenseLayer l;
    const int in = widths[k], out = widths[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    l.W.resize(out, in);
    l.b.resize(out);
    for (Eigen::Index i = 0; i < l.W.size(); ++i) l.W.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = rng.uniform(-bound, bound);
    l.activated = !(k + 1 == net.encoder_depth || k + 1 == depth);
    net.layers.push_back(std::move(l));
  }
  return net;
}

namespace detail {

inline void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::tanh) z = z.array().tanh();
  else z = z.cwiseMax(0.0);
}

/// Derivative of the activation expressed through its output.
inline Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& out, Activation a) {
  if (a == Activation::tanh) return 1.0 - out.array().square();
  return (out.array() > 0.0).cast<double>();
}

}  // namespace detail

struct ForwardPass {
  std::vector<Eigen::MatrixXd> outputs;  // outputs[0] = input, outputs[k+1] = output of layer k
  [[nodiscard]] const Eigen::MatrixXd& reconstruction() const { return outputs.back(); }
};

/// Columns of `batch` are samples.
inline ForwardPass forward(const Mlp& net, const Eigen::MatrixXd& batch) {
  ForwardPass fp;
  fp.outputs.reserve(net.layers.size() + 1);
  fp.outputs.push_back(batch);
  for (const auto& l : net.layers) {
    Eigen::MatrixXd z = l.W * fp.outputs.back();
    z.colwise() += l.b;
    if (l.activated) detail::activate(z, net.activation);
    fp.outputs.push_back(std::move(z));
  }
  return fp;
}

/// Mean over samples of the squared reconstruction error.
inline double reconstruction_loss(const Mlp& net, const Eigen::MatrixXd& batch) {
  return (forward(net, batch).reconstruction() - batch).colwise().squaredNorm().mean();
}

/// Loss and its gradient with respect to every weight and bias (backpropagation).
inline double loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& batch, std::vector<DenseLayer>& grads) {
  const auto fp = forward(net, batch);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());
  Eigen::MatrixXd err = fp.reconstruction() - batch;
  const double loss = err.colwise().squaredNorm().sum() * inv_b;

  grads.resize(net.layers.size());
  Eigen::MatrixXd delta = 2.0 * inv_b * err;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    if (l.activated) delta.array() *= detail::activation_slope(fp.outputs[k + 1], net.activation).array();
    grads[k].W.noalias() = delta * fp.outputs[k].transpose();
    grads[k].b = delta.rowwise().sum();
    grads[k].activated = l.activated;
    if (k > 0) delta = l.W.transpose() * delta;
  }
  return loss;
}

struct AeModel {
  Mlp net;
  std::vector<double> training_loss_trace;  // full-data loss after each epoch
  Eigen::VectorXd h1;
  Eigen::VectorXd h2;  // |y_hat - y| on standardized y
  int step_halvings = 0;
  double initial_loss = 0.0;
  double final_step_size = 0.0;
  bool untrained = false;
};

/// Design matrix fed to the autoencoder, one column per sample: [x_std; onehot(t); y_std].
inline Eigen::MatrixXd autoencoder_inputs(const Dataset& d) {
  const auto n = d.n();
  const Eigen::MatrixXd xs = d.dx() > 0 ? Standardizer::fit(d.x).apply(d.x) : Eigen::MatrixXd(n, 0);
  const Eigen::MatrixXd oh = grouped_one_hot(d.t, d.level_counts);
  Eigen::MatrixXd m(n, xs.cols() + oh.cols() + 1);
  m << xs, oh, standardize(d.y);
  return m.transpose();
}

inline AeModel train(const Dataset& d, const MlpSpec& spec) {
  validate(d);
  if (spec.layer_widths.empty() || spec.layer_widths.front() != autoencoder_input_width(d))
    throw InputError("first layer width must equal dx + one-hot width + 1 = " +
                     std::to_string(autoencoder_input_width(d)));
  if (spec.epochs < 0) throw InputError("epochs must be non-negative");
  if (spec.batch_size < 1) throw InputError("batch size must be positive");
  if (!(spec.step_size > 0.0)) throw InputError("step size must be positive");

  const Eigen::MatrixXd data = autoencoder_inputs(d);
  const auto n = data.cols();
  Rng rng(spec.seed);
  AeModel model;
  model.net = make_autoencoder(spec, rng);
  model.untrained = spec.epochs == 0;

  auto& net = model.net;
  const std::size_t depth = net.layers.size();
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<DenseLayer> m1(depth), m2(depth), grads;
  for (std::size_t k = 0; k < depth; ++k) {
    m1[k].W = Eigen::MatrixXd::Zero(net.layers[k].W.rows(), net.layers[k].W.cols());
    m1[k].b = Eigen::VectorXd::Zero(net.layers[k].b.size());
    m2[k] = m1[k];
  }
  long step_count = 0;
  double lr = spec.step_size;
  double best = reconstruction_loss(net, data);
  model.initial_loss = best;
  if (!std::isfinite(best)) throw NumericalError("autoencoder loss is non-finite at initialization");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd batch;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const Mlp saved_net = net;
    const auto saved_m1 = m1, saved_m2 = m2;
    const long saved_steps = step_count;

    for (Eigen::Index i = n - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    for (Eigen::Index start = 0; start < n; start += spec.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(spec.batch_size, n - start);
      batch.resize(data.rows(), len);
      for (Eigen::Index c = 0; c < len; ++c) batch.col(c) = data.col(order[start + c]);
      loss_and_gradient(net, batch, grads);
      ++step_count;
      const double c1 = 1.0 / (1.0 - std::pow(beta1, static_cast<double>(step_count)));
      const double c2 = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(step_count)));
      for (std::size_t k = 0; k < depth; ++k) {
        m1[k].W = beta1 * m1[k].W + (1.0 - beta1) * grads[k].W;
        m2[k].W = beta2 * m2[k].W + (1.0 - beta2) * grads[k].W.cwiseAbs2();
        m1[k].b = beta1 * m1[k].b + (1.0 - beta1) * grads[k].b;
        m2[k].b = beta2 * m2[k].b + (1.0 - beta2) * grads[k].b.cwiseAbs2();
        net.layers[k].W.array() -= lr * (m1[k].W.array() * c1) / ((m2[k].W.array() * c2).sqrt() + eps);
        net.layers[k].b.array() -= lr * (m1[k].b.array() * c1) / ((m2[k].b.array() * c2).sqrt() + eps);
      }
    }

    const double loss = reconstruction_loss(net, data);
    if (!std::isfinite(loss)) throw NumericalError("autoencoder training diverged at epoch " + std::to_string(epoch + 1));
    if (loss > best) {
      net = saved_net;
      m1 = saved_m1;
      m2 = saved_m2;
      step_count = saved_steps;
      lr *= 0.5;
      ++model.step_halvings;
    } else {
      best = loss;
    }
    model.training_loss_trace.push_back(best);
  }
  model.final_step_size = lr;

  const auto fp = forward(net, data);
  model.h1 = fp.outputs[net.encoder_depth].row(0).transpose();
  model.h2 = (fp.reconstruction().row(data.rows() - 1) - data.row(data.rows() - 1)).cwiseAbs().transpose();
  return model;
}

/// (h1, h2), each min-max normalized to [0, 1]; a constant axis becomes all zeros.
inline Manifold secondary_manifold(const AeModel& m) {
  const auto n = m.h1.size();
  Manifold out;
  out.learner = Learner::autoencoder;
  out.axis_names = {"h1", "h2"};
  out.untrained = m.untrained;
  out.points.resize(n, 2);
  out.sample_ids.resize(static_cast<std::size_t>(n));
  std::iota(out.sample_ids.begin(), out.sample_ids.end(), 0);
  const Eigen::VectorXd* axes[2] = {&m.h1, &m.h2};
  for (int a = 0; a < 2; ++a) {
    const double lo = axes[a]->minCoeff(), hi = axes[a]->maxCoeff();
    if (hi > lo) {
      out.points.col(a) = (axes[a]->array() - lo) / (hi - lo);
    } else {
      out.points.col(a).setZero();
      out.degenerate_axis = true;
    }
  }
  return out;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_AUTOENCODER_HPP
