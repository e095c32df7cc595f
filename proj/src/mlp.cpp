#include "advpt/mlp.hpp"

#include <cmath>

#include "advpt/errors.hpp"

namespace advpt {

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) fail(ErrorKind::Config, "mlp: need at least input and output dims");
  for (int d : dims_)
    if (d <= 0) fail(ErrorKind::Config, "mlp: dims must be positive");
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    W_.emplace_back(Eigen::MatrixXd::Zero(dims_[k + 1], dims_[k]));
    b_.emplace_back(Eigen::VectorXd::Zero(dims_[k + 1]));
  }
}

void Mlp::init(Rng& rng) {
  for (std::size_t k = 0; k < W_.size(); ++k) {
    double scale = 1.0 / std::sqrt(static_cast<double>(dims_[k]));
    for (Eigen::Index i = 0; i < W_[k].rows(); ++i)
      for (Eigen::Index j = 0; j < W_[k].cols(); ++j)
        W_[k](i, j) = rng.normal() * scale;
    b_[k].setZero();
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Trace trace;
  return forward(x, trace);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, Trace& trace) const {
  if (x.size() != dims_.front())
    fail(ErrorKind::Dimension, "mlp forward: input size mismatch");
  trace.acts.clear();
  trace.acts.reserve(W_.size());
  Eigen::VectorXd a = x;
  trace.acts.push_back(a);
  for (std::size_t k = 0; k < W_.size(); ++k) {
    Eigen::VectorXd z = W_[k] * a + b_[k];
    if (k + 1 < W_.size()) {
      a = z.array().tanh().matrix();
      trace.acts.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::VectorXd Mlp::backward_input(const Trace& trace, const Eigen::VectorXd& grad_out) const {
  Eigen::VectorXd g = grad_out;
  for (std::size_t k = W_.size(); k-- > 0;) {
    Eigen::VectorXd ga = W_[k].transpose() * g;
    if (k > 0) {
      const Eigen::VectorXd& a = trace.acts[k];
      g = (ga.array() * (1.0 - a.array().square())).matrix();
    } else {
      g = std::move(ga);
    }
  }
  return g;
}

Eigen::VectorXd Mlp::backward(const Trace& trace, const Eigen::VectorXd& grad_out, Gradients& grads) const {
  Eigen::VectorXd g = grad_out;
  for (std::size_t k = W_.size(); k-- > 0;) {
    grads.dW[k].noalias() += g * trace.acts[k].transpose();
    grads.db[k] += g;
    Eigen::VectorXd ga = W_[k].transpose() * g;
    if (k > 0) {
      const Eigen::VectorXd& a = trace.acts[k];
      g = (ga.array() * (1.0 - a.array().square())).matrix();
    } else {
      g = std::move(ga);
    }
  }
  return g;
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (std::size_t k = 0; k < W_.size(); ++k) {
    g.dW.emplace_back(Eigen::MatrixXd::Zero(W_[k].rows(), W_[k].cols()));
    g.db.emplace_back(Eigen::VectorXd::Zero(b_[k].size()));
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < W_.size(); ++k)
    n += static_cast<std::size_t>(W_[k].size()) + static_cast<std::size_t>(b_[k].size());
  return n;
}

void Mlp::serialize(serial::Writer& w) const {
  w.u32(static_cast<std::uint32_t>(dims_.size()));
  for (int d : dims_) w.u32(static_cast<std::uint32_t>(d));
  for (std::size_t k = 0; k < W_.size(); ++k) {
    for (Eigen::Index i = 0; i < W_[k].rows(); ++i)
      for (Eigen::Index j = 0; j < W_[k].cols(); ++j) w.f64(W_[k](i, j));
    for (Eigen::Index i = 0; i < b_[k].size(); ++i) w.f64(b_[k](i));
  }
}

Mlp Mlp::deserialize(serial::Reader& r) {
  std::uint32_t n_dims = r.u32();
  if (n_dims < 2 || n_dims > 64) fail(ErrorKind::Format, "mlp: implausible layer count");
  std::vector<int> dims(n_dims);
  for (auto& d : dims) {
    d = static_cast<int>(r.u32());
    if (d <= 0 || d > (1 << 22)) fail(ErrorKind::Format, "mlp: implausible layer width");
  }
  Mlp m(dims);
  for (std::size_t k = 0; k < m.W_.size(); ++k) {
    for (Eigen::Index i = 0; i < m.W_[k].rows(); ++i)
      for (Eigen::Index j = 0; j < m.W_[k].cols(); ++j) m.W_[k](i, j) = r.f64();
    for (Eigen::Index i = 0; i < m.b_[k].size(); ++i) m.b_[k](i) = r.f64();
  }
  return m;
}

}  // namespace advpt
