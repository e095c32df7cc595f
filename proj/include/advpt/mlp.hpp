#pragma once

#include <Eigen/Core>
#include <vector>

#include "advpt/rng.hpp"
#include "advpt/serial.hpp"

namespace advpt {

// Fully connected network with tanh hidden activations and a linear output
// layer. Forward, input-gradient and parameter-gradient passes are explicit
// so callers control exactly what is differentiated.
class Mlp {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
  };

  // Per-call activation cache consumed by the backward passes.
  struct Trace {
    std::vector<Eigen::VectorXd> acts;  // acts[0] = input, acts[k] = layer-k output after activation
  };

  Mlp() = default;
  // dims = {in, hidden..., out}
  explicit Mlp(std::vector<int> dims);

  // Scaled Gaussian init (stddev 1/sqrt(fan_in)).
  void init(Rng& rng);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x, Trace& trace) const;

  // d(loss)/d(input) given d(loss)/d(output).
  Eigen::VectorXd backward_input(const Trace& trace, const Eigen::VectorXd& grad_out) const;

  // Accumulates parameter gradients (and returns the input gradient).
  Eigen::VectorXd backward(const Trace& trace, const Eigen::VectorXd& grad_out, Gradients& grads) const;

  Gradients zero_gradients() const;
  std::size_t parameter_count() const;

  // Parameter access for the optimizer.
  std::vector<Eigen::MatrixXd>& weights() { return W_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }

  void serialize(serial::Writer& w) const;
  static Mlp deserialize(serial::Reader& r);

 private:
  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> W_;  // W_[k]: dims[k+1] x dims[k]
  std::vector<Eigen::VectorXd> b_;
};

}  // namespace advpt
