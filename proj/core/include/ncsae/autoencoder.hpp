#pragma once

#include <cstddef>
#include <cstdint>

#include "ncsae/matrix.hpp"
#include "ncsae/rng.hpp"

namespace ncsae {

/// Objective and optimizer settings. Defaults are the regime the method was
/// tuned for: target activation 0.05, sparsity weight 3, L1 and L2
/// negative-weight penalties 3e-4 and 3e-3, smoothing knee 0.1.
struct Hyperparams {
  double p = 0.05;
  double beta = 3.0;
  double alpha1 = 0.0003;
  double alpha2 = 0.003;
  double kappa = 0.1;
  double learning_rate = 0.5;
  std::size_t epochs = 400;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// One autoencoder: encoder w1 (n_hidden x n) with bias bx, decoder
/// w2 (n x n_hidden) with bias bh.
struct AeParams {
  Matrix w1;
  Vector bx;
  Matrix w2;
  Vector bh;

  std::size_t n_input() const noexcept { return w1.cols(); }
  std::size_t n_hidden() const noexcept { return w1.rows(); }

  /// Throws ShapeError if the four blocks do not agree.
  void check_shapes() const;

  friend bool operator==(const AeParams&, const AeParams&) = default;
};

struct AeGrads {
  Matrix dw1;
  Vector dbx;
  Matrix dw2;
  Vector dbh;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;  // already multiplied by beta
  double penalty = 0.0;
  double total = 0.0;
};

struct AeForward {
  Matrix hidden;  // m x n_hidden
  Matrix recon;   // m x n
};

/// Weights uniform in [-r, r] with r = sqrt(6 / (n + n_hidden + 1)), w1 drawn
/// before w2; biases zero.
AeParams init_ae_params(std::size_t n_input, std::size_t n_hidden, Rng& rng);

// Negative-weight penalty.

/// Smoothed |w|: |w| outside [-kappa, kappa], w^2/(2 kappa) + kappa/2 inside.
double smoothed_l1(double w, double kappa);
double smoothed_l1_grad(double w, double kappa);

/// 0 for w >= 0, alpha1 * smoothed_l1(w) + alpha2/2 * w^2 otherwise.
double penalty(double w, const Hyperparams& hp);
double penalty_grad(double w, const Hyperparams& hp);

/// Sum of penalty() over every entry of w.
double penalty_sum(const Matrix& w, const Hyperparams& hp);
/// grad += penalty_grad(w) elementwise.
void add_penalty_grad(Matrix& grad, const Matrix& w, const Hyperparams& hp);

// Autoencoder objective.

/// sigmoid(x * w^T + b)
Matrix encode(const Matrix& w, std::span<const double> b, const Matrix& x);

AeForward ae_forward(const AeParams& params, const Matrix& x_batch);

/// (1/m) * sum over rows of ||recon_k - x_k||^2.
double mean_squared_reconstruction(const Matrix& recon, const Matrix& x);

/// Hidden-unit means are clamped into [kKlClamp, 1 - kKlClamp] before use.
inline constexpr double kKlClamp = 1e-8;

/// Sum over units of the Bernoulli KL divergence KL(p || mean_act[r]).
double kl_term(double p, std::span<const double> mean_act);

LossBreakdown ae_loss(const AeParams& params, const Matrix& x_batch, const Hyperparams& hp);
AeGrads ae_grad(const AeParams& params, const Matrix& x_batch, const Hyperparams& hp);

struct AeEvaluation {
  LossBreakdown loss;
  AeGrads grads;
};

/// Loss and gradient from a single forward pass. The loss is bitwise equal
/// to ae_loss() on the same arguments.
AeEvaluation ae_loss_and_grad(const AeParams& params, const Matrix& x_batch,
                              const Hyperparams& hp);

}  // namespace ncsae
