#include "ncsae/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncsae/error.hpp"

namespace ncsae {

void Hyperparams::validate() const {
  auto fail = [](const std::string& field, double v, const char* rule) {
    throw std::invalid_argument("hyperparameter '" + field + "' = " + std::to_string(v) +
                                " violates " + rule);
  };
  if (!(p > 0.0 && p < 1.0)) fail("p", p, "0 < p < 1");
  if (!(beta >= 0.0)) fail("beta", beta, "beta >= 0");
  if (!(alpha1 >= 0.0)) fail("alpha1", alpha1, "alpha1 >= 0");
  if (!(alpha2 >= 0.0)) fail("alpha2", alpha2, "alpha2 >= 0");
  if (!(kappa > 0.0)) fail("kappa", kappa, "kappa > 0");
  if (!(learning_rate > 0.0)) fail("learning_rate", learning_rate, "learning_rate > 0");
}

void AeParams::check_shapes() const {
  const std::size_t n = w1.cols();
  const std::size_t h = w1.rows();
  if (w2.rows() != n || w2.cols() != h || bx.size() != h || bh.size() != n) {
    throw ShapeError("inconsistent autoencoder shapes: w1 " + w1.shape_string() + ", bx " +
                     std::to_string(bx.size()) + ", w2 " + w2.shape_string() + ", bh " +
                     std::to_string(bh.size()));
  }
}

AeParams init_ae_params(std::size_t n_input, std::size_t n_hidden, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(n_input + n_hidden + 1));
  AeParams params;
  params.w1 = rng_uniform(rng, -r, r, n_hidden, n_input);
  params.w2 = rng_uniform(rng, -r, r, n_input, n_hidden);
  params.bx.assign(n_hidden, 0.0);
  params.bh.assign(n_input, 0.0);
  return params;
}

namespace {

void check_kappa(double kappa) {
  if (!(kappa > 0.0)) {
    throw std::invalid_argument("smoothing constant kappa must be > 0, got " +
                                std::to_string(kappa));
  }
}

}  // namespace

double smoothed_l1(double w, double kappa) {
  check_kappa(kappa);
  const double a = std::abs(w);
  if (a > kappa) return a;
  return w * w / (2.0 * kappa) + kappa / 2.0;
}

double smoothed_l1_grad(double w, double kappa) {
  check_kappa(kappa);
  if (std::abs(w) > kappa) return w > 0.0 ? 1.0 : -1.0;
  return w / kappa;
}

double penalty(double w, const Hyperparams& hp) {
  if (w >= 0.0) return 0.0;
  return hp.alpha1 * smoothed_l1(w, hp.kappa) + 0.5 * hp.alpha2 * w * w;
}

double penalty_grad(double w, const Hyperparams& hp) {
  if (w >= 0.0) return 0.0;
  return hp.alpha1 * smoothed_l1_grad(w, hp.kappa) + hp.alpha2 * w;
}

double penalty_sum(const Matrix& w, const Hyperparams& hp) {
  double total = 0.0;
  for (double v : w.data()) total += penalty(v, hp);
  return total;
}

void add_penalty_grad(Matrix& grad, const Matrix& w, const Hyperparams& hp) {
  if (grad.rows() != w.rows() || grad.cols() != w.cols()) {
    throw ShapeError("add_penalty_grad: " + grad.shape_string() + " vs " + w.shape_string());
  }
  auto g = grad.data();
  const auto src = w.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += penalty_grad(src[i], hp);
}

Matrix encode(const Matrix& w, std::span<const double> b, const Matrix& x) {
  Matrix z = matmul_bt(x, w);
  add_row_vector(z, b);
  for (double& v : z.data()) v = sigmoid(v);
  return z;
}

AeForward ae_forward(const AeParams& params, const Matrix& x_batch) {
  params.check_shapes();
  if (x_batch.cols() != params.n_input()) {
    throw ShapeError("ae_forward: batch " + x_batch.shape_string() +
                     " does not match encoder " + params.w1.shape_string());
  }
  AeForward out;
  out.hidden = encode(params.w1, params.bx, x_batch);
  out.recon = encode(params.w2, params.bh, out.hidden);
  return out;
}

namespace {

double clamp_activation(double a) { return std::clamp(a, kKlClamp, 1.0 - kKlClamp); }

void check_p(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("target activation p must lie in (0,1), got " +
                                std::to_string(p));
  }
}

LossBreakdown loss_from_forward(const AeParams& params, const AeForward& fwd,
                                const Matrix& x, const Vector& mean_act,
                                const Hyperparams& hp) {
  LossBreakdown loss;
  loss.recon = mean_squared_reconstruction(fwd.recon, x);
  loss.kl = hp.beta * kl_term(hp.p, mean_act);
  loss.penalty = penalty_sum(params.w1, hp) + penalty_sum(params.w2, hp);
  loss.total = loss.recon + loss.kl + loss.penalty;
  return loss;
}

void check_batch(const Matrix& x) {
  if (x.rows() == 0) throw std::invalid_argument("empty batch");
}

}  // namespace

double mean_squared_reconstruction(const Matrix& recon, const Matrix& x) {
  if (recon.rows() != x.rows() || recon.cols() != x.cols()) {
    throw ShapeError("reconstruction " + recon.shape_string() + " vs input " + x.shape_string());
  }
  double total = 0.0;
  const auto r = recon.data();
  const auto t = x.data();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - t[i];
    total += d * d;
  }
  return total / static_cast<double>(x.rows());
}

double kl_term(double p, std::span<const double> mean_act) {
  check_p(p);
  double total = 0.0;
  for (double raw : mean_act) {
    const double q = clamp_activation(raw);
    total += p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  }
  return total;
}

LossBreakdown ae_loss(const AeParams& params, const Matrix& x_batch, const Hyperparams& hp) {
  check_batch(x_batch);
  const AeForward fwd = ae_forward(params, x_batch);
  return loss_from_forward(params, fwd, x_batch, column_means(fwd.hidden), hp);
}

AeEvaluation ae_loss_and_grad(const AeParams& params, const Matrix& x_batch,
                              const Hyperparams& hp) {
  check_batch(x_batch);
  const AeForward fwd = ae_forward(params, x_batch);
  const Vector mean_act = column_means(fwd.hidden);

  AeEvaluation out;
  out.loss = loss_from_forward(params, fwd, x_batch, mean_act, hp);

  const std::size_t m = x_batch.rows();
  const double inv_m = 1.0 / static_cast<double>(m);

  // Output pre-activation delta: d/dz of (1/m)||sigmoid(z) - x||^2.
  Matrix delta_out = fwd.recon;
  {
    auto d = delta_out.data();
    const auto t = x_batch.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double r = d[i];
      d[i] = 2.0 * inv_m * (r - t[i]) * r * (1.0 - r);
    }
  }
  out.grads.dw2 = matmul_at(delta_out, fwd.hidden);
  out.grads.dbh = column_sums(delta_out);

  // Hidden delta: backpropagated reconstruction error plus the KL term,
  // which reaches every row through the batch mean.
  Matrix delta_hidden = matmul(delta_out, params.w2);
  Vector kl_slope(mean_act.size());
  for (std::size_t r = 0; r < mean_act.size(); ++r) {
    const double q = clamp_activation(mean_act[r]);
    kl_slope[r] = hp.beta * (-hp.p / q + (1.0 - hp.p) / (1.0 - q)) * inv_m;
  }
  for (std::size_t k = 0; k < m; ++k) {
    auto d = delta_hidden.row(k);
    const auto h = fwd.hidden.row(k);
    for (std::size_t r = 0; r < d.size(); ++r) d[r] = (d[r] + kl_slope[r]) * h[r] * (1.0 - h[r]);
  }
  out.grads.dw1 = matmul_at(delta_hidden, x_batch);
  out.grads.dbx = column_sums(delta_hidden);

  add_penalty_grad(out.grads.dw1, params.w1, hp);
  add_penalty_grad(out.grads.dw2, params.w2, hp);
  return out;
}

AeGrads ae_grad(const AeParams& params, const Matrix& x_batch, const Hyperparams& hp) {
  return ae_loss_and_grad(params, x_batch, hp).grads;
}

}  // namespace ncsae
