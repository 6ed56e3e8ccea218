// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   ncsae_acceptance          run all criteria
//   ncsae_acceptance 4 5      run only criteria 4 and 5
//
// NCSAE_MNIST_DIR may point at a directory holding the four standard MNIST
// IDX files; otherwise the bundled 5,000-digit sample is used.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "gradient_check.hpp"
#include "ncsae/autoencoder.hpp"
#include "ncsae/data.hpp"
#include "ncsae/metrics.hpp"
#include "ncsae/rng.hpp"
#include "ncsae/training.hpp"

namespace fs = std::filesystem;
using namespace ncsae;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-6;           // criterion 1
constexpr double kGradStep = 1e-5;             // criterion 1
constexpr double kGradBudgetSeconds = 10.0;    // criterion 1
constexpr double kOracleTol = 1e-15;           // criterion 2
constexpr double kContinuityTol = 1e-10;       // criterion 3
constexpr double kProbe = 1e-7;                // criterion 3
constexpr double kNonnegBudgetSeconds = 300;   // criterion 4
constexpr std::size_t kNonnegEpochs = 500;     // criterion 4
constexpr double kAccuracyTarget = 0.90;       // criterion 5
constexpr double kPipelineBudgetSeconds = 600; // criterion 5
constexpr double kReductionTol = 1e-12;        // criterion 6
constexpr double kIgTieTol = 1e-12;            // criterion 7

// Criterion 5 schedule. Learning rates are the defaults for each phase.
constexpr std::size_t kPretrainEpochs = 500;
constexpr std::size_t kSoftmaxEpochs = 500;
constexpr std::size_t kFinetuneEpochs = 1000;
constexpr double kPretrainRate = 0.5;
constexpr double kSoftmaxRate = 0.5;
constexpr double kFinetuneRate = 0.1;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string num(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Hyperparams paper_hp() { return Hyperparams{}; }

Vector random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  const Matrix m = rng_uniform(rng, lo, hi, 1, n);
  return Vector(m.data().begin(), m.data().end());
}

fs::path mnist_dir() {
  if (const char* env = std::getenv("NCSAE_MNIST_DIR")) return env;
  return fs::path(NCSAE_TESTDATA_DIR) / "mnist5k";
}

struct Subset {
  Dataset train;
  Dataset test;
};

Subset mnist_126() {
  const fs::path d = mnist_dir();
  const std::vector<std::size_t> keep{1, 2, 6};
  return {subset_by_labels(load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte"), keep),
          subset_by_labels(load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte"), keep)};
}

// ---------------------------------------------------------------------------
// 1. Gradient exactness

Outcome criterion_1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::pair<double, double> regimes[] = {{0.0, 0.0}, {0.0003, 0.0}, {0.0, 0.003}, {0.0003, 0.003}};
  std::uint64_t seed = 100;
  for (const auto& [a1, a2] : regimes) {
    Hyperparams hp;
    hp.alpha1 = a1;
    hp.alpha2 = a2;
    Rng rng(seed++);
    AeParams p;
    p.w1 = rng_uniform(rng, -0.5, 0.5, 7, 20);
    p.w2 = rng_uniform(rng, -0.5, 0.5, 20, 7);
    p.bx = random_vector(rng, 7, -0.1, 0.1);
    p.bh = random_vector(rng, 20, -0.1, 0.1);
    const Matrix x = rng_uniform(rng, 0, 1, 13, 20);
    const AeGrads g = ae_grad(p, x, hp);
    const auto r = testing::check_gradient({{"w1", p.w1.data(), g.dw1.data()},
                                            {"bx", p.bx, g.dbx},
                                            {"w2", p.w2.data(), g.dw2.data()},
                                            {"bh", p.bh, g.dbh}},
                                           [&] { return ae_loss(p, x, hp).total; }, kGradStep);
    o.check(r.worst_rel_error < kGradRelTol,
            "ae_grad alpha1=" + num(a1) + " alpha2=" + num(a2) + ": worst rel err " +
                num(r.worst_rel_error, 3) + " at " + r.worst_coordinate + " over " +
                std::to_string(r.coordinates) + " coords");
  }
  {
    Rng rng(200);
    Matrix w = rng_uniform(rng, -0.8, 0.8, 2, 3);
    Vector b = random_vector(rng, 2, -0.2, 0.2);
    const Matrix f = rng_uniform(rng, 0, 1, 9, 3);
    const Labels y{0, 1, 1, 0, 1, 0, 0, 1, 1};
    const Hyperparams hp = paper_hp();
    const auto g = softmax_grad(w, b, f, y, hp);
    const auto r = testing::check_gradient({{"w", w.data(), g.dw.data()}, {"b", b, g.db}},
                                           [&] { return softmax_loss(w, b, f, y, hp).total; }, kGradStep);
    o.check(r.worst_rel_error < kGradRelTol,
            "softmax_grad: worst rel err " + num(r.worst_rel_error, 3) + " at " + r.worst_coordinate);
  }
  {
    Rng rng(300);
    StackedNetwork net;
    AeParams layer = init_ae_params(4, 3, rng);
    layer.w1 = rng_uniform(rng, -1, 1, 3, 4);
    layer.bx = random_vector(rng, 3, -0.3, 0.3);
    net.encoders.push_back(layer);
    net.softmax_w = rng_uniform(rng, -1, 1, 2, 3);
    net.softmax_b = random_vector(rng, 2, -0.3, 0.3);
    const Matrix x = rng_uniform(rng, 0, 1, 6, 4);
    const Labels y{0, 1, 1, 0, 1, 0};
    const Hyperparams hp = paper_hp();
    const auto g = finetune_grad(net, x, y, hp);
    const auto r = testing::check_gradient({{"enc0.w1", net.encoders[0].w1.data(), g.dw[0].data()},
                                            {"enc0.bx", net.encoders[0].bx, g.db[0]},
                                            {"softmax.w", net.softmax_w.data(), g.dsoftmax_w.data()},
                                            {"softmax.b", net.softmax_b, g.dsoftmax_b}},
                                           [&] { return finetune_loss(net, x, y, hp).total; }, kGradStep);
    o.check(r.worst_rel_error < kGradRelTol, "finetune_grad 4-3-2: worst rel err " +
                                                 num(r.worst_rel_error, 3) + " at " + r.worst_coordinate);
  }
  const double elapsed = seconds_since(t0);
  o.check(elapsed < kGradBudgetSeconds, "runtime " + num(elapsed, 3) + " s < " + num(kGradBudgetSeconds) + " s");
  return o;
}

// ---------------------------------------------------------------------------
// 2. Penalty oracle values

Outcome criterion_2() {
  Outcome o;
  const Hyperparams hp = paper_hp();
  const double w = -0.2;
  // Scalar evaluation of the piecewise definitions. |w| > kappa, so the
  // smoothed L1 term is |w| and its slope is sign(w).
  const double a1 = 0.0003, a2 = 0.003, kappa = 0.1;
  const double gamma = std::abs(w) > kappa ? std::abs(w) : w * w / (2 * kappa) + kappa / 2;
  const double gamma_slope = std::abs(w) > kappa ? (w > 0 ? 1.0 : -1.0) : w / kappa;
  const double oracle_f = a1 * gamma + a2 / 2 * w * w;
  const double oracle_g = a1 * gamma_slope + a2 * w;

  const double f = penalty(w, hp);
  const double g = penalty_grad(w, hp);
  o.check(std::abs(f - oracle_f) <= kOracleTol,
          "penalty(-0.2) = " + num(f, 17) + ", scalar oracle " + num(oracle_f, 17));
  o.check(std::abs(f - 1.2e-4) <= kOracleTol, "penalty(-0.2) vs 1.2e-4: diff " + num(std::abs(f - 1.2e-4), 3));
  o.check(std::abs(g - oracle_g) <= kOracleTol,
          "penalty_grad(-0.2) = " + num(g, 17) + ", scalar oracle " + num(oracle_g, 17));
  o.check(std::abs(g + 9e-4) <= kOracleTol, "penalty_grad(-0.2) vs -9e-4: diff " + num(std::abs(g + 9e-4), 3));
  return o;
}

// ---------------------------------------------------------------------------
// 3. Smoothness at the kinks

Outcome criterion_3() {
  Outcome o;
  const Hyperparams hp = paper_hp();
  const double eps = kProbe;
  const std::pair<const char*, std::function<double(double)>> fns[] = {
      {"penalty", [&](double w) { return penalty(w, hp); }},
      {"penalty_grad", [&](double w) { return penalty_grad(w, hp); }},
  };
  for (const double a : {0.0, -hp.kappa}) {
    for (const auto& [name, f] : fns) {
      // One-sided limits from probes at eps and 2 eps, linearly extrapolated
      // to the point so that a finite slope does not read as a gap.
      const double left = 2 * f(a - eps) - f(a - 2 * eps);
      const double right = 2 * f(a + eps) - f(a + 2 * eps);
      const double gap = std::abs(left - right);
      const double raw = std::abs(f(a + eps) - f(a - eps));
      o.check(gap <= kContinuityTol, std::string(name) + " at w=" + num(a) + ": limit gap " + num(gap, 3) +
                                         " (raw probe difference " + num(raw, 3) + ")");
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 4. Nonnegativity effect

Outcome criterion_4() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Subset data = mnist_126();
  o.note("data " + mnist_dir().string() + ": " + std::to_string(data.train.x.rows()) + " training rows");

  struct Run {
    double nonneg, kl, neg_mass;
  };
  auto train = [&](bool constrained) {
    Hyperparams hp = paper_hp();
    hp.epochs = kNonnegEpochs;
    if (!constrained) hp.alpha1 = hp.alpha2 = 0.0;
    const AeParams p = train_ae(data.train.x, 10, hp).params;
    double neg = 0.0;
    for (double w : p.w1.data()) neg += std::min(w, 0.0);
    return Run{nonneg_fraction(p.w1), kl_sparsity_measure(p, data.train.x, hp.p), neg};
  };
  const Run con = train(true);
  const Run unc = train(false);
  o.check(con.nonneg > unc.nonneg, "nonneg_fraction(W1): constrained " + num(con.nonneg) + " vs unconstrained " +
                                       num(unc.nonneg));
  o.check(con.kl <= unc.kl, "kl_sparsity_measure: constrained " + num(con.kl) + " vs unconstrained " + num(unc.kl));
  o.note("sum of negative W1 entries: constrained " + num(con.neg_mass) + " vs unconstrained " + num(unc.neg_mass));
  const double elapsed = seconds_since(t0);
  o.check(elapsed < kNonnegBudgetSeconds, "runtime " + num(elapsed, 3) + " s < " + num(kNonnegBudgetSeconds) + " s");
  return o;
}

// ---------------------------------------------------------------------------
// 5. End-to-end classification

Outcome criterion_5() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Subset data = mnist_126();

  struct Result {
    double before, after;
  };
  auto pipeline = [&](bool constrained) {
    Hyperparams pre = paper_hp();
    if (!constrained) pre.alpha1 = pre.alpha2 = 0.0;
    pre.learning_rate = kPretrainRate;
    pre.epochs = kPretrainEpochs;
    Hyperparams soft = pre;
    soft.learning_rate = kSoftmaxRate;
    soft.epochs = kSoftmaxEpochs;
    Hyperparams fine = pre;
    fine.learning_rate = kFinetuneRate;
    fine.epochs = kFinetuneEpochs;

    const std::vector<std::size_t> layers{10, 10};
    StackedNetwork net = stack_pretrain(data.train.x, layers, pre).network;
    const SoftmaxResult head = train_softmax(net.features(data.train.x), *data.train.labels, 3, soft);
    net.softmax_w = head.w;
    net.softmax_b = head.b;
    const double before = evaluate_accuracy(net, data.test.x, *data.test.labels);
    const StackedNetwork tuned = finetune(net, data.train.x, *data.train.labels, fine).network;
    return Result{before, evaluate_accuracy(tuned, data.test.x, *data.test.labels)};
  };
  const Result con = pipeline(true);
  const Result unc = pipeline(false);
  o.note("784-10-10-3, test subset of " + std::to_string(data.test.x.rows()) + " rows");
  o.check(con.after >= kAccuracyTarget, "constrained accuracy after fine-tuning " + num(con.after) +
                                             " >= " + num(kAccuracyTarget));
  o.check(con.after >= con.before,
          "fine-tuning keeps accuracy: before " + num(con.before) + ", after " + num(con.after));
  o.check(con.before > unc.before, "before fine-tuning: constrained " + num(con.before) + " > unconstrained " +
                                       num(unc.before));
  o.note("unconstrained after fine-tuning " + num(unc.after));
  const double elapsed = seconds_since(t0);
  o.check(elapsed < kPipelineBudgetSeconds,
          "runtime " + num(elapsed, 3) + " s < " + num(kPipelineBudgetSeconds) + " s");
  return o;
}

// ---------------------------------------------------------------------------
// 6. Reductions

// Plain sparse autoencoder written with explicit loops: mean squared
// reconstruction plus beta-weighted Bernoulli KL, no weight penalty.
struct SaeOracle {
  double recon = 0, kl = 0, total = 0;
  Matrix dw1, dw2;
  Vector dbx, dbh;
};

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

SaeOracle sae_oracle(const AeParams& p, const Matrix& x, double beta, double target) {
  const std::size_t m = x.rows(), n = x.cols(), h = p.w1.rows();
  Matrix a(m, h), r(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < h; ++j) {
      double z = p.bx[j];
      for (std::size_t k = 0; k < n; ++k) z += p.w1(j, k) * x(i, k);
      a(i, j) = sig(z);
    }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double z = p.bh[k];
      for (std::size_t j = 0; j < h; ++j) z += p.w2(k, j) * a(i, j);
      r(i, k) = sig(z);
    }
  SaeOracle o;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) o.recon += (r(i, k) - x(i, k)) * (r(i, k) - x(i, k)) / m;
  Vector rho(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < m; ++i) rho[j] += a(i, j) / m;
    o.kl += beta * (target * std::log(target / rho[j]) + (1 - target) * std::log((1 - target) / (1 - rho[j])));
  }
  o.total = o.recon + o.kl;

  o.dw1 = Matrix(h, n);
  o.dw2 = Matrix(n, h);
  o.dbx.assign(h, 0.0);
  o.dbh.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    Vector d3(n), d2(h);
    for (std::size_t k = 0; k < n; ++k) d3[k] = 2.0 / m * (r(i, k) - x(i, k)) * r(i, k) * (1 - r(i, k));
    for (std::size_t j = 0; j < h; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += p.w2(k, j) * d3[k];
      s += beta / m * (-target / rho[j] + (1 - target) / (1 - rho[j]));
      d2[j] = s * a(i, j) * (1 - a(i, j));
    }
    for (std::size_t k = 0; k < n; ++k) {
      o.dbh[k] += d3[k];
      for (std::size_t j = 0; j < h; ++j) o.dw2(k, j) += d3[k] * a(i, j);
    }
    for (std::size_t j = 0; j < h; ++j) {
      o.dbx[j] += d2[j];
      for (std::size_t k = 0; k < n; ++k) o.dw1(j, k) += d2[j] * x(i, k);
    }
  }
  return o;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Outcome criterion_6() {
  Outcome o;
  Rng rng(600);
  AeParams p;
  p.w1 = rng_uniform(rng, -0.5, 0.5, 7, 20);
  p.w2 = rng_uniform(rng, -0.5, 0.5, 20, 7);
  p.bx = random_vector(rng, 7, -0.1, 0.1);
  p.bh = random_vector(rng, 20, -0.1, 0.1);
  const Matrix x = rng_uniform(rng, 0, 1, 13, 20);

  for (const double beta : {3.0, 0.0}) {
    Hyperparams hp = paper_hp();
    hp.alpha1 = hp.alpha2 = 0.0;
    hp.beta = beta;
    const AeEvaluation got = ae_loss_and_grad(p, x, hp);
    const SaeOracle want = sae_oracle(p, x, beta, hp.p);
    const std::string tag = "beta=" + num(beta) + ": ";
    const double loss_diff = std::max({std::abs(got.loss.recon - want.recon), std::abs(got.loss.kl - want.kl),
                                       std::abs(got.loss.total - want.total)});
    o.check(loss_diff <= kReductionTol && got.loss.penalty == 0.0,
            tag + "loss components vs plain SAE, max diff " + num(loss_diff, 3) + ", penalty " +
                num(got.loss.penalty));
    const double grad_diff = std::max({max_abs_diff(got.grads.dw1.data(), want.dw1.data()),
                                       max_abs_diff(got.grads.dbx, want.dbx),
                                       max_abs_diff(got.grads.dw2.data(), want.dw2.data()),
                                       max_abs_diff(got.grads.dbh, want.dbh)});
    o.check(grad_diff <= kReductionTol, tag + "gradients vs plain SAE, max diff " + num(grad_diff, 3));
    if (beta == 0.0) {
      o.check(got.loss.kl == 0.0 && got.loss.total == got.loss.recon,
              "beta=0: total " + num(got.loss.total, 17) + " equals reconstruction " + num(got.loss.recon, 17));
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 7. Data pipeline

// Mutual information between class and term presence over the joint table.
std::vector<double> oracle_ig(const BowCorpus& c) {
  const double n = static_cast<double>(c.counts.rows());
  std::vector<double> out;
  for (std::size_t t = 0; t < c.counts.cols(); ++t) {
    std::map<std::pair<std::size_t, bool>, double> joint;
    std::map<std::size_t, double> pc;
    std::map<bool, double> pt;
    for (std::size_t d = 0; d < c.counts.rows(); ++d) {
      const bool present = c.counts(d, t) > 0;
      joint[{c.labels[d], present}] += 1 / n;
      pc[c.labels[d]] += 1 / n;
      pt[present] += 1 / n;
    }
    double mi = 0;
    for (const auto& [key, pj] : joint) mi += pj * std::log2(pj / (pc[key.first] * pt[key.second]));
    out.push_back(mi);
  }
  return out;
}

// Whether `chosen` (vocabulary indices) is exactly the oracle top-k: every
// chosen term beats every other term, or ties with it and comes first.
bool is_oracle_top_k(const std::vector<double>& ig, const std::vector<std::size_t>& chosen,
                     std::size_t* boundary_ties) {
  std::vector<bool> in(ig.size(), false);
  for (std::size_t i : chosen) in[i] = true;
  *boundary_ties = 0;
  for (std::size_t s : chosen) {
    for (std::size_t t = 0; t < ig.size(); ++t) {
      if (in[t]) continue;
      if (std::abs(ig[s] - ig[t]) <= kIgTieTol) {
        ++*boundary_ties;
        if (s > t) return false;
      } else if (ig[s] < ig[t]) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::size_t> vocab_indices(const BowCorpus& full, const BowCorpus& selected) {
  std::vector<std::size_t> out;
  for (const std::string& term : selected.vocab)
    out.push_back(static_cast<std::size_t>(std::find(full.vocab.begin(), full.vocab.end(), term) - full.vocab.begin()));
  return out;
}

BowCorpus make_corpus(Matrix counts, Labels labels, std::size_t classes) {
  BowCorpus c;
  c.counts = std::move(counts);
  for (std::size_t j = 0; j < c.counts.cols(); ++j) c.vocab.push_back("t" + std::to_string(j));
  c.labels = std::move(labels);
  for (std::size_t k = 0; k < classes; ++k) c.class_names.push_back("c" + std::to_string(k));
  return c;
}

Outcome criterion_7() {
  Outcome o;
  {
    // Two 2x3 images, labels 7 and 1.
    const std::vector<std::uint8_t> images = {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3,
                                              0,    51,   255,  102,  204, 0, 255, 255, 0, 1, 2, 3};
    const std::vector<std::uint8_t> labels = {0x00, 0x00, 0x08, 0x01, 0, 0, 0, 2, 7, 1};
    const IdxBytes back = serialize_idx(parse_idx(images, labels));
    o.check(back.images == images && back.labels == labels, "IDX fixture parse/serialize round trip byte-exact");

    const fs::path dir = fs::temp_directory_path() / "ncsae_acceptance_idx";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path src = mnist_dir();
    const Dataset d = load_idx(src / "t10k-images-idx3-ubyte", src / "t10k-labels-idx1-ubyte");
    write_idx(d, dir / "img", dir / "lbl");
    auto bytes = [](const fs::path& p) {
      std::ifstream f(p, std::ios::binary);
      return std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    o.check(bytes(dir / "img") == bytes(src / "t10k-images-idx3-ubyte") &&
                bytes(dir / "lbl") == bytes(src / "t10k-labels-idx1-ubyte"),
            "MNIST test split load/write round trip byte-exact (" + std::to_string(d.x.rows()) + " images)");
    fs::remove_all(dir);
  }
  {
    // Six documents, three classes. Column totals: t0 2, t1 80, t2 5, t3 5,
    // t4 6, t5 7, t6 6. t2, t3 and t6 each mark one class; t4 and t5 carry
    // no class information.
    const BowCorpus c = make_corpus(Matrix{{1, 20, 3, 0, 1, 2, 0},
                                           {0, 10, 2, 0, 1, 0, 0},
                                           {0, 10, 0, 4, 1, 3, 0},
                                           {0, 20, 0, 1, 1, 0, 0},
                                           {1, 10, 0, 0, 1, 2, 3},
                                           {0, 10, 0, 0, 1, 0, 3}},
                                    Labels{0, 0, 1, 1, 2, 2}, 3);
    std::vector<std::string> band;
    for (std::size_t t = 0; t < c.counts.cols(); ++t) {
      double total = 0;
      for (std::size_t d = 0; d < c.counts.rows(); ++d) total += c.counts(d, t);
      if (total >= 4 && total <= 70) band.push_back(c.vocab[t]);
    }
    const BowCorpus f = frequency_filter(c, 4, 70);
    o.check(f.vocab == band, "frequency_filter(4,70) keeps " + std::to_string(f.vocab.size()) + " of " +
                                 std::to_string(c.vocab.size()) + " terms, as the column totals say");
    const std::vector<double> ig = oracle_ig(f);
    const std::vector<double> got = information_gain(f);
    o.check(max_abs_diff(got, ig) <= kIgTieTol, "information_gain vs brute-force MI, max diff " +
                                                    num(max_abs_diff(got, ig), 3));
    for (std::size_t k = 1; k <= f.vocab.size(); ++k) {
      std::size_t ties = 0;
      const BowCorpus sel = info_gain_select(f, k);
      const auto idx = vocab_indices(f, sel);
      const bool ok = std::is_sorted(idx.begin(), idx.end()) && is_oracle_top_k(ig, idx, &ties);
      o.check(ok,
              "6-doc corpus k=" + std::to_string(k) + " selects oracle top-k (" + std::to_string(ties) +
                  " boundary ties)");
    }
  }
  {
    // 500 terms over 80 documents in 4 balanced classes, built from 72
    // random contingency tables. Term t reuses table t % 72 with the classes
    // rotated and the counts rescaled, so equal-gain groups of 6 or 7 terms
    // are interleaved through the vocabulary and the cut at 200 falls
    // inside one of them.
    const std::size_t docs = 80, classes = 4, base = 72, terms = 500;
    Rng rng(700);
    Labels labels(docs);
    for (std::size_t d = 0; d < docs; ++d) labels[d] = d % classes;
    Matrix counts(docs, terms);
    for (std::size_t t = 0; t < base; ++t) {
      double rate[4];
      for (double& r : rate) r = rng.uniform(0.0, 1.0) * rng.uniform(0.0, 1.0);
      for (std::size_t d = 0; d < docs; ++d)
        if (rng.uniform(0.0, 1.0) < rate[labels[d]]) counts(d, t) = 1.0 + std::floor(rng.uniform(0.0, 3.0));
    }
    for (std::size_t t = base; t < terms; ++t) {
      const std::size_t src = t % base;
      const std::size_t shift = rng.next_u64() % classes;  // class c takes class (c + shift)'s pattern
      for (std::size_t d = 0; d < docs; ++d) {
        const std::size_t c = labels[d];
        const std::size_t from_doc = d - c + (c + shift) % classes;  // same slot in the other class
        counts(d, t) = counts(from_doc, src) * (1.0 + static_cast<double>(d % 2));
      }
    }
    const BowCorpus c = make_corpus(counts, labels, classes);
    const std::vector<double> ig = oracle_ig(c);
    const BowCorpus sel = info_gain_select(c, 200);
    const auto idx = vocab_indices(c, sel);
    std::size_t ties = 0;
    const bool top = is_oracle_top_k(ig, idx, &ties);
    o.check(sel.vocab.size() == 200 && std::is_sorted(idx.begin(), idx.end()) && top,
            "500-term corpus k=200 selects the oracle top-200, ties by vocabulary order (" + std::to_string(ties) +
                " tied pairs across the cut)");
  }
  return o;
}

// ---------------------------------------------------------------------------
// 8. Exports

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) out.push_back(item);
  return out;
}

std::uint8_t oracle_gray(double w) {
  const double c = std::min(1.0, std::max(-1.0, w));
  return static_cast<std::uint8_t>(std::min(255.0, std::floor((c + 1.0) * 127.5)));
}

std::map<std::string, std::vector<char>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<char>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome criterion_8() {
  Outcome o;
  {
    const std::vector<Hyperparams> settings = default_decay_settings();
    const std::string csv = decay_curves_csv(settings, -1.0, 1.0, 401);
    const auto lines = split(csv, '\n');
    std::size_t rows = 0, mismatches = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto cells = split(lines[i], ',');
      if (cells.size() != 1 + 2 * settings.size()) {
        ++mismatches;
        continue;
      }
      const double w = std::stod(cells[0]);
      for (std::size_t k = 0; k < settings.size(); ++k) {
        if (std::stod(cells[1 + k]) != penalty(w, settings[k])) ++mismatches;
        if (std::stod(cells[1 + settings.size() + k]) != penalty_grad(w, settings[k])) ++mismatches;
      }
      ++rows;
    }
    o.check(rows == 401 && mismatches == 0, "decay CSV: " + std::to_string(rows) + " rows x " +
                                                std::to_string(2 * settings.size()) + " curves, " +
                                                std::to_string(mismatches) + " values differ from penalty()/penalty_grad()");
  }
  {
    Rng rng(800);
    const Matrix w = rng_uniform(rng, -1.5, 1.5, 10, 784);
    const fs::path file = fs::temp_directory_path() / "ncsae_acceptance_rf.pgm";
    for (const bool normalize : {false, true}) {
      export_receptive_fields(w, 28, 28, 4, file, normalize);
      const GrayImage img = read_pgm(file);
      double scale = 1.0;
      if (normalize) {
        double m = 0;
        for (double v : w.data()) m = std::max(m, std::abs(v));
        scale = m;
      }
      std::size_t bad = 0;
      const bool shape_ok = img.width == 4 * 28 + 3 && img.height == 3 * 28 + 2;
      if (shape_ok) {
        for (std::size_t y = 0; y < img.height; ++y)
          for (std::size_t x = 0; x < img.width; ++x) {
            const std::size_t tx = x / 29, ty = y / 29, px = x % 29, py = y % 29;
            const std::size_t unit = ty * 4 + tx;
            std::uint8_t want = 0;
            if (px < 28 && py < 28 && unit < 10) want = oracle_gray(w(unit, py * 28 + px) / scale);
            if (img.at(x, y) != want) ++bad;
          }
      }
      o.check(shape_ok && bad == 0, std::string("receptive-field PGM") + (normalize ? " (normalized)" : "") + " " +
                                        std::to_string(img.width) + "x" + std::to_string(img.height) +
                                        " reads back with " + std::to_string(bad) + " pixels off the quantized weights");
    }
    fs::remove(file);
  }
  {
    const fs::path root = fs::temp_directory_path() / "ncsae_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path data = mnist_dir();
    const fs::path cfg = root / "run.json";
    std::ofstream(cfg) << "{\n"
                       << "  \"data.train_images\": \"" << (data / "train-images-idx3-ubyte").string() << "\",\n"
                       << "  \"data.train_labels\": \"" << (data / "train-labels-idx1-ubyte").string() << "\",\n"
                       << "  \"data.test_images\": \"" << (data / "t10k-images-idx3-ubyte").string() << "\",\n"
                       << "  \"data.test_labels\": \"" << (data / "t10k-labels-idx1-ubyte").string() << "\",\n"
                       << "  \"data.keep\": [1, 2, 6],\n"
                       << "  \"layers\": [10, 10],\n"
                       << "  \"pretrain.epochs\": 15,\n"
                       << "  \"softmax.epochs\": 15,\n"
                       << "  \"finetune.epochs\": 15\n"
                       << "}\n";
    const fs::path out = root / "out";
    const std::vector<std::vector<std::string>> commands = {
        {"pretrain", "--config", cfg.string(), "--out", (out / "pre").string(), "--seed", "7"},
        {"finetune", "--config", cfg.string(), "--pretrained", (out / "pre").string(), "--out", (out / "ft").string(),
         "--seed", "7"},
        {"eval", "--config", cfg.string(), "--model", (out / "ft" / "network.params").string(), "--out",
         (out / "ev").string()},
        {"export", "rf", "--params", (out / "pre" / "layer1.params").string(), "--out", (out / "rf.pgm").string()},
        {"export", "hist", "--params", (out / "ft" / "network.params").string(), "--out", (out / "hist.csv").string()},
        {"export", "decay", "--out", (out / "decay.csv").string()},
    };
    auto run_all = [&] {
      int worst = 0;
      for (const auto& args : commands) {
        std::vector<const char*> argv{"ncsae"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream sink;
        worst = std::max(worst, cli::run(static_cast<int>(argv.size()), argv.data(), sink, sink));
      }
      return worst;
    };
    const int first = run_all();
    const auto a = snapshot(out);
    const int second = run_all();
    const auto b = snapshot(out);
    o.check(first == 0 && second == 0 && !a.empty() && a == b,
            "pretrain, finetune, eval and export rerun with the same config and seed: " + std::to_string(a.size()) +
                " files byte-identical");
    fs::remove_all(root);
  }
  return o;
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient exactness", criterion_1},
    {2, "penalty oracle values", criterion_2},
    {3, "penalty smoothness at 0 and -kappa", criterion_3},
    {4, "nonnegativity effect on MNIST {1,2,6}", criterion_4},
    {5, "end-to-end classification 784-10-10-3", criterion_5},
    {6, "reductions to SAE and plain AE", criterion_6},
    {7, "data pipeline", criterion_7},
    {8, "exports and determinism", criterion_8},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  bool all_pass = true;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.title << "  ("
              << num(elapsed, 3) << " s)\n";
    for (const std::string& d : o.details) std::cout << "    " << d << "\n";
    std::cout.flush();
  }
  return all_pass ? 0 : 1;
}
