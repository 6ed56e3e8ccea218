#include "ncsae/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncsae/error.hpp"

namespace ncsae {

std::size_t StackedNetwork::n_input() const {
  return encoders.empty() ? 0 : encoders.front().n_input();
}

void StackedNetwork::check_shapes() const {
  if (encoders.empty()) throw ShapeError("network has no encoder layers");
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    encoders[i].check_shapes();
    if (i > 0 && encoders[i].n_input() != encoders[i - 1].n_hidden()) {
      throw ShapeError("encoder " + std::to_string(i) + " expects " +
                       std::to_string(encoders[i].n_input()) + " inputs but layer " +
                       std::to_string(i - 1) + " produces " +
                       std::to_string(encoders[i - 1].n_hidden()));
    }
  }
  if (has_head()) {
    if (softmax_w.cols() != encoders.back().n_hidden() || softmax_b.size() != softmax_w.rows()) {
      throw ShapeError("softmax head " + softmax_w.shape_string() + " (bias " +
                       std::to_string(softmax_b.size()) + ") does not fit last hidden size " +
                       std::to_string(encoders.back().n_hidden()));
    }
  }
}

Matrix StackedNetwork::features(const Matrix& x) const {
  check_shapes();
  if (x.cols() != n_input()) {
    throw ShapeError("input " + x.shape_string() + " does not match network input size " +
                     std::to_string(n_input()));
  }
  Matrix a = x;
  for (const auto& enc : encoders) a = encode(enc.w1, enc.bx, a);
  return a;
}

namespace {

void check_unit_interval(const Matrix& x, const char* what) {
  if (x.rows() == 0) throw std::invalid_argument(std::string(what) + ": no rows");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!(r[j] >= 0.0 && r[j] <= 1.0)) {
        throw std::invalid_argument(std::string(what) + ": entry (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") = " + std::to_string(r[j]) +
                                    " outside [0,1]");
      }
    }
  }
}

void guard(double total, std::size_t epoch) {
  if (!std::isfinite(total) || total > kDivergenceLimit) {
    throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                       ": loss = " + std::to_string(total));
  }
}

void step(Matrix& w, const Matrix& g, double rate) {
  auto dst = w.data();
  const auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= rate * src[i];
}

void step(Vector& b, const Vector& g, double rate) {
  for (std::size_t i = 0; i < b.size(); ++i) b[i] -= rate * g[i];
}

void check_labels(const Labels& labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match " +
                     std::to_string(rows) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
}

Matrix logits(const Matrix& w, std::span<const double> b, const Matrix& features) {
  if (features.cols() != w.cols()) {
    throw ShapeError("softmax: features " + features.shape_string() + " vs weights " +
                     w.shape_string());
  }
  Matrix z = matmul_bt(features, w);
  add_row_vector(z, b);
  return z;
}

double mean_cross_entropy(const Matrix& z, const Labels& labels) {
  double total = 0.0;
  for (std::size_t k = 0; k < z.rows(); ++k) {
    const auto r = z.row(k);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - mx);
    total += mx + std::log(s) - r[labels[k]];
  }
  return total / static_cast<double>(z.rows());
}

// (softmax(z) - onehot(labels)) / m
Matrix logit_delta(const Matrix& probs, const Labels& labels) {
  Matrix d = probs;
  const double inv_m = 1.0 / static_cast<double>(d.rows());
  for (std::size_t k = 0; k < d.rows(); ++k) {
    auto r = d.row(k);
    r[labels[k]] -= 1.0;
    for (double& v : r) v *= inv_m;
  }
  return d;
}

std::vector<Matrix> forward_activations(const StackedNetwork& net, const Matrix& x) {
  std::vector<Matrix> acts;
  acts.reserve(net.encoders.size() + 1);
  acts.push_back(x);
  for (const auto& enc : net.encoders) acts.push_back(encode(enc.w1, enc.bx, acts.back()));
  return acts;
}

SupervisedLoss network_loss(const StackedNetwork& net, const Matrix& z, const Labels& labels,
                            const Hyperparams& hp) {
  SupervisedLoss loss;
  loss.cross_entropy = mean_cross_entropy(z, labels);
  for (const auto& enc : net.encoders) loss.penalty += penalty_sum(enc.w1, hp);
  loss.penalty += penalty_sum(net.softmax_w, hp);
  loss.total = loss.cross_entropy + loss.penalty;
  return loss;
}

void check_supervised(const StackedNetwork& net, const Matrix& x, const Labels& labels) {
  net.check_shapes();
  if (!net.has_head()) throw ShapeError("network has no softmax head");
  if (x.cols() != net.n_input()) {
    throw ShapeError("input " + x.shape_string() + " does not match network input size " +
                     std::to_string(net.n_input()));
  }
  if (x.rows() == 0) throw std::invalid_argument("empty batch");
  check_labels(labels, x.rows(), net.n_classes());
}

struct NetworkEvaluation {
  SupervisedRecord record;
  NetworkGrads grads;
};

NetworkEvaluation network_loss_and_grad(const StackedNetwork& net, const Matrix& x,
                                        const Labels& labels, const Hyperparams& hp) {
  const auto acts = forward_activations(net, x);
  const Matrix z = logits(net.softmax_w, net.softmax_b, acts.back());
  const Matrix probs = softmax_rows(z);

  NetworkEvaluation out;
  out.record.loss = network_loss(net, z, labels, hp);
  out.record.accuracy = accuracy(argmax_rows(probs), labels);

  const Matrix dz = logit_delta(probs, labels);
  out.grads.dsoftmax_w = matmul_at(dz, acts.back());
  out.grads.dsoftmax_b = column_sums(dz);
  add_penalty_grad(out.grads.dsoftmax_w, net.softmax_w, hp);

  const std::size_t layers = net.encoders.size();
  out.grads.dw.resize(layers);
  out.grads.db.resize(layers);
  Matrix upstream = matmul(dz, net.softmax_w);
  for (std::size_t i = layers; i-- > 0;) {
    const Matrix& a = acts[i + 1];
    auto d = upstream.data();
    const auto av = a.data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] *= av[j] * (1.0 - av[j]);
    out.grads.dw[i] = matmul_at(upstream, acts[i]);
    out.grads.db[i] = column_sums(upstream);
    add_penalty_grad(out.grads.dw[i], net.encoders[i].w1, hp);
    if (i > 0) upstream = matmul(upstream, net.encoders[i].w1);
  }
  return out;
}

}  // namespace

AeTrainResult train_ae(const Matrix& x, std::size_t n_hidden, const Hyperparams& hp,
                       const AeEpochObserver& observer) {
  hp.validate();
  check_unit_interval(x, "train_ae");
  if (n_hidden == 0) throw std::invalid_argument("train_ae: n_hidden must be positive");

  Rng rng(hp.seed);
  AeTrainResult result;
  result.params = init_ae_params(x.cols(), n_hidden, rng);
  auto& p = result.params;
  result.report.ae_epochs.reserve(hp.epochs);

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const AeEvaluation eval = ae_loss_and_grad(p, x, hp);
    guard(eval.loss.total, epoch);
    result.report.ae_epochs.push_back(eval.loss);
    if (observer) observer(epoch, p, eval.loss);
    step(p.w1, eval.grads.dw1, hp.learning_rate);
    step(p.bx, eval.grads.dbx, hp.learning_rate);
    step(p.w2, eval.grads.dw2, hp.learning_rate);
    step(p.bh, eval.grads.dbh, hp.learning_rate);
    ++result.report.epochs_run;
  }
  return result;
}

StackResult stack_pretrain(const Matrix& x, std::span<const std::size_t> layer_sizes,
                           const Hyperparams& hp) {
  if (layer_sizes.empty()) throw std::invalid_argument("stack_pretrain: no layer sizes");
  StackResult result;
  Matrix input = x;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    Hyperparams layer_hp = hp;
    layer_hp.seed = hp.seed + i;
    AeTrainResult trained;
    try {
      trained = train_ae(input, layer_sizes[i], layer_hp);
    } catch (const NumericError& e) {
      throw NumericError("layer " + std::to_string(i + 1) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("layer " + std::to_string(i + 1) + ": " + e.what());
    }
    if (i + 1 < layer_sizes.size()) input = encode(trained.params.w1, trained.params.bx, input);
    result.network.encoders.push_back(std::move(trained.params));
    result.reports.push_back(std::move(trained.report));
  }
  return result;
}

SupervisedLoss softmax_loss(const Matrix& w, std::span<const double> b,
                            const Matrix& features, const Labels& labels,
                            const Hyperparams& hp) {
  check_labels(labels, features.rows(), w.rows());
  if (features.rows() == 0) throw std::invalid_argument("softmax_loss: empty batch");
  SupervisedLoss loss;
  loss.cross_entropy = mean_cross_entropy(logits(w, b, features), labels);
  loss.penalty = penalty_sum(w, hp);
  loss.total = loss.cross_entropy + loss.penalty;
  return loss;
}

SoftmaxGrads softmax_grad(const Matrix& w, std::span<const double> b,
                          const Matrix& features, const Labels& labels,
                          const Hyperparams& hp) {
  check_labels(labels, features.rows(), w.rows());
  if (features.rows() == 0) throw std::invalid_argument("softmax_grad: empty batch");
  const Matrix dz = logit_delta(softmax_rows(logits(w, b, features)), labels);
  SoftmaxGrads g;
  g.dw = matmul_at(dz, features);
  g.db = column_sums(dz);
  add_penalty_grad(g.dw, w, hp);
  return g;
}

SoftmaxResult train_softmax(const Matrix& features, const Labels& labels, std::size_t classes,
                            const Hyperparams& hp) {
  hp.validate();
  if (classes == 0) throw std::invalid_argument("train_softmax: classes must be positive");
  if (features.rows() == 0) throw std::invalid_argument("train_softmax: no rows");
  check_labels(labels, features.rows(), classes);

  SoftmaxResult result;
  result.w = Matrix(classes, features.cols());
  result.b.assign(classes, 0.0);

  std::vector<std::size_t> counts(classes, 0);
  for (auto l : labels) ++counts[l];
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0)
      result.report.warnings.push_back("class " + std::to_string(c) + " has no examples");
  }

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const Matrix z = logits(result.w, result.b, features);
    const Matrix probs = softmax_rows(z);
    SupervisedRecord rec;
    rec.loss.cross_entropy = mean_cross_entropy(z, labels);
    rec.loss.penalty = penalty_sum(result.w, hp);
    rec.loss.total = rec.loss.cross_entropy + rec.loss.penalty;
    rec.accuracy = accuracy(argmax_rows(probs), labels);
    guard(rec.loss.total, epoch);
    result.report.supervised_epochs.push_back(rec);

    const Matrix dz = logit_delta(probs, labels);
    Matrix dw = matmul_at(dz, features);
    add_penalty_grad(dw, result.w, hp);
    step(result.w, dw, hp.learning_rate);
    step(result.b, column_sums(dz), hp.learning_rate);
    ++result.report.epochs_run;
  }
  return result;
}

SupervisedLoss finetune_loss(const StackedNetwork& net, const Matrix& x, const Labels& labels,
                             const Hyperparams& hp) {
  check_supervised(net, x, labels);
  const auto acts = forward_activations(net, x);
  return network_loss(net, logits(net.softmax_w, net.softmax_b, acts.back()), labels, hp);
}

NetworkGrads finetune_grad(const StackedNetwork& net, const Matrix& x, const Labels& labels,
                           const Hyperparams& hp) {
  check_supervised(net, x, labels);
  return network_loss_and_grad(net, x, labels, hp).grads;
}

FinetuneResult finetune(const StackedNetwork& net, const Matrix& x, const Labels& labels,
                        const Hyperparams& hp) {
  hp.validate();
  check_supervised(net, x, labels);
  FinetuneResult result{net, {}};
  auto& n = result.network;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto eval = network_loss_and_grad(n, x, labels, hp);
    guard(eval.record.loss.total, epoch);
    result.report.supervised_epochs.push_back(eval.record);
    for (std::size_t i = 0; i < n.encoders.size(); ++i) {
      step(n.encoders[i].w1, eval.grads.dw[i], hp.learning_rate);
      step(n.encoders[i].bx, eval.grads.db[i], hp.learning_rate);
    }
    step(n.softmax_w, eval.grads.dsoftmax_w, hp.learning_rate);
    step(n.softmax_b, eval.grads.dsoftmax_b, hp.learning_rate);
    ++result.report.epochs_run;
  }
  return result;
}

Prediction predict(const StackedNetwork& net, const Matrix& x) {
  if (!net.has_head()) throw ShapeError("network has no softmax head");
  Prediction out;
  out.probs = softmax_rows(logits(net.softmax_w, net.softmax_b, net.features(x)));
  out.labels = argmax_rows(out.probs);
  return out;
}

double accuracy(const Labels& predicted, const Labels& expected) {
  if (predicted.size() != expected.size()) {
    throw ShapeError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(expected.size()) + " labels");
  }
  if (expected.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) hits += predicted[i] == expected[i];
  return static_cast<double>(hits) / static_cast<double>(expected.size());
}

double evaluate_accuracy(const StackedNetwork& net, const Matrix& x, const Labels& labels) {
  if (labels.size() != x.rows()) {
    throw ShapeError("evaluate_accuracy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(x.rows()) + " rows");
  }
  return accuracy(predict(net, x).labels, labels);
}

}  // namespace ncsae
