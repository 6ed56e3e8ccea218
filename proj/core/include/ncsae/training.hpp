#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ncsae/autoencoder.hpp"
#include "ncsae/matrix.hpp"

namespace ncsae {

using Labels = std::vector<std::size_t>;

/// Encoder stack with a softmax head. Only w1/bx of each encoder take part in
/// classification; decoders are retained for reconstruction metrics.
struct StackedNetwork {
  std::vector<AeParams> encoders;
  Matrix softmax_w;  // classes x last hidden
  Vector softmax_b;

  bool has_head() const noexcept { return !softmax_w.empty(); }
  std::size_t n_input() const;
  std::size_t n_classes() const noexcept { return softmax_w.rows(); }

  /// Throws ShapeError unless layer sizes chain (and the head, if present,
  /// matches the last encoder).
  void check_shapes() const;

  /// Activations of the last encoder layer.
  Matrix features(const Matrix& x) const;

  friend bool operator==(const StackedNetwork&, const StackedNetwork&) = default;
};

struct SupervisedLoss {
  double cross_entropy = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct SupervisedRecord {
  SupervisedLoss loss;
  double accuracy = 0.0;
};

/// Per-epoch history. Record e describes the parameters that epoch e's
/// gradient step started from. Exactly one of the two record lists is
/// populated, depending on whether the run was unsupervised.
struct TrainReport {
  std::vector<LossBreakdown> ae_epochs;
  std::vector<SupervisedRecord> supervised_epochs;
  std::size_t epochs_run = 0;
  std::vector<std::string> warnings;
};

/// Called once per epoch with the pre-update parameters and their loss.
using AeEpochObserver =
    std::function<void(std::size_t epoch, const AeParams&, const LossBreakdown&)>;

struct AeTrainResult {
  AeParams params;
  TrainReport report;
};

/// Full-batch gradient descent on the constrained autoencoder objective,
/// initialized from hp.seed. Throws NumericError if the loss becomes
/// non-finite or exceeds kDivergenceLimit.
AeTrainResult train_ae(const Matrix& x, std::size_t n_hidden, const Hyperparams& hp,
                       const AeEpochObserver& observer = {});

inline constexpr double kDivergenceLimit = 1e12;

struct StackResult {
  StackedNetwork network;  // no softmax head
  std::vector<TrainReport> reports;
};

/// Greedy layerwise pretraining. Layer i is seeded with hp.seed + i and
/// trained on the hidden activations of layer i-1.
StackResult stack_pretrain(const Matrix& x, std::span<const std::size_t> layer_sizes,
                           const Hyperparams& hp);

// Softmax head.

SupervisedLoss softmax_loss(const Matrix& w, std::span<const double> b,
                            const Matrix& features, const Labels& labels,
                            const Hyperparams& hp);

struct SoftmaxGrads {
  Matrix dw;
  Vector db;
};

SoftmaxGrads softmax_grad(const Matrix& w, std::span<const double> b,
                          const Matrix& features, const Labels& labels,
                          const Hyperparams& hp);

struct SoftmaxResult {
  Matrix w;
  Vector b;
  TrainReport report;
};

/// Mean cross-entropy plus the negative-weight penalty on w, minimized by
/// full-batch gradient descent from a zero start. Classes without examples
/// are reported in report.warnings.
SoftmaxResult train_softmax(const Matrix& features, const Labels& labels, std::size_t classes,
                            const Hyperparams& hp);

// Joint fine-tuning.

struct NetworkGrads {
  std::vector<Matrix> dw;  // per encoder
  std::vector<Vector> db;
  Matrix dsoftmax_w;
  Vector dsoftmax_b;
};

/// Mean cross-entropy of the whole network plus the penalty on every encoder
/// weight matrix and the softmax weights. No sparsity term.
SupervisedLoss finetune_loss(const StackedNetwork& net, const Matrix& x, const Labels& labels,
                             const Hyperparams& hp);
NetworkGrads finetune_grad(const StackedNetwork& net, const Matrix& x, const Labels& labels,
                           const Hyperparams& hp);

struct FinetuneResult {
  StackedNetwork network;
  TrainReport report;
};

FinetuneResult finetune(const StackedNetwork& net, const Matrix& x, const Labels& labels,
                        const Hyperparams& hp);

// Inference.

struct Prediction {
  Matrix probs;
  Labels labels;
};

Prediction predict(const StackedNetwork& net, const Matrix& x);

double evaluate_accuracy(const StackedNetwork& net, const Matrix& x, const Labels& labels);

/// Fraction of positions where predicted == expected.
double accuracy(const Labels& predicted, const Labels& expected);

}  // namespace ncsae
