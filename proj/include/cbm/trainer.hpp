#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "cbm/batchopt.hpp"
#include "cbm/cliques.hpp"
#include "cbm/types.hpp"

namespace cbm {

// One-hidden-layer rectifier network; the hidden activations are the learned
// representation, the K-way head is only the surrogate clique classifier.
struct EmbeddingModel {
  Eigen::MatrixXd w1;  // h x d
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd w2;  // K x h
  Eigen::VectorXd b2;  // K

  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index hidden_dim() const { return w1.rows(); }
  Eigen::Index n_classes() const { return w2.rows(); }

  static EmbeddingModel zeros(int d, int h, int k);
  // Gaussian weights (std 0.01), zero biases.
  static EmbeddingModel init(int d, int h, int k, std::uint64_t seed);
};

struct ModelGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

// Momentum buffers, same shapes as the parameters.
struct Velocity {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static Velocity zeros_like(const EmbeddingModel& m);
};

struct TrainParams {
  int hidden_dim = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int minibatch = 32;
  int iterations = 5000;
  // Gaussian feature jitter; negative = auto (0.01 * pooled feature std).
  double jitter_sigma = -1.0;
  std::uint64_t seed = 42;

  void validate() const;  // throws InvalidSpec
};

struct LossPoint {
  int iter = 0;
  int batch_id = 0;
  double loss = 0.0;
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<LossPoint> curve;
};

// Mean cross-entropy of softmax(logits) plus (lambda/2)(|W1|_F^2 + |W2|_F^2);
// no decay on biases. Gradients by backprop.
std::pair<double, ModelGradients> softmax_loss(const EmbeddingModel& model,
                                               const Eigen::MatrixXd& inputs,
                                               const std::vector<int>& labels,
                                               double weight_decay);

// V <- mu V - alpha g;  W <- W + V.
void sgd_step(EmbeddingModel& model, Velocity& v, const ModelGradients& g, double alpha,
              double mu);

// Per-iteration observer (batch row, sampled indices, labels); test hook.
using MinibatchObserver =
    std::function<void(int batch, const std::vector<int>& samples, const std::vector<int>& labels)>;

// Each iteration draws one batch row uniformly, then `minibatch` member
// samples uniformly with replacement from the row's clique union. Samples in
// several cliques of the row take the label of the clique with the highest
// intra similarity (tie: lowest clique index).
TrainResult train(const EmbeddingModel& model, const FeatureMatrix& features,
                  const CliqueAssignment& c, const BatchAssignment& x,
                  const TrainParams& params, const MinibatchObserver& observer = {});

// Hidden activations (post-rectifier) per sample, N x h.
FeatureMatrix embed(const EmbeddingModel& model, const FeatureMatrix& features);

// Magic "CBM2", u64 dims (d, h, K), then W1, b1, W2, b2 row-major f64, all LE.
void save_model(const EmbeddingModel& m, const std::filesystem::path& path);
EmbeddingModel load_model(const std::filesystem::path& path);

// CSV: iter,batch_id,loss
void save_loss_curve(const std::vector<LossPoint>& curve, const std::filesystem::path& path);

}  // namespace cbm
