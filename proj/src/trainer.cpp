#include "cbm/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "cbm/error.hpp"
#include "cbm/io.hpp"
#include "cbm/parallel.hpp"
#include "cbm/rng.hpp"

namespace cbm {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void TrainParams::validate() const {
  if (hidden_dim < 1) throw InvalidSpec("hidden_dim must be positive");
  if (!(learning_rate > 0.0)) throw InvalidSpec("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidSpec("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw InvalidSpec("weight decay must be nonnegative");
  if (minibatch < 1) throw InvalidSpec("minibatch must be positive");
  if (iterations < 0) throw InvalidSpec("iterations must be nonnegative");
}

EmbeddingModel EmbeddingModel::zeros(int d, int h, int k) {
  EmbeddingModel m;
  m.w1 = MatrixXd::Zero(h, d);
  m.b1 = VectorXd::Zero(h);
  m.w2 = MatrixXd::Zero(k, h);
  m.b2 = VectorXd::Zero(k);
  return m;
}

EmbeddingModel EmbeddingModel::init(int d, int h, int k, std::uint64_t seed) {
  EmbeddingModel m = zeros(d, h, k);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m.w1.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w1.cols(); ++j) m.w1(i, j) = 0.01 * rng.normal();
  for (Eigen::Index i = 0; i < m.w2.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w2.cols(); ++j) m.w2(i, j) = 0.01 * rng.normal();
  return m;
}

Velocity Velocity::zeros_like(const EmbeddingModel& m) {
  Velocity v;
  v.w1 = MatrixXd::Zero(m.w1.rows(), m.w1.cols());
  v.b1 = VectorXd::Zero(m.b1.size());
  v.w2 = MatrixXd::Zero(m.w2.rows(), m.w2.cols());
  v.b2 = VectorXd::Zero(m.b2.size());
  return v;
}

std::pair<double, ModelGradients> softmax_loss(const EmbeddingModel& model,
                                               const MatrixXd& inputs,
                                               const std::vector<int>& labels,
                                               double weight_decay) {
  const Eigen::Index m = inputs.rows();
  if (m == 0) throw EmptyInput("empty minibatch");
  if (inputs.cols() != model.input_dim()) throw ShapeMismatch("input dim mismatch");
  if (static_cast<Eigen::Index>(labels.size()) != m) throw ShapeMismatch("label count mismatch");
  const Eigen::Index k = model.n_classes();
  for (int y : labels)
    if (y < 0 || y >= k) throw ShapeMismatch("label out of range");

  const MatrixXd z1 = (inputs * model.w1.transpose()).rowwise() + model.b1.transpose();
  const MatrixXd a1 = z1.cwiseMax(0.0);
  const MatrixXd logits = (a1 * model.w2.transpose()).rowwise() + model.b2.transpose();

  // stable softmax + cross-entropy
  MatrixXd probs(m, k);
  double data_loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const RowVectorXd e = (logits.row(i).array() - mx).exp().matrix();
    const double denom = e.sum();
    probs.row(i) = e / denom;
    data_loss += mx + std::log(denom) - logits(i, labels[i]);
  }
  data_loss /= static_cast<double>(m);
  const double reg =
      0.5 * weight_decay * (model.w1.squaredNorm() + model.w2.squaredNorm());

  MatrixXd dlogits = probs;
  for (Eigen::Index i = 0; i < m; ++i) dlogits(i, labels[i]) -= 1.0;
  dlogits /= static_cast<double>(m);

  ModelGradients g;
  g.w2 = dlogits.transpose() * a1 + weight_decay * model.w2;
  g.b2 = dlogits.colwise().sum().transpose();
  const MatrixXd da1 = dlogits * model.w2;
  const MatrixXd dz1 = da1.cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
  g.w1 = dz1.transpose() * inputs + weight_decay * model.w1;
  g.b1 = dz1.colwise().sum().transpose();
  return {data_loss + reg, std::move(g)};
}

void sgd_step(EmbeddingModel& model, Velocity& v, const ModelGradients& g, double alpha,
              double mu) {
  v.w1 = mu * v.w1 - alpha * g.w1;
  v.b1 = mu * v.b1 - alpha * g.b1;
  v.w2 = mu * v.w2 - alpha * g.w2;
  v.b2 = mu * v.b2 - alpha * g.b2;
  model.w1 += v.w1;
  model.b1 += v.b1;
  model.w2 += v.w2;
  model.b2 += v.b2;
}

TrainResult train(const EmbeddingModel& model, const FeatureMatrix& features,
                  const CliqueAssignment& c, const BatchAssignment& x,
                  const TrainParams& params, const MinibatchObserver& observer) {
  params.validate();
  if (!x.rounded) throw InvalidSpec("training needs a rounded batch assignment");
  if (static_cast<int>(x.k()) != c.k()) throw ShapeMismatch("batch/clique count mismatch");
  if (c.n != features.n_samples()) throw ShapeMismatch("clique/sample count mismatch");
  if (model.input_dim() != features.dim()) throw ShapeMismatch("model input dim mismatch");
  if (model.n_classes() != c.k()) throw ShapeMismatch("model class count mismatch");

  // Per batch row: member union and clique labels. A sample in several
  // cliques of the row takes the most compact clique (tie: lowest index).
  const auto rows = x.rows_as_indices();
  std::vector<std::vector<int>> row_samples(rows.size());
  std::vector<std::vector<int>> row_labels(rows.size());
  for (size_t b = 0; b < rows.size(); ++b) {
    std::vector<int> best_clique(c.n, -1);
    for (int clique : rows[b]) {
      for (int s : c.cliques[clique]) {
        int& cur = best_clique[s];
        if (cur < 0) {
          cur = clique;
        } else if (!c.intra.empty() && c.intra[clique] > c.intra[cur]) {
          cur = clique;
        }
      }
    }
    for (int s = 0; s < c.n; ++s)
      if (best_clique[s] >= 0) {
        row_samples[b].push_back(s);
        row_labels[b].push_back(best_clique[s]);
      }
    if (row_samples[b].empty()) throw EmptyBatch("batch row selects no samples");
  }

  double sigma = params.jitter_sigma;
  if (sigma < 0.0) {
    const double mean = features.values.mean();
    sigma = 0.01 * std::sqrt((features.values.array() - mean).square().mean());
  }

  TrainResult result;
  result.model = model;
  Velocity vel = Velocity::zeros_like(result.model);
  Rng rng(params.seed);
  MatrixXd inputs(params.minibatch, features.dim());
  std::vector<int> labels(params.minibatch);
  std::vector<int> picked(params.minibatch);

  for (int t = 1; t <= params.iterations; ++t) {
    const int b = static_cast<int>(rng.uniform_int(rows.size()));
    const auto& pool = row_samples[b];
    for (int i = 0; i < params.minibatch; ++i) {
      const int j = static_cast<int>(rng.uniform_int(pool.size()));
      picked[i] = pool[j];
      labels[i] = row_labels[b][j];
      inputs.row(i) = features.values.row(picked[i]);
    }
    if (sigma > 0.0) {
      for (Eigen::Index i = 0; i < inputs.rows(); ++i)
        for (Eigen::Index j = 0; j < inputs.cols(); ++j) inputs(i, j) += sigma * rng.normal();
    }
    if (observer) observer(b, picked, labels);
    auto [loss, grads] = softmax_loss(result.model, inputs, labels, params.weight_decay);
    sgd_step(result.model, vel, grads, params.learning_rate, params.momentum);
    result.curve.push_back({t, b, loss});
  }
  return result;
}

FeatureMatrix embed(const EmbeddingModel& model, const FeatureMatrix& features) {
  if (model.input_dim() != features.dim()) throw ShapeMismatch("model input dim mismatch");
  FeatureMatrix out;
  out.values.resize(features.n_samples(), model.hidden_dim());
  const Eigen::Index n = features.n_samples();
  parallel_rows(n, [&](long i) {
    out.values.row(i) =
        ((model.w1 * features.values.row(i).transpose() + model.b1).cwiseMax(0.0)).transpose();
  });
  out.ids = features.ids;
  return out;
}

namespace {

void put_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw FormatError("truncated model file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_block(std::ostream& out, const MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      put_u64_le(out, std::bit_cast<std::uint64_t>(m(i, j)));
}

void get_block(std::istream& in, MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = std::bit_cast<double>(get_u64_le(in));
}

}  // namespace

void save_model(const EmbeddingModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("CBM2", 4);
  put_u64_le(out, static_cast<std::uint64_t>(m.input_dim()));
  put_u64_le(out, static_cast<std::uint64_t>(m.hidden_dim()));
  put_u64_le(out, static_cast<std::uint64_t>(m.n_classes()));
  put_block(out, m.w1);
  MatrixXd b1 = m.b1, b2 = m.b2;
  put_block(out, b1);
  put_block(out, m.w2);
  put_block(out, b2);
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "CBM2") throw FormatError("bad model magic");
  const auto d = static_cast<Eigen::Index>(get_u64_le(in));
  const auto h = static_cast<Eigen::Index>(get_u64_le(in));
  const auto k = static_cast<Eigen::Index>(get_u64_le(in));
  if (d < 1 || h < 1 || k < 1 || d > (1 << 24) || h > (1 << 24) || k > (1 << 24))
    throw FormatError("implausible model dimensions");
  EmbeddingModel m = EmbeddingModel::zeros(static_cast<int>(d), static_cast<int>(h),
                                           static_cast<int>(k));
  get_block(in, m.w1);
  MatrixXd b1(h, 1), b2(k, 1);
  get_block(in, b1);
  get_block(in, m.w2);
  get_block(in, b2);
  m.b1 = b1.col(0);
  m.b2 = b2.col(0);
  if (!in) throw FormatError("truncated model file");
  return m;
}

void save_loss_curve(const std::vector<LossPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,batch_id,loss\n";
  for (const auto& p : curve)
    out << p.iter << ',' << p.batch_id << ',' << format_f64(p.loss) << '\n';
}

}  // namespace cbm
