#include <doctest.h>

#include <cmath>
#include <random>

#include "cbm/error.hpp"
#include "cbm/io.hpp"
#include "cbm/trainer.hpp"
#include "test_util.hpp"

using namespace cbm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

EmbeddingModel random_model(int d, int h, int k, std::uint64_t seed) {
  EmbeddingModel m = EmbeddingModel::zeros(d, h, k);
  m.w1 = random_matrix(h, d, seed, -0.5, 0.5);
  m.b1 = random_matrix(h, 1, seed + 1, -0.2, 0.2).col(0);
  m.w2 = random_matrix(k, h, seed + 2, -0.5, 0.5);
  m.b2 = random_matrix(k, 1, seed + 3, -0.2, 0.2).col(0);
  return m;
}

// Two tight groups far apart, one clique each, both cliques in one batch.
struct SeparableFixture {
  FeatureMatrix features;
  CliqueAssignment cliques;
  BatchAssignment batch;

  SeparableFixture() {
    features.values.resize(10, 2);
    for (int i = 0; i < 5; ++i) features.values.row(i) << 0.0, 0.1 * i;
    for (int i = 5; i < 10; ++i) features.values.row(i) << 5.0, 5.0 + 0.1 * (i - 5);
    cliques.n = 10;
    cliques.cliques = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
    cliques.seed_of = {0, 5};
    cliques.intra = {1.0, 1.0};
    batch.x = MatrixXd::Ones(1, 2);
    batch.r = 2;
    batch.rounded = true;
  }
};

}  // namespace

TEST_CASE("softmax loss of the zero model is ln K") {
  const EmbeddingModel m = EmbeddingModel::zeros(3, 4, 5);
  const MatrixXd inputs = random_matrix(6, 3, 2);
  const std::vector<int> labels{0, 1, 2, 3, 4, 0};
  const auto [loss, grads] = softmax_loss(m, inputs, labels, 0.0);
  CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(grads.w1.isZero());  // rectifier kills the zero activations
}

TEST_CASE("duplicating a sample does not change the mean loss") {
  const EmbeddingModel m = random_model(3, 4, 3, 5);
  MatrixXd one = random_matrix(1, 3, 9);
  MatrixXd two(2, 3);
  two << one, one;
  const auto [l1, g1] = softmax_loss(m, one, {2}, 0.0);
  const auto [l2, g2] = softmax_loss(m, two, {2, 2}, 0.0);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
}

TEST_CASE("softmax gradients match central finite differences") {
  std::mt19937_64 gen(3);
  for (int config = 0; config < 10; ++config) {
    const int d = 2 + config % 3, h = 3 + config % 2, k = 2 + config % 4, m = 4;
    EmbeddingModel model = random_model(d, h, k, gen());
    const MatrixXd inputs = random_matrix(m, d, gen());
    std::vector<int> labels(m);
    for (auto& l : labels) l = static_cast<int>(gen() % k);
    const double decay = config % 2 ? 5e-4 : 0.0;
    const auto [loss, grads] = softmax_loss(model, inputs, labels, decay);

    const double h_step = 1e-6;
    auto check_block = [&](MatrixXd& param, const MatrixXd& grad) {
      for (int i = 0; i < param.rows(); ++i)
        for (int j = 0; j < param.cols(); ++j) {
          const double orig = param(i, j);
          param(i, j) = orig + h_step;
          const double lp = softmax_loss(model, inputs, labels, decay).first;
          param(i, j) = orig - h_step;
          const double lm = softmax_loss(model, inputs, labels, decay).first;
          param(i, j) = orig;
          const double fd = (lp - lm) / (2.0 * h_step);
          const double scale = std::max({1e-4, std::abs(fd), std::abs(grad(i, j))});
          CHECK(std::abs(grad(i, j) - fd) / scale < 1e-5);
        }
    };
    auto check_bias = [&](VectorXd& bias, const VectorXd& grad) {
      for (int i = 0; i < bias.size(); ++i) {
        const double orig = bias(i);
        bias(i) = orig + h_step;
        const double lp = softmax_loss(model, inputs, labels, decay).first;
        bias(i) = orig - h_step;
        const double lm = softmax_loss(model, inputs, labels, decay).first;
        bias(i) = orig;
        const double fd = (lp - lm) / (2.0 * h_step);
        const double scale = std::max({1e-4, std::abs(fd), std::abs(grad(i))});
        CHECK(std::abs(grad(i) - fd) / scale < 1e-5);
      }
    };
    check_block(model.w1, grads.w1);
    check_block(model.w2, grads.w2);
    check_bias(model.b1, grads.b1);
    check_bias(model.b2, grads.b2);
  }
}

TEST_CASE("momentum update is the exact two-line rule") {
  EmbeddingModel m = EmbeddingModel::zeros(1, 1, 1);
  Velocity v = Velocity::zeros_like(m);
  ModelGradients g;
  g.w1 = MatrixXd::Ones(1, 1);
  g.b1 = VectorXd::Ones(1);
  g.w2 = MatrixXd::Ones(1, 1);
  g.b2 = VectorXd::Ones(1);

  sgd_step(m, v, g, 0.1, 0.9);
  const double v1 = 0.9 * 0.0 - 0.1 * 1.0;
  const double w1 = 0.0 + v1;
  CHECK(m.w1(0, 0) == w1);  // bitwise
  CHECK(v.w1(0, 0) == v1);
  CHECK(m.w1(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));

  sgd_step(m, v, g, 0.1, 0.9);
  const double v2 = 0.9 * v1 - 0.1 * 1.0;
  const double w2 = w1 + v2;
  CHECK(v.w1(0, 0) == v2);
  CHECK(m.w1(0, 0) == w2);
  CHECK(v.w1(0, 0) == doctest::Approx(-0.19).epsilon(1e-12));
  CHECK(m.w1(0, 0) == doctest::Approx(-0.29).epsilon(1e-12));
  CHECK(m.b1(0) == m.w1(0, 0));  // identical update on every block
}

TEST_CASE("zero momentum reduces to plain gradient descent") {
  EmbeddingModel m = EmbeddingModel::zeros(1, 1, 1);
  m.w1(0, 0) = 2.0;
  Velocity v = Velocity::zeros_like(m);
  ModelGradients g;
  g.w1 = MatrixXd::Constant(1, 1, 0.5);
  g.b1 = VectorXd::Zero(1);
  g.w2 = MatrixXd::Zero(1, 1);
  g.b2 = VectorXd::Zero(1);
  sgd_step(m, v, g, 0.2, 0.0);
  CHECK(m.w1(0, 0) == 2.0 - 0.2 * 0.5);
}

TEST_CASE("gradient steps on a quadratic contract toward zero") {
  for (double alpha : {0.5, 1.5, 1.9}) {
    EmbeddingModel m = EmbeddingModel::zeros(1, 1, 1);
    m.w1(0, 0) = 3.0;
    Velocity v = Velocity::zeros_like(m);
    double prev = std::abs(m.w1(0, 0));
    for (int t = 0; t < 40; ++t) {
      ModelGradients g;  // loss w^2/2 has gradient w
      g.w1 = m.w1;
      g.b1 = VectorXd::Zero(1);
      g.w2 = MatrixXd::Zero(1, 1);
      g.b2 = VectorXd::Zero(1);
      sgd_step(m, v, g, alpha, 0.0);
      const double cur = std::abs(m.w1(0, 0));
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("training separates two well-separated cliques") {
  const SeparableFixture fx;
  TrainParams params;
  params.hidden_dim = 8;
  params.learning_rate = 0.1;
  params.minibatch = 8;
  params.iterations = 500;
  params.weight_decay = 0.0;
  params.seed = 7;
  const EmbeddingModel init = EmbeddingModel::init(2, 8, 2, 99);
  const TrainResult result = train(init, fx.features, fx.cliques, fx.batch, params);

  int correct = 0;
  for (int i = 0; i < 10; ++i) {
    const VectorXd hidden =
        (result.model.w1 * fx.features.values.row(i).transpose() + result.model.b1).cwiseMax(0.0);
    const VectorXd logits = result.model.w2 * hidden + result.model.b2;
    int arg = 0;
    logits.maxCoeff(&arg);
    correct += arg == (i < 5 ? 0 : 1);
  }
  CHECK(correct == 10);

  // the loss curve eventually drops well below chance level ln(2)
  double tail_min = std::numeric_limits<double>::infinity();
  for (size_t i = result.curve.size() - 50; i < result.curve.size(); ++i)
    tail_min = std::min(tail_min, result.curve[i].loss);
  CHECK(tail_min < std::log(2.0) / 10.0);
}

TEST_CASE("zero iterations leave the model untouched") {
  const SeparableFixture fx;
  TrainParams params;
  params.hidden_dim = 4;
  params.iterations = 0;
  const EmbeddingModel init = EmbeddingModel::init(2, 4, 2, 5);
  const TrainResult result = train(init, fx.features, fx.cliques, fx.batch, params);
  CHECK(result.model.w1 == init.w1);
  CHECK(result.model.w2 == init.w2);
  CHECK(result.curve.empty());
}

TEST_CASE("training is bitwise deterministic under a fixed seed") {
  const SeparableFixture fx;
  TrainParams params;
  params.hidden_dim = 6;
  params.iterations = 120;
  params.seed = 31;
  const EmbeddingModel init = EmbeddingModel::init(2, 6, 2, 12);
  const TrainResult a = train(init, fx.features, fx.cliques, fx.batch, params);
  const TrainResult b = train(init, fx.features, fx.cliques, fx.batch, params);
  REQUIRE(a.curve.size() == b.curve.size());
  for (size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].loss == b.curve[i].loss);
  CHECK(a.model.w1 == b.model.w1);
  CHECK(a.model.b2 == b.model.b2);
}

TEST_CASE("minibatches never mix cliques from different batch rows") {
  // Three cliques; two batch rows pairing {0,1} and {0,2}.
  FeatureMatrix f;
  f.values = random_matrix(9, 3, 77);
  CliqueAssignment c;
  c.n = 9;
  c.cliques = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  c.seed_of = {0, 3, 6};
  c.intra = {0.5, 0.5, 0.5};
  BatchAssignment x;
  x.x.resize(2, 3);
  x.x << 1, 1, 0,  //
      1, 0, 1;
  x.r = 2;
  x.rounded = true;

  TrainParams params;
  params.hidden_dim = 4;
  params.iterations = 60;
  params.minibatch = 6;
  params.seed = 3;
  const EmbeddingModel init = EmbeddingModel::init(3, 4, 3, 8);

  int calls = 0;
  const auto observer = [&](int batch, const std::vector<int>& samples,
                            const std::vector<int>& labels) {
    ++calls;
    REQUIRE(samples.size() == labels.size());
    for (size_t i = 0; i < samples.size(); ++i) {
      // every drawn sample belongs to the labelled clique...
      const auto& members = c.cliques[labels[i]];
      CHECK(std::find(members.begin(), members.end(), samples[i]) != members.end());
      // ...and that clique sits in the selected batch row
      CHECK(x.x(batch, labels[i]) == 1.0);
    }
  };
  train(init, f, c, x, params, observer);
  CHECK(calls == 60);
}

TEST_CASE("overlapping cliques label by the higher intra similarity") {
  FeatureMatrix f;
  f.values = random_matrix(4, 2, 13);
  CliqueAssignment c;
  c.n = 4;
  c.cliques = {{0, 1}, {1, 2, 3}};  // sample 1 sits in both
  c.seed_of = {0, 1};
  c.intra = {0.4, 0.9};
  BatchAssignment x;
  x.x = MatrixXd::Ones(1, 2);
  x.r = 2;
  x.rounded = true;

  TrainParams params;
  params.hidden_dim = 3;
  params.iterations = 40;
  params.minibatch = 8;
  params.seed = 5;
  const auto observer = [&](int, const std::vector<int>& samples,
                            const std::vector<int>& labels) {
    for (size_t i = 0; i < samples.size(); ++i)
      if (samples[i] == 1) CHECK(labels[i] == 1);  // intra 0.9 beats 0.4
  };
  train(EmbeddingModel::init(2, 3, 2, 2), f, c, x, params, observer);
}

TEST_CASE("embed returns rectified hidden activations") {
  FeatureMatrix f;
  f.values.resize(2, 3);
  f.values << 1, 2, 3, 4, 5, 6;

  const EmbeddingModel zero = EmbeddingModel::zeros(3, 4, 2);
  CHECK(embed(zero, f).values.isZero());

  EmbeddingModel ident = EmbeddingModel::zeros(3, 3, 2);
  ident.w1 = MatrixXd::Identity(3, 3);
  CHECK(embed(ident, f).values == f.values);  // nonnegative inputs pass through

  const EmbeddingModel m = random_model(3, 5, 2, 55);
  const FeatureMatrix e = embed(m, f);
  for (int i = 0; i < 2; ++i)
    for (int h = 0; h < 5; ++h) {
      double z = m.b1(h);
      for (int j = 0; j < 3; ++j) z += m.w1(h, j) * f.values(i, j);
      CHECK(std::abs(e.values(i, h) - std::max(0.0, z)) <= 1e-12);
    }
}

TEST_CASE("model container round trips bit exactly") {
  const EmbeddingModel m = random_model(4, 6, 3, 91);
  TempDir dir("model");
  save_model(m, dir / "m.bin");
  const EmbeddingModel back = load_model(dir / "m.bin");
  CHECK(back.w1 == m.w1);
  CHECK(back.b1 == m.b1);
  CHECK(back.w2 == m.w2);
  CHECK(back.b2 == m.b2);

  write_file(dir / "junk.bin", "CBMX");
  CHECK_THROWS_AS(load_model(dir / "junk.bin"), FormatError);
}

TEST_CASE("loss curve CSV") {
  TempDir dir("loss");
  save_loss_curve({{1, 0, 0.7}, {2, 1, 0.35}}, dir / "loss.csv");
  const std::string text = read_file(dir / "loss.csv");
  CHECK(text.find("iter,batch_id,loss") == 0);
  CHECK(text.find("2,1," + format_f64(0.35)) != std::string::npos);
}
