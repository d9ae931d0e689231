#include <doctest.h>

#include <cmath>

#include "cbm/error.hpp"
#include "cbm/io.hpp"
#include "cbm/synthetic.hpp"
#include "test_util.hpp"

using namespace cbm;

TEST_CASE("csv parse of a 2x2 matrix") {
  TempDir dir("csv");
  write_file(dir / "m.csv", "1,2\n3,4\n");
  const auto m = load_features(dir / "m.csv", FeatureFormat::csv);
  REQUIRE(m.n_samples() == 2);
  REQUIRE(m.dim() == 2);
  CHECK(m.values(0, 0) == 1.0);
  CHECK(m.values(0, 1) == 2.0);
  CHECK(m.values(1, 0) == 3.0);
  CHECK(m.values(1, 1) == 4.0);
}

TEST_CASE("csv header row is skipped when non-numeric") {
  TempDir dir("csvh");
  write_file(dir / "m.csv", "a,b\n1,2\n3,4\n");
  const auto m = load_features(dir / "m.csv", FeatureFormat::csv);
  CHECK(m.n_samples() == 2);
}

TEST_CASE("csv errors") {
  TempDir dir("csverr");
  write_file(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(load_features(dir / "ragged.csv", FeatureFormat::csv), FormatError);

  write_file(dir / "text.csv", "1,2\n3,x\n");
  CHECK_THROWS_AS(load_features(dir / "text.csv", FeatureFormat::csv), FormatError);

  write_file(dir / "nan.csv", "1,2\n3,nan\n");
  CHECK_THROWS_AS(load_features(dir / "nan.csv", FeatureFormat::csv), FormatError);

  CHECK_THROWS_AS(load_features(dir / "missing.csv", FeatureFormat::csv), IoError);

  write_file(dir / "empty.csv", "");
  CHECK_THROWS_AS(load_features(dir / "empty.csv", FeatureFormat::csv), IoError);
}

TEST_CASE("f64 binary round trip is bit exact") {
  TempDir dir("bin");
  FeatureMatrix m;
  m.values = random_matrix(7, 3, 99);
  m.values(0, 0) = 0.1 + 0.2;  // not representable exactly in decimal
  save_features(m, dir / "m.bin", FeatureFormat::f64_binary);
  const auto back = load_features(dir / "m.bin", FeatureFormat::f64_binary);
  CHECK(back.values == m.values);
}

TEST_CASE("csv round trip reproduces doubles") {
  TempDir dir("csvrt");
  FeatureMatrix m;
  m.values = random_matrix(5, 4, 7);
  save_features(m, dir / "m.csv", FeatureFormat::csv);
  const auto back = load_features(dir / "m.csv", FeatureFormat::csv);
  CHECK((back.values - m.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero-noise blobs collapse onto their centers") {
  SyntheticSpec spec;
  spec.kind = SyntheticSpec::Kind::gaussian_blobs;
  spec.n_samples = 8;
  spec.dim = 3;
  spec.n_clusters = 2;
  spec.noise_sigma = 0.0;
  spec.seed = 1;
  const auto data = generate_synthetic(spec);
  REQUIRE(data.labels.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(data.labels[i] == (i < 4 ? 0 : 1));
  for (int g = 0; g < 2; ++g)
    for (int i = 4 * g + 1; i < 4 * g + 4; ++i)
      CHECK((data.features.values.row(i) - data.features.values.row(4 * g)).norm() == 0.0);
}

TEST_CASE("synthetic generation is deterministic given the seed") {
  SyntheticSpec spec;
  spec.n_samples = 50;
  spec.dim = 6;
  spec.n_clusters = 4;
  spec.noise_sigma = 0.3;
  spec.seed = 1234;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.features.values == b.features.values);
  CHECK(a.labels == b.labels);

  TempDir dir("det");
  save_features(a.features, dir / "a.bin", FeatureFormat::f64_binary);
  save_features(b.features, dir / "b.bin", FeatureFormat::f64_binary);
  CHECK(read_file(dir / "a.bin") == read_file(dir / "b.bin"));
}

// Brute-force oracle: every sample must be nearest to its own cluster center.
TEST_CASE("blob labels agree with nearest-center assignment") {
  SyntheticSpec spec;
  spec.n_samples = 400;
  spec.dim = 16;
  spec.n_clusters = 8;
  spec.noise_sigma = 0.1;
  spec.seed = 5;
  const auto data = generate_synthetic(spec);

  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(8, 16);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(8);
  for (int i = 0; i < spec.n_samples; ++i) {
    centers.row(data.labels[i]) += data.features.values.row(i);
    counts(data.labels[i]) += 1.0;
  }
  for (int c = 0; c < 8; ++c) centers.row(c) /= counts(c);

  int pure = 0;
  for (int i = 0; i < spec.n_samples; ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 8; ++c) {
      const double d = (data.features.values.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    pure += best == data.labels[i];
  }
  CHECK(pure == spec.n_samples);
}

TEST_CASE("manifold labels are angular bins") {
  SyntheticSpec spec;
  spec.kind = SyntheticSpec::Kind::circular_manifold;
  spec.n_samples = 40;
  spec.dim = 5;
  spec.n_clusters = 8;  // period
  spec.noise_sigma = 0.0;
  spec.seed = 2;
  const auto data = generate_synthetic(spec);
  for (int i = 0; i < spec.n_samples; ++i) {
    CHECK(data.labels[i] == i * 8 / 40);
    const double radius = std::hypot(data.features.values(i, 0), data.features.values(i, 1));
    CHECK(radius == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("invalid synthetic specs are rejected") {
  SyntheticSpec spec;
  spec.n_samples = 10;
  spec.dim = 2;
  spec.n_clusters = 1;  // blobs need >= 2
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpec);
  spec.n_clusters = 2;
  spec.noise_sigma = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpec);
}

TEST_CASE("annotations round trip and validate") {
  std::vector<int> labels(30);
  for (int i = 0; i < 30; ++i) labels[i] = i / 10;
  const auto ann = make_annotations(labels, 5, 5, 7);
  REQUIRE(ann.queries.size() == 30);
  for (const auto& [q, pn] : ann.queries) {
    CHECK(pn.pos.size() == 5);
    CHECK(pn.neg.size() == 5);
    for (int i : pn.pos) CHECK(labels[i] == labels[q]);
    for (int i : pn.neg) CHECK(labels[i] != labels[q]);
  }

  TempDir dir("ann");
  save_annotations(ann, dir / "ann.json");
  const auto back = load_annotations(dir / "ann.json");
  back.validate(30);
  REQUIRE(back.queries.size() == 30);
  CHECK(back.queries.at(3).pos == ann.queries.at(3).pos);
  CHECK(back.queries.at(3).neg == ann.queries.at(3).neg);
}

TEST_CASE("annotation validation rejects bad entries") {
  EvalAnnotations ann;
  ann.queries[0] = {{1, 2}, {2, 3}};  // pos/neg overlap
  CHECK_THROWS_AS(ann.validate(10), FormatError);
  ann.queries.clear();
  ann.queries[0] = {{0}, {3}};  // query among positives
  CHECK_THROWS_AS(ann.validate(10), FormatError);
  ann.queries.clear();
  ann.queries[0] = {{1}, {99}};  // out of range
  CHECK_THROWS_AS(ann.validate(10), FormatError);
}
