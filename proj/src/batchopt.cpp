#include "cbm/batchopt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cbm/error.hpp"
#include "cbm/io.hpp"
#include "cbm/rng.hpp"

namespace cbm {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using json = nlohmann::json;

void BatchParams::validate(Eigen::Index k) const {
  if (b < 1) throw InvalidSpec("batch count must be positive");
  if (r < 1 || r > k) throw InvalidSpec("need 1 <= r <= K");
  if (!(p > 0.0 && p < 1.0)) throw InvalidSpec("p must be in (0,1)");
  if (!(eps_smooth > 0.0)) throw InvalidSpec("eps_smooth must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw InvalidSpec("lambda weights must be nonnegative");
  if (cccp_max_iter < 1 || inner_max_iter < 1) throw InvalidSpec("iteration caps must be positive");
  if (!(cccp_tol > 0.0) || !(inner_tol > 0.0)) throw InvalidSpec("tolerances must be positive");
}

std::vector<std::vector<int>> BatchAssignment::rows_as_indices() const {
  if (!rounded) throw InvalidSpec("row indices need a rounded assignment");
  std::vector<std::vector<int>> rows(b());
  for (Eigen::Index i = 0; i < b(); ++i)
    for (Eigen::Index j = 0; j < k(); ++j)
      if (x(i, j) == 1.0) rows[i].push_back(static_cast<int>(j));
  return rows;
}

CliqueSimilarity clique_similarity(const SimilarityMatrix& s, const CliqueAssignment& c) {
  const int k = c.k();
  if (k < 1) throw EmptyInput("no cliques");
  CliqueSimilarity sp;
  sp.values.resize(k, k);
  for (int a = 0; a < k; ++a) {
    const auto& ma = c.cliques[a];
    {  // diagonal: pairs i != j, or s_ii for singletons
      if (ma.size() == 1) {
        sp.values(a, a) = s.values(ma[0], ma[0]);
      } else {
        double sum = 0.0;
        long cnt = 0;
        for (size_t i = 0; i < ma.size(); ++i)
          for (size_t j = i + 1; j < ma.size(); ++j) {
            sum += s.values(ma[i], ma[j]);
            ++cnt;
          }
        sp.values(a, a) = sum / static_cast<double>(cnt);
      }
    }
    for (int b = a + 1; b < k; ++b) {
      const auto& mb = c.cliques[b];
      double sum = 0.0;
      for (int i : ma)
        for (int j : mb) sum += s.values(i, j);
      sp.values(a, b) = sum / static_cast<double>(ma.size() * mb.size());
      sp.values(b, a) = sp.values(a, b);
    }
  }
  return sp;
}

CliqueSimilarity condition_psd(const CliqueSimilarity& sp) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sp.values);
  if (eig.info() != Eigen::Success) throw EigenFailure("PSD conditioning failed to converge");
  const VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  CliqueSimilarity out;
  MatrixXd m = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  out.values = 0.5 * (m + m.transpose());  // restore exact symmetry
  out.psd_conditioned = true;
  return out;
}

namespace {

// Smoothed p-quasinorm sum((y+eps)^p - eps^p) over all entries, y >= 0.
double smoothed_p(const ArrayXXd& y, double p, double eps) {
  return (y + eps).pow(p).sum() - static_cast<double>(y.size()) * std::pow(eps, p);
}

struct ObjectiveParts {
  double quad = 0.0;   // tr(X S' X^T)
  double diag = 0.0;   // tr(X diag(S') X^T)
  double cov1 = 0.0;   // sum_b |x_b C|_p^p
  double cov2 = 0.0;   // |1 X C|_p^p
  double relax = 0.0;  // |X - 0.5|_F^2

  double u(const BatchParams& pr) const { return quad - pr.lambda1 * cov1 - pr.lambda2 * cov2; }
  double v(const BatchParams& pr) const { return diag + pr.lambda3 * relax; }
  double full(const BatchParams& pr) const { return u(pr) - v(pr); }
};

void check_shapes(const MatrixXd& x, const CliqueSimilarity& sp, const MatrixXd& c) {
  if (x.cols() != sp.k()) throw ShapeMismatch("X columns must equal clique count");
  if (c.rows() != sp.k()) throw ShapeMismatch("C rows must equal clique count");
  if (sp.values.rows() != sp.values.cols()) throw ShapeMismatch("S' must be square");
}

ObjectiveParts objective_parts(const MatrixXd& x, const CliqueSimilarity& sp, const MatrixXd& c,
                               const BatchParams& params) {
  ObjectiveParts parts;
  parts.quad = (x * sp.values).cwiseProduct(x).sum();
  parts.diag =
      (x.array().square().rowwise() * sp.values.diagonal().transpose().array()).sum();
  parts.cov1 = smoothed_p((x * c).array(), params.p, params.eps_smooth);
  const RowVectorXd z = x.colwise().sum() * c;
  parts.cov2 = smoothed_p(z.array(), params.p, params.eps_smooth);
  parts.relax = (x.array() - 0.5).square().sum();
  return parts;
}

}  // namespace

double objective_full(const MatrixXd& x, const CliqueSimilarity& sp, const MatrixXd& c,
                      const BatchParams& params) {
  check_shapes(x, sp, c);
  return objective_parts(x, sp, c, params).full(params);
}

MatrixXd grad_v(const MatrixXd& x, const CliqueSimilarity& sp, const BatchParams& params) {
  if (x.cols() != sp.k()) throw ShapeMismatch("X columns must equal clique count");
  MatrixXd g = 2.0 * (x.array().rowwise() * sp.values.diagonal().transpose().array()).matrix();
  g.array() += params.lambda3 * (2.0 * x.array() - 1.0);
  return g;
}

MatrixXd grad_u(const MatrixXd& x, const CliqueSimilarity& sp, const MatrixXd& c,
                const BatchParams& params) {
  check_shapes(x, sp, c);
  MatrixXd g = 2.0 * x * sp.values;
  const double p = params.p, eps = params.eps_smooth;
  if (params.lambda1 != 0.0) {
    const ArrayXXd y = ((x * c).array() + eps).pow(p - 1.0);
    g.noalias() -= params.lambda1 * p * (y.matrix() * c.transpose());
  }
  if (params.lambda2 != 0.0) {
    const RowVectorXd z = x.colwise().sum() * c;
    const RowVectorXd w = (z.array() + eps).pow(p - 1.0).matrix() * c.transpose();
    g.array().rowwise() -= (params.lambda2 * p) * w.array();
  }
  return g;
}

VectorXd project_capped_simplex(const VectorXd& y, int r) {
  const Eigen::Index k = y.size();
  if (r < 0 || r > k) throw InvalidR("need 0 <= r <= K");
  if (r == 0) return VectorXd::Zero(k);
  if (r == k) return VectorXd::Ones(k);

  double lo = y.minCoeff() - 1.0;  // sum = K at lo
  double hi = y.maxCoeff();        // sum = 0 at hi
  VectorXd x(k);
  for (int it = 0; it < 200; ++it) {
    const double tau = 0.5 * (lo + hi);
    x = (y.array() - tau).cwiseMax(0.0).cwiseMin(1.0);
    const double sum = x.sum();
    if (std::abs(sum - static_cast<double>(r)) <= 1e-12) return x;
    if (sum > r)
      lo = tau;
    else
      hi = tau;
  }
  return x;
}

namespace {

void project_rows(MatrixXd& x, int r) {
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    x.row(i) = project_capped_simplex(x.row(i).transpose(), r).transpose();
}

// Convex subproblem of one CCCP step: minimize u(X) - <X, Gv> over rows of
// the capped simplex, projected gradient descent with Armijo backtracking.
struct InnerResult {
  MatrixXd x;
  int iters = 0;
};

InnerResult inner_solve(const MatrixXd& x0, const MatrixXd& gv, const CliqueSimilarity& sp,
                        const MatrixXd& c, const BatchParams& params) {
  constexpr double kArmijo = 1e-4;
  const auto g_of = [&](const MatrixXd& x) {
    return objective_parts(x, sp, c, params).u(params) - x.cwiseProduct(gv).sum();
  };

  MatrixXd x = x0;
  double g_cur = g_of(x);
  double step = 1.0;
  int it = 0;
  for (; it < params.inner_max_iter; ++it) {
    const MatrixXd grad = grad_u(x, sp, c, params) - gv;

    MatrixXd unit = x - grad;
    project_rows(unit, params.r);
    if ((x - unit).norm() < params.inner_tol) break;

    double t = step;
    bool accepted = false;
    while (t > 1e-18) {
      MatrixXd z = x - t * grad;
      project_rows(z, params.r);
      const double g_z = g_of(z);
      const double slope = grad.cwiseProduct(z - x).sum();
      if (g_z <= g_cur + kArmijo * slope) {
        x = std::move(z);
        g_cur = g_z;
        step = std::min(t * 2.0, 1e6);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no admissible step left
  }
  return {std::move(x), it};
}

}  // namespace

namespace {

constexpr int kCccpStarts = 9;  // last one is the greedy construction

// Greedy binary construction on the lambda3-free objective, marginal gains
// evaluated incrementally in O(K + N) per candidate. Used as one CCCP start
// and as a quality floor for the rounded selection.
MatrixXd greedy_start(const CliqueSimilarity& sp, const MatrixXd& c, const BatchParams& params) {
  const Eigen::Index k = sp.k();
  const Eigen::Index n = c.cols();
  const double p = params.p, eps = params.eps_smooth;
  MatrixXd x = MatrixXd::Zero(params.b, k);
  RowVectorXd z = RowVectorXd::Zero(n);  // 1 X C so far
  for (int b = 0; b < params.b; ++b) {
    RowVectorXd xs = RowVectorXd::Zero(k);  // x_b S'
    RowVectorXd y = RowVectorXd::Zero(n);   // x_b C
    for (int pick = 0; pick < params.r; ++pick) {
      int best = -1;
      double best_delta = std::numeric_limits<double>::infinity();
      for (Eigen::Index cand = 0; cand < k; ++cand) {
        if (x(b, cand) == 1.0) continue;
        const double dquad = 2.0 * xs(cand);  // + S'_kk, cancelled by the diag term
        double dcov = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
          if (c(cand, s) == 0.0) continue;
          dcov += params.lambda1 *
                  (std::pow(y(s) + c(cand, s) + eps, p) - std::pow(y(s) + eps, p));
          dcov += params.lambda2 *
                  (std::pow(z(s) + c(cand, s) + eps, p) - std::pow(z(s) + eps, p));
        }
        const double delta = dquad - dcov;
        if (delta < best_delta) {
          best_delta = delta;
          best = static_cast<int>(cand);
        }
      }
      x(b, best) = 1.0;
      xs += sp.values.row(best);
      y += c.row(best);
      z += c.row(best);
    }
  }
  return x;
}

// Deterministic start family. The uniform center is a fixed point of the
// row-permutation symmetry (identical rows stay identical under every CCCP
// step), so every start perturbs it: jittered variants break ties randomly,
// staggered variants seed a balanced cover.
MatrixXd cccp_start(int b, Eigen::Index k, int r, int variant) {
  const double center = static_cast<double>(r) / static_cast<double>(k);
  MatrixXd x(b, k);
  if (variant == 1 || variant == 2) {
    const double beta = 0.5;
    const Eigen::Index offset = variant == 2 ? k / 2 : 0;
    x.setConstant((1.0 - beta) * center);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < r; ++j)
        x(i, (static_cast<Eigen::Index>(i) * r + j + offset) % k) += beta;
  } else {
    const double eta =
        (variant == 0 ? 0.25 : 0.45) * std::min(center, 1.0 - center);
    std::uint64_t sm = 0x9d2c5680ULL + 0xabcd1234ULL * static_cast<std::uint64_t>(variant);
    for (int i = 0; i < b; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        const double u01 = static_cast<double>(splitmix64_next(sm) >> 11) * 0x1.0p-53;
        x(i, j) = center + eta * (2.0 * u01 - 1.0);
      }
  }
  project_rows(x, r);
  return x;
}

CccpResult cccp_run(MatrixXd x, const CliqueSimilarity& sp, const MatrixXd& c,
                    const BatchParams& params) {
  CccpResult result;
  double f_prev = objective_full(x, sp, c, params);
  result.log.push_back({0, f_prev, 0, 0.0});

  for (int t = 1; t <= params.cccp_max_iter; ++t) {
    const MatrixXd gv = grad_v(x, sp, params);
    InnerResult inner = inner_solve(x, gv, sp, c, params);
    const double f_new = objective_full(inner.x, sp, c, params);
    const double step_norm = (inner.x - x).norm();
    x = std::move(inner.x);
    result.log.push_back({t, f_new, inner.iters, step_norm});
    if (std::abs(f_new - f_prev) < params.cccp_tol) {
      result.converged = true;
      f_prev = f_new;
      break;
    }
    f_prev = f_new;
  }

  result.assignment.x = std::move(x);
  result.assignment.r = params.r;
  result.assignment.rounded = false;
  return result;
}

}  // namespace

CccpResult cccp_solve(const CliqueSimilarity& sp, const MatrixXd& c, const BatchParams& params) {
  if (!sp.psd_conditioned) throw InvalidSpec("cccp_solve requires a PSD-conditioned S'");
  params.validate(sp.k());

  // CCCP only reaches local optima of the DC program, so race a small fixed
  // family of starts and keep the one whose rounded assignment scores best
  // on the binary objective (lambda3 is constant across binary points).
  BatchParams binary_eval = params;
  binary_eval.lambda3 = 0.0;
  CccpResult best;
  double best_rounded = std::numeric_limits<double>::infinity();
  for (int variant = 0; variant < kCccpStarts; ++variant) {
    MatrixXd x0 = variant == kCccpStarts - 1
                      ? greedy_start(sp, c, params)
                      : cccp_start(params.b, sp.k(), params.r, variant);
    CccpResult run = cccp_run(std::move(x0), sp, c, params);
    const BatchAssignment rounded = round_assignment(run.assignment, params.r);
    const double score = objective_full(rounded.x, sp, c, binary_eval);
    if (score < best_rounded) {
      best_rounded = score;
      best = std::move(run);
    }
  }
  return best;
}

BatchAssignment round_assignment(const BatchAssignment& relaxed, int r) {
  const Eigen::Index k = relaxed.k();
  if (r < 1 || r > k) throw InvalidR("need 1 <= r <= K");
  BatchAssignment out;
  out.x = MatrixXd::Zero(relaxed.b(), k);
  out.r = r;
  out.rounded = true;
  std::vector<int> order(static_cast<size_t>(k));
  for (Eigen::Index i = 0; i < relaxed.b(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return relaxed.x(i, a) > relaxed.x(i, b);  // ties keep the lower index
    });
    for (int j = 0; j < r; ++j) out.x(i, order[j]) = 1.0;
  }
  return out;
}

BruteForceResult brute_force_batches(const CliqueSimilarity& sp, const MatrixXd& c, int b, int r,
                                     const BatchParams& params) {
  const int k = static_cast<int>(sp.k());
  if (b < 1 || r < 1 || r > k) throw InvalidR("need b >= 1 and 1 <= r <= K");
  double combos = 1.0;
  for (int i = 0; i < r; ++i) combos = combos * (k - i) / (i + 1);
  const double total = std::pow(combos, b);
  if (!(total <= 1e6)) throw TooLarge("brute force bounded at 1e6 assignments");

  BatchParams eval_params = params;
  eval_params.lambda3 = 0.0;  // constant at binary points

  // All r-subsets of {0..k-1} in lexicographic order.
  std::vector<std::vector<int>> subsets;
  std::vector<int> cur(r);
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    subsets.push_back(cur);
    int i = r - 1;
    while (i >= 0 && cur[i] == k - r + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < r; ++j) cur[j] = cur[j - 1] + 1;
  }

  BruteForceResult result;
  result.objective = std::numeric_limits<double>::infinity();
  std::vector<size_t> pick(b, 0);
  MatrixXd x(b, k);
  while (true) {
    x.setZero();
    for (int row = 0; row < b; ++row)
      for (int j : subsets[pick[row]]) x(row, j) = 1.0;
    const double f = objective_full(x, sp, c, eval_params);
    result.objectives.push_back(f);
    if (f < result.objective) {
      result.objective = f;
      result.assignment.x = x;
    }
    int row = b - 1;
    while (row >= 0 && pick[row] + 1 == subsets.size()) pick[row--] = 0;
    if (row < 0) break;
    ++pick[row];
  }
  result.assignment.r = r;
  result.assignment.rounded = true;
  return result;
}

void save_batches(const BatchAssignment& x, const std::filesystem::path& path) {
  json j;
  j["b"] = static_cast<int>(x.b());
  j["k"] = static_cast<int>(x.k());
  j["r"] = x.r;
  j["rows"] = x.rows_as_indices();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

BatchAssignment load_batches(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad batch JSON: " + std::string(e.what()));
  }
  BatchAssignment out;
  try {
    const int b = j.at("b").get<int>();
    const int k = j.at("k").get<int>();
    out.r = j.at("r").get<int>();
    out.rounded = true;
    out.x = MatrixXd::Zero(b, k);
    const auto rows = j.at("rows").get<std::vector<std::vector<int>>>();
    if (static_cast<int>(rows.size()) != b) throw FormatError("row count mismatch");
    for (int i = 0; i < b; ++i)
      for (int idx : rows[i]) {
        if (idx < 0 || idx >= k) throw FormatError("clique index out of range");
        out.x(i, idx) = 1.0;
      }
  } catch (const json::exception& e) {
    throw FormatError("bad batch JSON: " + std::string(e.what()));
  }
  return out;
}

void save_cccp_log(const std::vector<CccpIterate>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,objective,inner_iters,step_norm\n";
  for (const auto& e : log)
    out << e.iter << ',' << format_f64(e.objective) << ',' << e.inner_iters << ','
        << format_f64(e.step_norm) << '\n';
}

}  // namespace cbm
