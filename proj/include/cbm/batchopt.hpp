#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "cbm/cliques.hpp"
#include "cbm/types.hpp"

namespace cbm {

// Similarity between cliques, aggregated from the sample-level kernel.
struct CliqueSimilarity {
  Eigen::MatrixXd values;  // K x K symmetric
  bool psd_conditioned = false;

  Eigen::Index k() const { return values.rows(); }
};

struct BatchParams {
  int b = 100;  // number of batches
  int r = 20;   // cliques per batch
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double p = 1.0 / 16.0;
  double eps_smooth = 1e-6;
  int cccp_max_iter = 50;
  double cccp_tol = 1e-6;
  int inner_max_iter = 500;
  double inner_tol = 1e-8;

  void validate(Eigen::Index k) const;  // throws InvalidSpec
};

// B x K assignment of cliques to batches; relaxed rows live on the capped
// simplex {x in [0,1]^K : sum x = r}, rounded rows are binary with sum r.
struct BatchAssignment {
  Eigen::MatrixXd x;
  int r = 0;
  bool rounded = false;

  Eigen::Index b() const { return x.rows(); }
  Eigen::Index k() const { return x.cols(); }
  std::vector<std::vector<int>> rows_as_indices() const;  // rounded only
};

struct CccpIterate {
  int iter = 0;
  double objective = 0.0;
  int inner_iters = 0;
  double step_norm = 0.0;
};

struct CccpResult {
  BatchAssignment assignment;  // relaxed
  std::vector<CccpIterate> log;
  bool converged = false;
};

struct BruteForceResult {
  BatchAssignment assignment;  // rounded
  double objective = 0.0;
  std::vector<double> objectives;  // every feasible binary point, enumeration order
};

// S'_{kl} = mean of s_ij over i in clique k, j in clique l. Diagonal entries
// exclude the i=j pairs unless the clique is a singleton (then s_ii).
CliqueSimilarity clique_similarity(const SimilarityMatrix& s, const CliqueAssignment& c);

// Clamp negative eigenvalues to zero and reconstruct; idempotent.
CliqueSimilarity condition_psd(const CliqueSimilarity& sp);

// Full relaxed objective
//   tr(X S' X^T) - tr(X diag(S') X^T)
//   - lambda1 sum_b |x_b C|_p^p - lambda2 |1 X C|_p^p - lambda3 |X - 0.5|_F^2
// with the smoothed quasinorm |y|_p^p = sum (y_i + eps)^p - eps^p.
double objective_full(const Eigen::MatrixXd& x, const CliqueSimilarity& sp,
                      const Eigen::MatrixXd& c, const BatchParams& params);

// Gradient of the convex part v(X) = tr(X diag(S') X^T) + lambda3 |X - 0.5|_F^2.
Eigen::MatrixXd grad_v(const Eigen::MatrixXd& x, const CliqueSimilarity& sp,
                       const BatchParams& params);

// Gradient of the convex part
// u(X) = tr(X S' X^T) - lambda1 sum_b |x_b C|_p^p - lambda2 |1 X C|_p^p.
Eigen::MatrixXd grad_u(const Eigen::MatrixXd& x, const CliqueSimilarity& sp,
                       const Eigen::MatrixXd& c, const BatchParams& params);

// Euclidean projection onto {x in [0,1]^K : sum x = r}, by bisection on the
// shift tau with tolerance 1e-12 on the row sum.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& y, int r);

// Difference-of-convex iteration: linearize v at X^t offers and solve the convex
// subproblem by projected gradient descent with Armijo backtracking. The
// relaxed objective is nonincreasing across iterations; when the iteration
// cap is reached the best (= last) iterate is returned with converged=false.
CccpResult cccp_solve(const CliqueSimilarity& sp, const Eigen::MatrixXd& c,
                      const BatchParams& params);

// Top-r entries per row set to 1 (ties to the lowest index).
BatchAssignment round_assignment(const BatchAssignment& relaxed, int r);

// Exhaustive minimizer over all (K choose r)^B binary assignments, evaluated
// with lambda3 = 0; guarded by TooLarge above 1e6 points. Ties resolve to the
// lexicographically smallest row-subset choice.
BruteForceResult brute_force_batches(const CliqueSimilarity& sp, const Eigen::MatrixXd& c,
                                     int b, int r, const BatchParams& params);

// {"b":..., "k":..., "r":..., "rows":[[clique indices],...]}
void save_batches(const BatchAssignment& x, const std::filesystem::path& path);
BatchAssignment load_batches(const std::filesystem::path& path);

// CSV: iter,objective,inner_iters,step_norm
void save_cccp_log(const std::vector<CccpIterate>& log, const std::filesystem::path& path);

}  // namespace cbm
