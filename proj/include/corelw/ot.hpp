#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

namespace corelw {

struct EncoderOutput;

// Empirical distribution over encoder support points: sum_i u_i * delta(z_i).
struct DocDistribution {
  Eigen::MatrixXd support;  // d_out x N, column i = z_i
  Eigen::VectorXd weights;  // u, nonnegative, sums to 1
  std::string doc_id;
};

DocDistribution make_distribution(const EncoderOutput& enc);

// Ground cost d(z_i, z_j) = 0.5 * ||z_i - z_j||^2.
Eigen::MatrixXd cost_matrix(const DocDistribution& mu, const DocDistribution& nu);

struct SinkhornConfig {
  double epsilon = 0.0;  // entropic regularization, > 0
  int max_iters = 500;
  double tolerance = 1e-6;  // max marginal violation at convergence
};

// Call-site policy for picking epsilon per pair: epsilon_abs when set,
// otherwise epsilon_scale * mean(C).
struct SinkhornSettings {
  double epsilon_scale = 0.1;
  std::optional<double> epsilon_abs;
  int max_iters = 500;
  double tolerance = 1e-6;

  SinkhornConfig config_for(const Eigen::MatrixXd& cost) const;
};

struct TransportResult {
  Eigen::MatrixXd plan;  // N1 x N2, row sums ~ u, col sums ~ v
  double cost = 0.0;     // unregularized transport cost <C, plan>
  int iterations_used = 0;
  bool converged = false;
  double epsilon = 0.0;
  double marginal_violation = 0.0;
};

// Log-domain Sinkhorn on kernel exp(-C/eps). Returns the plan and the
// unregularized cost <C, plan>; non-convergence is reported through the
// flag, not an exception.
TransportResult sinkhorn(const DocDistribution& mu, const DocDistribution& nu,
                         const SinkhornConfig& cfg);

double wasserstein_distance(const DocDistribution& mu, const DocDistribution& nu,
                            const SinkhornSettings& settings);

struct WassersteinGrads {
  Eigen::MatrixXd d_mu;  // d_out x N1, column i = dW/dz_i^1
  Eigen::MatrixXd d_nu;  // d_out x N2
};

// Envelope (fixed-plan) gradients of <C, plan> w.r.t. the support points:
// dW/dz_i^1 = sum_j plan(i,j) (z_i^1 - z_j^2).
WassersteinGrads wasserstein_grad(const TransportResult& result,
                                  const DocDistribution& mu,
                                  const DocDistribution& nu);

// Regularized objective <C, plan> - eps * H(plan) with
// H = -sum p (log p - 1); the quantity whose exact support-point gradient
// is the fixed-plan formula at convergence.
double regularized_cost(const TransportResult& result, const DocDistribution& mu,
                        const DocDistribution& nu);

}  // namespace corelw
