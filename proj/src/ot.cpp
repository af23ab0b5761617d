#include "corelw/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "corelw/encoders.hpp"
#include "corelw/error.hpp"

namespace corelw {

DocDistribution make_distribution(const EncoderOutput& enc) {
  const Eigen::Index n = enc.points.cols();
  if (n < 1) throw InternalError("make_distribution: empty support");
  DocDistribution dist;
  dist.support = enc.points;
  dist.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  dist.doc_id = enc.doc_id;
  return dist;
}

Eigen::MatrixXd cost_matrix(const DocDistribution& mu, const DocDistribution& nu) {
  if (mu.support.rows() != nu.support.rows()) {
    throw InternalError("cost_matrix: support dimension mismatch (" +
                        std::to_string(mu.support.rows()) + " vs " +
                        std::to_string(nu.support.rows()) + ")");
  }
  // 0.5||a-b||^2 = 0.5||a||^2 + 0.5||b||^2 - a.b
  const Eigen::VectorXd sq1 = 0.5 * mu.support.colwise().squaredNorm().transpose();
  const Eigen::VectorXd sq2 = 0.5 * nu.support.colwise().squaredNorm().transpose();
  Eigen::MatrixXd cost = -(mu.support.transpose() * nu.support);
  cost.colwise() += sq1;
  cost.rowwise() += sq2.transpose();
  // Gram-trick cancellation can produce tiny negatives on near-identical
  // points; the cost is nonnegative by definition.
  cost = cost.cwiseMax(0.0);
  return cost;
}

SinkhornConfig SinkhornSettings::config_for(const Eigen::MatrixXd& cost) const {
  SinkhornConfig cfg;
  cfg.max_iters = max_iters;
  cfg.tolerance = tolerance;
  if (epsilon_abs) {
    cfg.epsilon = *epsilon_abs;
  } else {
    cfg.epsilon = epsilon_scale * cost.mean();
  }
  if (!(cfg.epsilon > 0.0)) cfg.epsilon = 1e-9;
  return cfg;
}

namespace {

// Row-wise logsumexp of (f_i + g_j - C_ij)/eps over j, for fixed i.
double lse_row(const Eigen::MatrixXd& scaled_cost, const Eigen::VectorXd& g_over_eps,
               const Eigen::VectorXd& logv, Eigen::Index i) {
  const Eigen::ArrayXd terms =
      g_over_eps.array() + logv.array() - scaled_cost.row(i).transpose().array();
  const double m = terms.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((terms - m).exp().sum());
}

double lse_col(const Eigen::MatrixXd& scaled_cost, const Eigen::VectorXd& f_over_eps,
               const Eigen::VectorXd& logu, Eigen::Index j) {
  const Eigen::ArrayXd terms =
      f_over_eps.array() + logu.array() - scaled_cost.col(j).array();
  const double m = terms.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((terms - m).exp().sum());
}

}  // namespace

TransportResult sinkhorn(const DocDistribution& mu, const DocDistribution& nu,
                         const SinkhornConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw ConfigError("sinkhorn epsilon must be > 0");
  if (cfg.max_iters < 1) throw ConfigError("sinkhorn max_iters must be >= 1");
  if (!(cfg.tolerance > 0.0)) throw ConfigError("sinkhorn tolerance must be > 0");

  const Eigen::Index n1_full = mu.support.cols();
  const Eigen::Index n2_full = nu.support.cols();

  // Zero-weight points carry no mass; solve on the positive-mass subproblem
  // and re-expand the plan.
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < n1_full; ++i) {
    if (mu.weights[i] > 0.0) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < n2_full; ++j) {
    if (nu.weights[j] > 0.0) cols.push_back(j);
  }
  if (rows.empty() || cols.empty()) {
    throw InternalError("sinkhorn: a distribution has no positive-mass support point");
  }

  const Eigen::Index n1 = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n2 = static_cast<Eigen::Index>(cols.size());

  Eigen::MatrixXd cost_full = cost_matrix(mu, nu);
  if (!cost_full.allFinite()) throw InternalError("sinkhorn: non-finite cost matrix");

  Eigen::MatrixXd cost(n1, n2);
  Eigen::VectorXd u(n1), v(n2);
  for (Eigen::Index a = 0; a < n1; ++a) {
    u[a] = mu.weights[rows[a]];
    for (Eigen::Index b = 0; b < n2; ++b) cost(a, b) = cost_full(rows[a], cols[b]);
  }
  for (Eigen::Index b = 0; b < n2; ++b) v[b] = nu.weights[cols[b]];

  const double eps = cfg.epsilon;
  const Eigen::MatrixXd scaled_cost = cost / eps;
  const Eigen::VectorXd logu = u.array().log();
  const Eigen::VectorXd logv = v.array().log();

  // Potentials over eps: fe_i = f_i / eps, ge_j = g_j / eps, with
  // plan_ij = exp(fe_i + ge_j - C_ij/eps + logu_i + logv_j) written in the
  // symmetric "log scaling" form below.
  Eigen::VectorXd fe = Eigen::VectorXd::Zero(n1);
  Eigen::VectorXd ge = Eigen::VectorXd::Zero(n2);

  auto build_plan = [&]() {
    Eigen::MatrixXd plan(n1, n2);
    for (Eigen::Index i = 0; i < n1; ++i) {
      plan.row(i) = (fe[i] + logu[i] + ge.array() + logv.array() -
                     scaled_cost.row(i).transpose().array())
                        .exp()
                        .transpose();
    }
    return plan;
  };

  int iters = 0;
  bool converged = false;
  Eigen::VectorXd fe_next(n1);
  while (iters < cfg.max_iters) {
    for (Eigen::Index i = 0; i < n1; ++i) fe_next[i] = -lse_row(scaled_cost, ge, logv, i);
    if (iters > 0) {
      // Column marginals of the previous (fe, ge) iterate are exact; its
      // row sums are u_i * exp(fe_i - fe_next_i), so the next row update
      // gives the marginal violation for free.
      double max_violation = 0.0;
      for (Eigen::Index i = 0; i < n1; ++i) {
        max_violation =
            std::max(max_violation, std::abs(u[i] * (std::exp(fe[i] - fe_next[i]) - 1.0)));
      }
      if (max_violation < cfg.tolerance) {
        converged = true;
        break;
      }
    }
    ++iters;
    fe = fe_next;
    for (Eigen::Index j = 0; j < n2; ++j) ge[j] = -lse_col(scaled_cost, fe, logu, j);
  }

  Eigen::MatrixXd plan_small = build_plan();
  TransportResult result;
  result.iterations_used = iters;
  result.converged = converged;
  result.epsilon = eps;
  result.marginal_violation =
      std::max((plan_small.rowwise().sum() - u).cwiseAbs().maxCoeff(),
               (plan_small.colwise().sum().transpose() - v).cwiseAbs().maxCoeff());
  result.cost = (cost.array() * plan_small.array()).sum();

  if (n1 == n1_full && n2 == n2_full) {
    result.plan = std::move(plan_small);
  } else {
    result.plan = Eigen::MatrixXd::Zero(n1_full, n2_full);
    for (Eigen::Index a = 0; a < n1; ++a) {
      for (Eigen::Index b = 0; b < n2; ++b) result.plan(rows[a], cols[b]) = plan_small(a, b);
    }
  }
  return result;
}

double wasserstein_distance(const DocDistribution& mu, const DocDistribution& nu,
                            const SinkhornSettings& settings) {
  const Eigen::MatrixXd cost = cost_matrix(mu, nu);
  return sinkhorn(mu, nu, settings.config_for(cost)).cost;
}

WassersteinGrads wasserstein_grad(const TransportResult& result,
                                  const DocDistribution& mu,
                                  const DocDistribution& nu) {
  WassersteinGrads grads;
  const Eigen::MatrixXd& plan = result.plan;
  // dW/dz_i^1 = sum_j plan(i,j) (z_i^1 - z_j^2)
  //           = z_i^1 * rowsum_i - Z2 * plan.row(i)^T
  const Eigen::VectorXd row_sums = plan.rowwise().sum();
  const Eigen::VectorXd col_sums = plan.colwise().sum().transpose();
  grads.d_mu = mu.support * row_sums.asDiagonal() - nu.support * plan.transpose();
  grads.d_nu = nu.support * col_sums.asDiagonal() - mu.support * plan;
  return grads;
}

double regularized_cost(const TransportResult& result, const DocDistribution& mu,
                        const DocDistribution& nu) {
  const Eigen::MatrixXd cost = cost_matrix(mu, nu);
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < result.plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < result.plan.cols(); ++j) {
      const double p = result.plan(i, j);
      if (p > 0.0) entropy -= p * (std::log(p) - 1.0);
    }
  }
  return (cost.array() * result.plan.array()).sum() - result.epsilon * entropy;
}

}  // namespace corelw
