#include "alchemy/logistic.hpp"

#include <cmath>
#include <stdexcept>

#include "alchemy/stats.hpp"

namespace alchemy {

const TermEstimate& RegressionResult::at(const std::string& term) const {
  for (const auto& t : terms) {
    if (t.term == term) return t;
  }
  throw std::out_of_range("no regression term '" + term + "'");
}

namespace {

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

RegressionResult package(const Design& d, const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov, bool converged,
                         int iterations) {
  RegressionResult r;
  r.n = static_cast<std::size_t>(d.x.rows());
  r.converged = converged;
  r.iterations = iterations;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    TermEstimate t;
    t.term = d.names[static_cast<std::size_t>(k)];
    t.estimate = beta[k];
    t.se = std::sqrt(std::max(cov(k, k), 0.0));
    t.z = t.se > 0.0 ? t.estimate / t.se : 0.0;
    t.p = t.se > 0.0 ? stats::normal_two_sided(t.z) : 1.0;
    r.terms.push_back(std::move(t));
  }
  return r;
}

// Every row on the correct side of the boundary, with fitted probabilities
// pushed to 0/1: the MLE does not exist.
bool separated(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (y[i] > 0.5 ? eta[i] < 15.0 : eta[i] > -15.0) return false;
  }
  return true;
}

}  // namespace

RegressionResult fit_logistic(const Design& d, const LogisticOptions& options) {
  const Eigen::Index n = d.x.rows();
  const Eigen::Index p = d.x.cols();
  if (static_cast<Eigen::Index>(d.names.size()) != p) throw SingularDesign("design names do not match columns");
  if (d.y.size() != n || n == 0) throw SingularDesign("design has no rows or mismatched labels");
  if (!d.x.allFinite() || !d.y.allFinite()) throw SingularDesign("design contains non-finite values");

  const double positives = d.y.sum();
  if (positives <= 0.0 || positives >= static_cast<double>(n)) {
    throw DegenerateSample("logistic fit needs both classes present");
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw SingularDesign("design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                          " of " + std::to_string(p) + ")");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd info(p, p);
  bool converged = false;
  int iter = 0;
  for (iter = 1; iter <= options.max_iter; ++iter) {
    const Eigen::VectorXd eta = d.x * beta;
    // The residual of a positive row is sigmoid(-eta), not 1 - sigmoid(eta),
    // so flipping every label negates the iterates bit for bit.
    Eigen::VectorXd resid(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = sigmoid(eta[i]);
      const double q = sigmoid(-eta[i]);
      resid[i] = d.y[i] > 0.5 ? q : -mu;
      w[i] = std::max(mu * q, 1e-300);
    }
    info.noalias() = d.x.transpose() * w.asDiagonal() * d.x;
    const Eigen::VectorXd score = d.x.transpose() * resid;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) break;
    beta += step;
    if (step.cwiseAbs().maxCoeff() < options.tol) {
      converged = true;
      break;
    }
  }
  if (iter > options.max_iter) iter = options.max_iter;

  const Eigen::VectorXd eta = d.x * beta;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = sigmoid(eta[i]) * sigmoid(-eta[i]);
  }
  info.noalias() = d.x.transpose() * w.asDiagonal() * d.x;

  if (separated(eta, d.y)) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::infinity());
    throw SeparationDetected("perfect separation: coefficients diverge", package(d, beta, cov, false, iter));
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (!lu.isInvertible()) throw SingularDesign("information matrix is singular at the optimum");
  return package(d, beta, lu.inverse(), converged, iter);
}

}  // namespace alchemy
