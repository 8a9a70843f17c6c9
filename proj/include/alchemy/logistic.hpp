#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "alchemy/error.hpp"

namespace alchemy {

struct TermEstimate {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
};

struct RegressionResult {
  std::vector<TermEstimate> terms;
  std::size_t n = 0;
  bool converged = false;
  int iterations = 0;

  const TermEstimate& at(const std::string& term) const;  // throws std::out_of_range
  double coef(const std::string& term) const { return at(term).estimate; }
};

// Columns include the intercept if one is wanted; names label the columns.
struct Design {
  std::vector<std::string> names;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;  // 0/1
};

struct LogisticOptions {
  int max_iter = 50;
  double tol = 1e-10;  // on the max absolute coefficient change
};

// Thrown for perfectly separable data; carries the diverging fit with
// converged = false.
class SeparationDetected : public Error {
 public:
  SeparationDetected(const std::string& what, RegressionResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const RegressionResult& partial() const { return partial_; }

 private:
  RegressionResult partial_;
};

// Maximum-likelihood logit by iteratively reweighted least squares. Standard
// errors come from the inverse observed information at the optimum.
// Throws SingularDesign for rank-deficient X, DegenerateSample when only one
// class is present, SeparationDetected for perfect separation.
RegressionResult fit_logistic(const Design& design, const LogisticOptions& options = {});

}  // namespace alchemy
