#pragma once

#include <span>

namespace alchemy::stats {

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);

// P(|T| >= |t|) for T ~ Student t with df degrees of freedom.
double student_t_two_sided(double t, double df);

double normal_two_sided(double z);

double mean(std::span<const double> xs);

// Unbiased (n - 1) sample variance.
double variance(std::span<const double> xs);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;          // two-sided
  double p_greater = 0.5;  // one-sided, alternative mean(a) > mean(b)
};

// Throws DegenerateSample when a sample has fewer than 2 values or both
// variances are zero.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

}  // namespace alchemy::stats
