#pragma once

#include <functional>
#include <span>
#include <vector>

namespace adhmc::stats {

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // unbiased
double standard_error(std::span<const double> x);

/// Standard error of the mean by non-overlapping batch means.
double batch_means_se(std::span<const double> x, int batches = 50);

double lag1_autocorrelation(std::span<const double> x);

/// Integrated autocorrelation time, Geyer initial positive sequence.
double integrated_autocorr_time(std::span<const double> x);

double normal_cdf(double x);

/// sup_x |F_n(x) - F(x)|.
double ks_statistic(std::vector<double> sample,
                    const std::function<double(double)>& cdf);

/// Asymptotic two-sided critical value sqrt(ln(2/alpha)/2) / sqrt(n).
double ks_critical_value(int n, double alpha);

/// Upper tail P(X > x) of a chi-square with `dof` degrees of freedom.
double chi_square_sf(double x, int dof);

/// Ordinary least squares of y on x.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace adhmc::stats
