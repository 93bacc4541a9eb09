#include "adhmc/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adhmc::stats {

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double standard_error(std::span<const double> x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

double batch_means_se(std::span<const double> x, int batches) {
  const std::size_t size = x.size() / batches;
  if (batches < 2 || size < 1) return standard_error(x);
  std::vector<double> means(batches);
  for (int b = 0; b < batches; ++b)
    means[b] = mean(x.subspan(b * size, size));
  return standard_error(means);
}

double lag1_autocorrelation(std::span<const double> x) {
  const double m = mean(x);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    den += (x[t] - m) * (x[t] - m);
    if (t + 1 < x.size()) num += (x[t] - m) * (x[t + 1] - m);
  }
  return den > 0.0 ? num / den : 0.0;
}

double integrated_autocorr_time(std::span<const double> x) {
  const std::size_t n = x.size();
  const double m = mean(x);
  double c0 = 0.0;
  for (double v : x) c0 += (v - m) * (v - m);
  if (c0 <= 0.0) return 1.0;
  auto rho = [&](std::size_t lag) {
    double c = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) c += (x[t] - m) * (x[t + lag] - m);
    return c / c0;
  };
  double tau = 1.0;
  for (std::size_t k = 0; 2 * k + 1 < n && k < 1000; ++k) {
    const double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  // The k = 0 pair includes rho(0) = 1.
  return std::max(tau - 2.0, 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_statistic(std::vector<double> sample,
                    const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_critical_value(int n, double alpha) {
  return std::sqrt(std::log(2.0 / alpha) / 2.0) / std::sqrt(static_cast<double>(n));
}

double chi_square_sf(double x, int dof) {
  if (dof < 1) return 1.0;
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, x));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit needs >= 2 matching points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / (x.size() - 2) / sxx);
  }
  return fit;
}

}  // namespace adhmc::stats
