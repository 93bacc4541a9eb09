#pragma once

#include "adhmc/rng.hpp"
#include "adhmc/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adhmc {

/// Membership certificate for the class S_{ell,L}: ell-strongly convex with
/// L-Lipschitz gradient, plus a bound on the third-derivative tensor norm.
struct SmoothnessCertificate {
  double ell = 1.0;
  double lip = 1.0;
  double third = 0.0;

  void validate() const;
};

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;
using MatrixFn = std::function<Matrix(const Vector&)>;

/// A smooth convex energy on R^d. All callables must be pure and re-entrant.
struct EnergyFunction {
  int dim = 0;
  ScalarFn energy;
  VectorFn gradient;
  MatrixFn hessian;
  SmoothnessCertificate certificate;
};

/// Potential U = -log f of the target.
struct PotentialModel : EnergyFunction {
  std::string id;
  // Summands U_i with sum_i U_i = U, used for mini-batching. Null when absent.
  std::shared_ptr<const std::vector<EnergyFunction>> components;
  // RMS norm |||q|||_2 under exp(-U), when known in closed form.
  std::optional<double> sigma_q;
  // Exact draws from exp(-U)/Z; empty when no exact sampler exists.
  std::function<Vector(Rng&)> exact_sampler;

  bool has_components() const { return components && !components->empty(); }
};

/// Which quantity plays sigma_V^2 in the convergence-rate comparison.
enum class SigmaVReading {
  squared,      // E ||grad V||_2^2
  first_power,  // E ||grad V||_2, the integrand as literally printed
};

const char* to_string(SigmaVReading reading);

struct MomentDescriptors {
  Matrix mu;       // E[d_i V d_j V]
  Matrix sigma;    // E[d_ij V]
  Vector mean;     // E[p]
  double grad_norm_mean = 0.0;     // E ||grad V||_2
  double grad_norm_sq_mean = 0.0;  // E ||grad V||_2^2
  double sigma2 = 0.0;             // max_i E[p_i^2]
  double sigma4 = 0.0;             // max_i E[p_i^4]
  double sigma_p = 0.0;            // sqrt(E ||p||_2^2)

  double sigma_v_sq(SigmaVReading reading) const {
    return reading == SigmaVReading::squared ? grad_norm_sq_mean
                                             : grad_norm_mean;
  }
};

/// Kinetic energy V = -log g of the auxiliary (momentum) law.
struct KineticModel : EnergyFunction {
  std::string id;
  std::function<Vector(Rng&)> sampler;
  MomentDescriptors moments;
};

// --- builtin zoo -----------------------------------------------------------

struct ModelParams {
  int dim = 1;
  double kappa = 10.0;          // gauss-aniso condition number
  int n = 100;                  // logistic-ridge data points
  double ridge = 1.0;           // logistic-ridge L2 weight
  double feature_scale = 2.0;   // logistic features ~ N(0, scale^2 / n)
  std::uint64_t data_seed = 7;  // logistic synthetic data
  double epsilon = 0.5;         // kin-logcosh weight
  double shift = 1.0;           // kin-logcosh offset b
};

inline constexpr std::string_view kGaussIso = "gauss-iso";
inline constexpr std::string_view kGaussAniso = "gauss-aniso";
inline constexpr std::string_view kLogisticRidge = "logistic-ridge";
inline constexpr std::string_view kKinGauss = "kin-gauss";
inline constexpr std::string_view kKinLogcosh = "kin-logcosh";

std::vector<std::string_view> potential_ids();
std::vector<std::string_view> kinetic_ids();

PotentialModel gaussian_potential(int dim);
/// U(q) = sum_i lambda_i q_i^2 / 2 with lambda log-spaced on [1, kappa];
/// a single coordinate gets lambda = kappa.
PotentialModel anisotropic_gaussian_potential(int dim, double kappa);
PotentialModel logistic_ridge_potential(int dim, int n, double ridge,
                                        double feature_scale,
                                        std::uint64_t data_seed);

KineticModel gaussian_kinetic(int dim);
/// V(p) = sum_i [p_i^2/2 + epsilon * log cosh(p_i - shift)].
KineticModel logcosh_kinetic(int dim, double epsilon, double shift);

PotentialModel make_potential(std::string_view id, const ModelParams& params);
KineticModel make_kinetic(std::string_view id, const ModelParams& params);

// --- operations ------------------------------------------------------------

struct CertificateReport {
  int trials = 0;
  int violations = 0;
  int non_finite = 0;
  double min_convexity_ratio = 0.0;  // min <dg, dx> / |dx|^2
  double max_lipschitz_ratio = 0.0;  // max |dg| / |dx|
  std::optional<Vector> first_violation;
};

/// Probes strong convexity and gradient Lipschitzness on random pairs.
CertificateReport verify_certificate(const EnergyFunction& fn, int trials,
                                     Rng& rng);

Vector sample_auxiliary(const KineticModel& kinetic, Rng& rng);

struct MomentEstimate {
  MomentDescriptors value;
  MomentDescriptors se;
  int trials = 0;
};

MomentEstimate estimate_moments(const KineticModel& kinetic, int trials,
                                Rng& rng);

/// Max over probes and coordinates of
/// |central difference - d_i W| / (1 + |d_i W|), step h = 1e-5.
double gradient_consistency_error(const EnergyFunction& fn, int probes,
                                  Rng& rng);

/// Max relative error |sum_i grad U_i - grad U| / (1 + |grad U|).
double component_sum_error(const PotentialModel& potential, int probes,
                           Rng& rng);

}  // namespace adhmc
