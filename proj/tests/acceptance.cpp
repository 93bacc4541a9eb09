// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// `acceptance 3 5` runs only criteria 3 and 5.

#include "adhmc/diagnostics.hpp"
#include "adhmc/experiment.hpp"
#include "adhmc/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace adhmc;

namespace {

constexpr std::uint64_t kSeed = 20240601;
const std::vector<double> kEtas{0.02, 0.04, 0.08, 0.16};

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "  [fail] " << what << '\n';
    }
  }
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

bool slope_ok(const SlopeFit& f) { return f.slope >= 2.7 && f.slope <= 3.3; }

ModelParams params_for(int d) {
  ModelParams p;
  p.dim = d;
  return p;
}

// 1. leapfrog order
Verdict leapfrog_order() {
  Verdict v;
  const std::pair<std::string_view, std::string_view> pairs[] = {
      {kGaussIso, kKinGauss}, {kGaussIso, kKinLogcosh}, {kLogisticRidge, kKinGauss}};
  for (const auto& [pid, kid] : pairs) {
    for (int d : {1, 2, 5}) {
      const auto u = make_potential(pid, params_for(d));
      const auto k = make_kinetic(kid, params_for(d));
      Rng rng = make_stream(kSeed, "c1", static_cast<std::uint64_t>(d));
      const auto r = one_step_error_sweep(u, k, kEtas, 10000, rng);
      const std::string tag = std::string(pid) + " x " + std::string(kid) + " d=" + std::to_string(d);
      v.detail << "  " << tag << ": slopes q " << fmt(r.q_slope.slope) << ", p "
               << fmt(r.p_slope.slope) << ", H " << fmt(r.h_slope.slope) << '\n';
      v.require(slope_ok(r.q_slope) && slope_ok(r.p_slope) && slope_ok(r.h_slope),
                tag + " slope outside [2.7, 3.3]");
    }
  }
  return v;
}

// 2. stochastic-gradient order and position error bound
Verdict stochastic_order() {
  Verdict v;
  for (int d : {1, 2, 5}) {
    ModelParams p = params_for(d);
    const auto u = make_potential(kLogisticRidge, p);
    const auto k = make_kinetic(kKinGauss, p);
    Rng rng = make_stream(kSeed, "c2", static_cast<std::uint64_t>(d));
    Rng oracle_rng = fork(rng);
    const auto oracle = minibatch_oracle(u, 10, oracle_rng);
    const auto r = one_step_error_sweep(u, k, kEtas, 10000, rng, &oracle);
    BoundInputs in;
    in.d = d;
    in.potential = u.certificate;
    in.kinetic = k.certificate;
    in.oracle = oracle.moments();
    in.third_bar = oracle.bounds().third_bar;
    const double coef = leapfrog_error_coefficients_sg(in).position;
    const std::string tag = "logistic-ridge B=10 d=" + std::to_string(d);
    v.detail << "  " << tag << ": slopes q " << fmt(r.q_slope.slope) << ", p "
             << fmt(r.p_slope.slope) << ", H " << fmt(r.h_slope.slope)
             << "; max q_err/bound " ;
    double worst = 0.0;
    for (std::size_t i = 0; i < kEtas.size(); ++i) {
      const double bound = coef * std::pow(kEtas[i], 3);
      worst = std::max(worst, r.q_errors[i] / bound);
      v.require(r.q_errors[i] <= bound, tag + " q error exceeds bound at eta=" + fmt(kEtas[i]));
    }
    v.detail << fmt(worst) << '\n';
    v.require(slope_ok(r.q_slope) && slope_ok(r.p_slope) && slope_ok(r.h_slope),
              tag + " slope outside [2.7, 3.3]");
  }
  return v;
}

// 3. acceptance bound and advised step size
Verdict acceptance_bound() {
  Verdict v;
  const auto u = gaussian_potential(1);
  const auto k = gaussian_kinetic(1);
  const auto oracle = exact_oracle(u);
  Rng rng = make_stream(kSeed, "c3");
  const auto r = energy_error_bound_check(u, k, oracle, kEtas, 10000, rng);
  const double a3 = 7.0 * std::sqrt(3.0) / 6.0;
  v.require(std::abs(r.constant_used - a3) <= 1e-12, "A3 differs from 7 sqrt(3)/6");
  v.detail << "  A3 = " << fmt(r.constant_used, 10) << "; E|dU|+E|dV| / (A3 eta^3):";
  for (std::size_t i = 0; i < kEtas.size(); ++i)
    v.detail << ' ' << fmt(r.sweep.uv_errors[i] / r.bounds[i], 3);
  v.detail << '\n';
  v.require(r.bound_ok, "measured energy error above A3 eta^3 + 4 SE");

  const double eta = step_size_advisor(r.constants, 10, 0.9, 0.1);
  SamplerConfig cfg;
  cfg.leapfrog = {eta, 10, Direction::forward};
  cfg.algorithm = Algorithm::sghmc;
  Rng chain_rng = make_stream(kSeed, "c3-chain");
  const Vector q0 = u.exact_sampler(chain_rng);
  const auto chain = run_chain(q0, u, k, oracle, cfg, 10000, chain_rng);
  int high = 0;
  for (double lr : chain.log_ratios) high += std::exp(lr) >= 0.9;
  const double frac = static_cast<double>(high) / chain.steps();
  v.detail << "  advised eta = " << fmt(eta, 6) << "; steps with acceptance >= 0.9: "
           << fmt(100 * frac) << "%\n";
  v.require(frac >= 0.9, "fewer than 90% of steps accept with probability >= 0.9");
  return v;
}

// 4. stationarity
Verdict stationarity() {
  Verdict v;
  const auto u = gaussian_potential(2);
  const auto oracle = exact_oracle(u);
  constexpr int kSteps = 100000, kThin = 10;
  const double crit = stats::ks_critical_value(kSteps / kThin, 0.01);
  for (auto alg : {Algorithm::sghmc, Algorithm::adhmc}) {
    for (auto kid : {kKinGauss, kKinLogcosh}) {
      const auto k = make_kinetic(kid, params_for(2));
      SamplerConfig cfg;
      cfg.leapfrog = {0.1, 10, Direction::forward};
      cfg.algorithm = alg;
      Rng rng = make_stream(kSeed, std::string("c4-") + to_string(alg) + std::string(kid));
      const Vector q0 = u.exact_sampler(rng);
      const auto chain = run_chain(q0, u, k, oracle, cfg, kSteps, rng);
      Matrix cov = Matrix::Zero(2, 2);
      Vector mean = Vector::Zero(2);
      for (std::size_t t = 1; t < chain.positions.size(); ++t) mean += chain.positions[t];
      mean /= kSteps;
      for (std::size_t t = 1; t < chain.positions.size(); ++t) {
        const Vector c = chain.positions[t] - mean;
        cov += c * c.transpose();
      }
      cov /= kSteps - 1;
      const double frob = (cov - Matrix::Identity(2, 2)).norm();
      double ks_max = 0.0;
      for (int i = 0; i < 2; ++i) {
        std::vector<double> xs;
        for (std::size_t t = kThin; t < chain.positions.size(); t += kThin)
          xs.push_back(chain.positions[t][i]);
        ks_max = std::max(ks_max, stats::ks_statistic(xs, stats::normal_cdf));
      }
      const std::string tag = std::string(to_string(alg)) + " x " + std::string(kid);
      v.detail << "  " << tag << ": |cov - I|_F " << fmt(frob) << ", max KS " << fmt(ks_max)
               << " (critical " << fmt(crit) << "), acceptance " << fmt(chain.acceptance_rate())
               << '\n';
      v.require(frob <= 0.05, tag + " covariance off by more than 0.05");
      v.require(ks_max < crit, tag + " KS above the 1% critical value");
    }
  }
  return v;
}

// 5. AD-HMC reversibility with an asymmetric kinetic
Verdict reversibility() {
  Verdict v;
  const auto u = gaussian_potential(1);
  const auto k = logcosh_kinetic(1, 0.5, 1.0);
  SamplerConfig cfg;
  cfg.leapfrog = {0.2, 5, Direction::forward};
  cfg.algorithm = Algorithm::adhmc;
  Rng rng = make_stream(kSeed, "c5");
  const auto r = reversibility_check(u, k, exact_oracle(u), cfg, 100000, rng);
  v.detail << "  bins " << r.bins << ", dof " << r.dof << ", chi2 " << fmt(r.statistic)
           << ", p = " << fmt(r.p_value) << ", sparse pairs dropped " << r.sparse_excluded << '\n';
  v.require(r.passed, "symmetry test rejects at p <= 0.001");
  return v;
}

// 6. geometric TV decay
Verdict tv_decay() {
  Verdict v;
  const auto u = gaussian_potential(1);
  const auto k = gaussian_kinetic(1);
  SamplerConfig cfg;
  cfg.leapfrog = {0.2, 5, Direction::forward};
  cfg.algorithm = Algorithm::sghmc;
  TvDecayOptions options;
  options.n_chains = 10000;
  Rng rng = make_stream(kSeed, "c6");
  const auto r = tv_decay_estimate(u, k, exact_oracle(u), cfg, options, rng);
  v.detail << "  TV:";
  for (int t = 0; t <= std::min<int>(8, static_cast<int>(r.tv.size()) - 1); ++t)
    v.detail << ' ' << fmt(r.tv[t], 3);
  v.detail << " ... floor " << fmt(r.noise_floor, 3) << "; fit t=" << r.fit_first << ".."
           << r.fit_last << ", c_emp = " << fmt(r.contraction) << " +- " << fmt(r.contraction_se)
           << "\n  rate bound " << fmt(r.theoretical, 6) << " (E|gV|^2), "
           << fmt(r.theoretical_alt, 6) << " (E|gV|)\n";
  if (!r.note.empty()) v.detail << "  note: " << r.note << '\n';
  v.require(r.passed, "contraction above the E|gV|^2 rate + 2 SE");
  v.require(r.passed_alt, "contraction above the E|gV| rate + 2 SE");
  return v;
}

// 7. gradient moment bounds
Verdict moment_bounds() {
  Verdict v;
  for (int d : {1, 2, 5}) {
    for (auto pid : potential_ids()) {
      for (auto kid : kinetic_ids()) {
        // Each kinetic is checked once per d, alongside gauss-iso.
        if (kid != kKinGauss && pid != kGaussIso) continue;
        const auto u = make_potential(pid, params_for(d));
        const auto k = make_kinetic(kid, params_for(d));
        for (int p : {1, 2}) {
          Rng rng = make_stream(kSeed, "c7-" + std::string(pid) + std::string(kid),
                                static_cast<std::uint64_t>(10 * d + p));
          const auto r = gradient_moment_check(u, k, p, 10000, rng);
          const std::string tag = std::string(pid) + "/" + std::string(kid) + " d=" +
                                  std::to_string(d) + " p=" + std::to_string(p);
          v.detail << "  " << tag << ": U " << fmt(r.potential.estimate) << " <= "
                   << fmt(r.potential.bound) << ", V " << fmt(r.kinetic.estimate) << " <= "
                   << fmt(r.kinetic.bound) << '\n';
          v.require(r.potential.passed, tag + " potential moment above bound");
          v.require(r.kinetic.passed, tag + " kinetic moment above bound");
        }
      }
    }
  }
  return v;
}

// 8. Dirichlet identity
Verdict dirichlet() {
  Verdict v;
  const auto u = gaussian_potential(2);
  const auto k = gaussian_kinetic(2);
  SamplerConfig cfg;
  cfg.leapfrog = {0.2, 5, Direction::forward};
  Rng rng = make_stream(kSeed, "c8");
  const Vector q0 = u.exact_sampler(rng);
  const auto chain = run_chain(q0, u, k, exact_oracle(u), cfg, 100000, rng);
  const std::pair<std::string, TestFunction> hs[] = {
      {"q1", [](const Vector& q) { return q[0]; }},
      {"q1^2", [](const Vector& q) { return q[0] * q[0]; }},
      {"|q|^2", [](const Vector& q) { return q.squaredNorm(); }}};
  for (const auto& [name, h] : hs) {
    const auto e = dirichlet_form_estimate(chain, h, 0);
    if (!e.ratio) {
      v.require(false, name + ": variance indistinguishable from zero");
      continue;
    }
    const double target = 1.0 - e.lag1_autocorrelation;
    v.detail << "  h = " << name << ": E/Var " << fmt(*e.ratio) << " +- " << fmt(e.ratio_se)
             << ", 1 - rho1 " << fmt(target) << '\n';
    v.require(std::abs(*e.ratio - target) <= 3 * e.ratio_se, name + ": identity off by > 3 SE");
  }
  return v;
}

// 9. mechanical identities
Verdict mechanical() {
  Verdict v;
  Rng rng = make_stream(kSeed, "c9");
  std::normal_distribution<double> normal;
  double worst_inverse = 0.0, worst_det = 0.0;
  for (auto pid : potential_ids()) {
    for (auto kid : kinetic_ids()) {
      for (int d : {1, 2, 5}) {
        const auto u = make_potential(pid, params_for(d));
        const auto k = make_kinetic(kid, params_for(d));
        for (int trial = 0; trial < 20; ++trial) {
          const PhaseState s(Vector::NullaryExpr(d, [&] { return normal(rng); }),
                             Vector::NullaryExpr(d, [&] { return normal(rng); }));
          const auto f = leapfrog_step(s, u.gradient, k.gradient, 0.1, Direction::forward);
          const auto b = leapfrog_step(f, u.gradient, k.gradient, 0.1, Direction::backward);
          worst_inverse = std::max({worst_inverse, (b.q - s.q).lpNorm<Eigen::Infinity>(),
                                    (b.p - s.p).lpNorm<Eigen::Infinity>()});
          if (trial >= 3) continue;
          Vector z(2 * d);
          z << s.q, s.p;
          Matrix jac(2 * d, 2 * d);
          const double h = 1e-5;
          for (int j = 0; j < 2 * d; ++j) {
            Vector e = Vector::Zero(2 * d);
            e[j] = h;
            const auto plus = leapfrog_step(PhaseState((z + e).head(d), (z + e).tail(d)),
                                            u.gradient, k.gradient, 0.1, Direction::forward);
            const auto minus = leapfrog_step(PhaseState((z - e).head(d), (z - e).tail(d)),
                                             u.gradient, k.gradient, 0.1, Direction::forward);
            Vector col(2 * d);
            col << plus.q - minus.q, plus.p - minus.p;
            jac.col(j) = col / (2 * h);
          }
          worst_det = std::max(worst_det, std::abs(std::abs(jac.determinant()) - 1.0));
        }
      }
    }
  }
  double worst_quad = 0.0;
  const std::vector<std::pair<std::function<double(double)>, std::function<double(double)>>> polys{
      {[](double) { return 3.0; }, [](double) { return 0.0; }},
      {[](double t) { return 2.0 - t; }, [](double) { return -1.0; }},
      {[](double t) { return 1.0 + t - 2.0 * t * t + 0.5 * t * t * t; },
       [](double t) { return 1.0 - 4.0 * t + 1.5 * t * t; }},
      {[](double t) { return std::pow(t, 6) - t * t; },
       [](double t) { return 6.0 * std::pow(t, 5) - 2.0 * t; }}};
  for (const auto& [f, df] : polys)
    for (double eta : {0.02, 0.16, 0.5, 1.0})
      worst_quad = std::max(worst_quad, quadrature_identity_residual(f, df, eta, 8));
  v.detail << "  max |B(F(x)) - x| " << fmt(worst_inverse) << ", max ||det J| - 1| "
           << fmt(worst_det) << ", max quadrature residual " << fmt(worst_quad) << '\n';
  v.require(worst_inverse <= 1e-12, "backward o forward differs from identity");
  v.require(worst_det <= 1e-6, "Jacobian determinant differs from 1");
  v.require(worst_quad < 1e-10, "quadrature identity residual too large");
  return v;
}

// 10. reproducibility
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict reproducibility() {
  Verdict v;
  const std::string configs[] = {
      R"({"model": {"potential": "gauss-iso", "kinetic": "kin-logcosh", "dim": 2},
          "sampler": {"algorithm": "adhmc", "eta": 0.2, "steps": 5, "n_steps": 5000, "seed": 17}})",
      R"({"model": {"potential": "logistic-ridge", "kinetic": "kin-gauss", "dim": 2},
          "oracle": {"kind": "minibatch", "batch": 10},
          "sampler": {"eta": 0.05, "steps": 5, "n_steps": 2000, "seed": 17}})",
      R"({"model": {"potential": "gauss-aniso", "kinetic": "kin-gauss", "dim": 2},
          "sampler": {"seed": 17}, "experiment": {"kind": "error-sweep", "samples": 2000}})"};
  const auto root = std::filesystem::temp_directory_path() / "adhmc_acceptance_repro";
  int compared = 0;
  for (std::size_t i = 0; i < std::size(configs); ++i) {
    const auto config = parse_config(configs[i]);
    const auto a = root / (std::to_string(i) + "a"), b = root / (std::to_string(i) + "b");
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
    std::ostringstream log;
    const auto out = run_experiment(config, a, log);
    run_experiment(config, b, log);
    for (const auto& f : out.files) {
      if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
      const std::string x = slurp(a / f), y = slurp(b / f);
      v.require(!x.empty() && x == y, to_string(config.kind) + std::string(": ") + f + " differs");
      ++compared;
    }
  }
  std::filesystem::remove_all(root);
  v.detail << "  " << compared << " CSV files compared byte for byte\n";
  return v;
}

struct Criterion {
  int id;
  const char* title;
  Verdict (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion criteria[] = {
      {1, "leapfrog one-step error order", leapfrog_order},
      {2, "stochastic-gradient error order and bound", stochastic_order},
      {3, "acceptance bound and advised step size", acceptance_bound},
      {4, "stationarity on a 2-d Gaussian", stationarity},
      {5, "AD-HMC reversibility, asymmetric kinetic", reversibility},
      {6, "geometric TV decay", tv_decay},
      {7, "gradient moment bounds", moment_bounds},
      {8, "Dirichlet form identity", dirichlet},
      {9, "mechanical identities", mechanical},
      {10, "byte-level reproducibility", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "  [error] " << e.what() << '\n';
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title
              << "  (" << fmt(secs, 3) << " s)\n"
              << v.detail.str() << std::flush;
    failures += !v.pass;
  }
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail")
            << '\n';
  return failures == 0 ? 0 : 1;
}
