#include "adhmc/experiment.hpp"

#include "adhmc/stats.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

namespace adhmc {

using json = nlohmann::ordered_json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::sample: return "sample";
    case ExperimentKind::error_sweep: return "error-sweep";
    case ExperimentKind::converge: return "converge";
    case ExperimentKind::diagnose: return "diagnose";
    case ExperimentKind::advise: return "advise";
  }
  return "?";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view text) {
  for (auto kind : {ExperimentKind::sample, ExperimentKind::error_sweep,
                    ExperimentKind::converge, ExperimentKind::diagnose,
                    ExperimentKind::advise})
    if (text == to_string(kind)) return kind;
  return std::nullopt;
}

// --- parsing ---------------------------------------------------------------

namespace {

class Reader {
 public:
  std::vector<std::string> errors;

  // Returns the section object, reporting unknown keys; null if absent.
  const json* section(const json& root, const std::string& name,
                      const std::set<std::string>& allowed) {
    auto it = root.find(name);
    if (it == root.end()) return nullptr;
    if (!it->is_object()) {
      errors.push_back(name + ": expected an object");
      return nullptr;
    }
    for (const auto& [key, value] : it->items())
      if (!allowed.count(key)) errors.push_back(name + "." + key + ": unknown key");
    return &*it;
  }

  void number(const json* sec, const std::string& path, const std::string& key,
              double& out) {
    if (const json* v = find(sec, key)) {
      if (v->is_number()) out = v->get<double>();
      else errors.push_back(path + "." + key + ": expected a number");
    }
  }

  template <typename Int>
  bool integer(const json* sec, const std::string& path, const std::string& key,
               Int& out) {
    if (const json* v = find(sec, key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)) {
        out = static_cast<Int>(v->get<unsigned long long>());
        return true;
      }
      if (v->is_number_integer() && std::is_signed_v<Int>) {
        out = static_cast<Int>(v->get<long long>());
        return true;
      }
      errors.push_back(path + "." + key + ": expected " +
                       (std::is_signed_v<Int> ? "an integer" : "a non-negative integer"));
    }
    return false;
  }

  bool text(const json* sec, const std::string& path, const std::string& key,
            std::string& out) {
    if (const json* v = find(sec, key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
        return true;
      }
      errors.push_back(path + "." + key + ": expected a string");
    }
    return false;
  }

  static const json* find(const json* sec, const std::string& key) {
    if (!sec) return nullptr;
    auto it = sec->find(key);
    return it == sec->end() ? nullptr : &*it;
  }

  void check(bool ok, const std::string& path, const std::string& message) {
    if (!ok) errors.push_back(path + ": " + message);
  }
};

bool contains(const std::vector<std::string_view>& ids, const std::string& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::string join(const std::vector<std::string_view>& ids) {
  std::string out;
  for (auto id : ids) out += (out.empty() ? "" : ", ") + std::string(id);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::uint64_t> seed_override) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: expected a JSON object");

  Reader r;
  ExperimentConfig c;
  for (const auto& [key, value] : root.items())
    if (key != "model" && key != "oracle" && key != "sampler" &&
        key != "experiment" && key != "output")
      r.errors.push_back(key + ": unknown key");

  const json* model = r.section(root, "model",
                                {"potential", "kinetic", "dim", "kappa", "n", "ridge",
                                 "feature_scale", "data_seed", "epsilon", "shift"});
  r.text(model, "model", "potential", c.potential);
  r.text(model, "model", "kinetic", c.kinetic);
  r.integer(model, "model", "dim", c.params.dim);
  r.number(model, "model", "kappa", c.params.kappa);
  r.integer(model, "model", "n", c.params.n);
  r.number(model, "model", "ridge", c.params.ridge);
  r.number(model, "model", "feature_scale", c.params.feature_scale);
  r.integer(model, "model", "data_seed", c.params.data_seed);
  r.number(model, "model", "epsilon", c.params.epsilon);
  r.number(model, "model", "shift", c.params.shift);
  r.check(contains(potential_ids(), c.potential), "model.potential",
          "unknown model id '" + c.potential + "' (known: " + join(potential_ids()) + ")");
  r.check(contains(kinetic_ids(), c.kinetic), "model.kinetic",
          "unknown model id '" + c.kinetic + "' (known: " + join(kinetic_ids()) + ")");
  r.check(c.params.dim >= 1, "model.dim", "must be >= 1");
  r.check(c.params.kappa >= 1.0, "model.kappa", "must be >= 1");
  r.check(c.params.n >= 1, "model.n", "must be >= 1");
  r.check(c.params.ridge > 0.0, "model.ridge", "must be > 0");
  r.check(c.params.feature_scale > 0.0, "model.feature_scale", "must be > 0");
  r.check(c.params.epsilon >= 0.0 && std::isfinite(c.params.epsilon),
          "model.epsilon", "must be finite and >= 0");
  r.check(std::isfinite(c.params.shift), "model.shift", "must be finite");

  const json* oracle = r.section(root, "oracle", {"kind", "batch"});
  std::string oracle_kind = "exact";
  r.text(oracle, "oracle", "kind", oracle_kind);
  const bool has_batch = r.integer(oracle, "oracle", "batch", c.sampler.oracle.batch);
  if (oracle_kind == "exact") {
    c.sampler.oracle.kind = OracleKind::exact;
    r.check(!has_batch, "oracle.batch", "only applies to the minibatch oracle");
  } else if (oracle_kind == "minibatch") {
    c.sampler.oracle.kind = OracleKind::minibatch;
    if (!has_batch) {
      r.errors.push_back("oracle.batch: required for the minibatch oracle");
    } else {
      r.check(c.sampler.oracle.batch >= 1 && c.sampler.oracle.batch <= c.params.n,
              "oracle.batch", "must lie in [1, model.n]");
    }
    r.check(c.potential == kLogisticRidge, "oracle.kind",
            "minibatch needs a component-sum potential (logistic-ridge)");
  } else {
    r.errors.push_back("oracle.kind: unknown oracle '" + oracle_kind +
                       "' (known: exact, minibatch)");
  }

  const json* sampler = r.section(root, "sampler",
                                  {"algorithm", "eta", "steps", "n_steps", "seed"});
  std::string algorithm = "sghmc";
  r.text(sampler, "sampler", "algorithm", algorithm);
  if (algorithm == "sghmc") c.sampler.algorithm = Algorithm::sghmc;
  else if (algorithm == "adhmc") c.sampler.algorithm = Algorithm::adhmc;
  else r.errors.push_back("sampler.algorithm: unknown algorithm '" + algorithm +
                          "' (known: sghmc, adhmc)");
  r.number(sampler, "sampler", "eta", c.sampler.leapfrog.eta);
  r.integer(sampler, "sampler", "steps", c.sampler.leapfrog.steps);
  r.integer(sampler, "sampler", "n_steps", c.n_steps);
  r.check(c.sampler.leapfrog.eta > 0.0 && std::isfinite(c.sampler.leapfrog.eta),
          "sampler.eta", "must be > 0");
  r.check(c.sampler.leapfrog.steps >= 1, "sampler.steps", "K must be >= 1");
  r.check(c.n_steps >= 1, "sampler.n_steps", "must be >= 1");
  const bool has_seed = r.integer(sampler, "sampler", "seed", c.sampler.seed);
  if (seed_override) c.sampler.seed = *seed_override;
  else if (!has_seed && !Reader::find(sampler, "seed"))
    r.errors.push_back("sampler.seed: missing (a seed is mandatory)");

  const json* exp = r.section(root, "experiment",
                              {"kind", "etas", "samples", "rho", "delta", "n_chains",
                               "horizon", "draws", "burn_in", "sigma_v_reading"});
  std::string kind = "sample";
  r.text(exp, "experiment", "kind", kind);
  if (auto k = parse_experiment_kind(kind)) c.kind = *k;
  else r.errors.push_back("experiment.kind: unknown kind '" + kind +
                          "' (known: sample, error-sweep, converge, diagnose, advise)");
  if (const json* v = Reader::find(exp, "etas")) {
    bool ok = v->is_array();
    std::vector<double> etas;
    if (ok)
      for (const auto& e : *v) {
        if (!e.is_number()) ok = false;
        else etas.push_back(e.get<double>());
      }
    if (ok) c.etas = std::move(etas);
    else r.errors.push_back("experiment.etas: expected an array of numbers");
  }
  r.integer(exp, "experiment", "samples", c.samples);
  r.number(exp, "experiment", "rho", c.rho);
  r.number(exp, "experiment", "delta", c.delta);
  r.integer(exp, "experiment", "n_chains", c.n_chains);
  r.integer(exp, "experiment", "horizon", c.horizon);
  r.integer(exp, "experiment", "draws", c.draws);
  r.integer(exp, "experiment", "burn_in", c.burn_in);
  std::string reading = to_string(c.reading);
  r.text(exp, "experiment", "sigma_v_reading", reading);
  if (reading == to_string(SigmaVReading::squared)) c.reading = SigmaVReading::squared;
  else if (reading == to_string(SigmaVReading::first_power))
    c.reading = SigmaVReading::first_power;
  else r.errors.push_back("experiment.sigma_v_reading: expected 'squared' or 'first-power'");

  bool etas_ok = c.etas.size() >= 3;
  for (std::size_t i = 0; i < c.etas.size(); ++i)
    etas_ok = etas_ok && c.etas[i] > 0.0 && c.etas[i] <= 0.5 &&
              (i == 0 || c.etas[i] > c.etas[i - 1]);
  r.check(etas_ok, "experiment.etas",
          "need >= 3 strictly increasing values in (0, 0.5]");
  r.check(c.samples >= 1000, "experiment.samples", "must be >= 1000");
  r.check(c.rho > 0.0 && c.rho < 1.0, "experiment.rho", "must lie in (0, 1)");
  r.check(c.delta > 0.0 && c.delta < 1.0, "experiment.delta", "must lie in (0, 1)");
  r.check(c.n_chains >= 100, "experiment.n_chains", "must be >= 100");
  r.check(c.horizon >= 3, "experiment.horizon", "must be >= 3");
  r.check(c.draws >= 100, "experiment.draws", "must be >= 100");
  r.check(c.burn_in >= 0 && c.burn_in + 4 <= c.n_steps, "experiment.burn_in",
          "must lie in [0, sampler.n_steps - 4]");
  if (c.kind == ExperimentKind::converge) {
    r.check(c.potential == kGaussIso || c.potential == kGaussAniso,
            "model.potential", "converge needs a target with an exact sampler");
    r.check(c.params.dim <= 2, "model.dim", "converge needs d <= 2");
  }

  const json* output = r.section(root, "output", {"dir"});
  r.text(output, "output", "dir", c.output_dir);

  if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"potential", c.potential},
                {"kinetic", c.kinetic},
                {"dim", c.params.dim},
                {"kappa", c.params.kappa},
                {"n", c.params.n},
                {"ridge", c.params.ridge},
                {"feature_scale", c.params.feature_scale},
                {"data_seed", c.params.data_seed},
                {"epsilon", c.params.epsilon},
                {"shift", c.params.shift}};
  j["oracle"] = {{"kind", to_string(c.sampler.oracle.kind)}};
  if (c.sampler.oracle.kind == OracleKind::minibatch)
    j["oracle"]["batch"] = c.sampler.oracle.batch;
  j["sampler"] = {{"algorithm", to_string(c.sampler.algorithm)},
                  {"eta", c.sampler.leapfrog.eta},
                  {"steps", c.sampler.leapfrog.steps},
                  {"n_steps", c.n_steps},
                  {"seed", c.sampler.seed}};
  j["experiment"] = {{"kind", to_string(c.kind)},
                     {"etas", c.etas},
                     {"samples", c.samples},
                     {"rho", c.rho},
                     {"delta", c.delta},
                     {"n_chains", c.n_chains},
                     {"horizon", c.horizon},
                     {"draws", c.draws},
                     {"burn_in", c.burn_in},
                     {"sigma_v_reading", to_string(c.reading)}};
  j["output"] = {{"dir", c.output_dir}};
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& config) {
  return git_blob_hash(config_to_json(config));
}

std::string git_blob_hash(const std::string& body) {
  std::string blob = "blob " + std::to_string(body.size());
  blob.push_back('\0');
  blob += body;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

// --- running ---------------------------------------------------------------

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw ExperimentError("output", "cannot open " + path.string());
    out_ << header << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw ExperimentError("output", "write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct Context {
  const ExperimentConfig& config;
  const std::filesystem::path& dir;
  std::ostream& log;
  ExperimentOutcome outcome;
  std::vector<std::pair<std::string, std::string>> summary;  // metric, value

  void metric(const std::string& name, double value) {
    summary.emplace_back(name, num(value));
    log << "  " << name << " = " << num(value) << '\n';
  }
  void assertion(const std::string& name, bool ok) {
    summary.emplace_back(name, ok ? "pass" : "fail");
    log << "  " << name << ": " << (ok ? "pass" : "FAIL") << '\n';
    outcome.invariants_passed = outcome.invariants_passed && ok;
  }
  CsvFile open(const std::string& name, const std::string& header) {
    outcome.files.push_back(name);
    return CsvFile(dir / name, header);
  }
  void write_summary() {
    CsvFile f = open("summary.csv", "metric,value");
    for (const auto& [k, v] : summary) f.row({k, v});
    f.close();
  }
};

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ConfigError&) {
    throw;
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(name, e.what());
  }
}

void write_chain(Context& ctx, const ChainRecord& chain) {
  const int d = static_cast<int>(chain.positions.front().size());
  std::string header = "step";
  for (int i = 0; i < d; ++i) header += ",q_" + std::to_string(i);
  header += ",accepted,log_ratio,energy_gap";
  CsvFile f = ctx.open("chain.csv", header);
  for (std::size_t t = 0; t < chain.positions.size(); ++t) {
    std::vector<std::string> cells{std::to_string(t)};
    for (int i = 0; i < d; ++i) cells.push_back(num(chain.positions[t][i]));
    if (t == 0) {
      // initial state: no transition yet
      cells.insert(cells.end(), {"", "", ""});
    } else {
      cells.push_back(chain.accept_flags[t - 1] ? "1" : "0");
      cells.push_back(num(chain.log_ratios[t - 1]));
      cells.push_back(num(chain.energy_gaps[t - 1]));
    }
    f.row(cells);
  }
  f.close();
}

void run_sample(Context& ctx, const PotentialModel& potential,
                const KineticModel& kinetic, const GradientOracle& oracle) {
  const auto& c = ctx.config;
  Rng rng = make_stream(c.sampler.seed, "chain");
  const ChainRecord chain = stage("sample", [&] {
    return run_chain(Vector::Zero(potential.dim), potential, kinetic, oracle,
                     c.sampler, c.n_steps, rng);
  });
  write_chain(ctx, chain);
  ctx.metric("steps", static_cast<double>(chain.steps()));
  ctx.metric("acceptance_rate", chain.acceptance_rate());
  ctx.metric("flagged_steps", static_cast<double>(
                                  std::count(chain.flagged.begin(), chain.flagged.end(), true)));
  for (int i = 0; i < potential.dim; ++i) {
    std::vector<double> xs;
    for (std::size_t t = 1; t < chain.positions.size(); ++t)
      xs.push_back(chain.positions[t][i]);
    ctx.metric("mean_q_" + std::to_string(i), stats::mean(xs));
    if (xs.size() > 1) ctx.metric("var_q_" + std::to_string(i), stats::variance(xs));
  }
}

void run_error_sweep(Context& ctx, const PotentialModel& potential,
                     const KineticModel& kinetic, const GradientOracle& oracle) {
  const auto& c = ctx.config;
  Rng rng = make_stream(c.sampler.seed, "sweep");
  const bool stochastic = oracle.kind() != OracleKind::exact;
  const ErrorSweepResult sweep = stage("error-sweep", [&] {
    return one_step_error_sweep(potential, kinetic, c.etas, c.samples, rng,
                                stochastic ? &oracle : nullptr);
  });
  CsvFile f = ctx.open("sweep.csv", "eta,q_err,q_se,p_err,p_se,h_err,h_se");
  for (std::size_t i = 0; i < sweep.etas.size(); ++i)
    f.row({num(sweep.etas[i]), num(sweep.q_errors[i]), num(sweep.q_ses[i]),
           num(sweep.p_errors[i]), num(sweep.p_ses[i]), num(sweep.h_errors[i]),
           num(sweep.h_ses[i])});
  f.close();
  const std::pair<const char*, SlopeFit> slopes[] = {
      {"q", sweep.q_slope}, {"p", sweep.p_slope}, {"h", sweep.h_slope},
      {"uv", sweep.uv_slope}};
  for (const auto& [name, fit] : slopes) {
    ctx.metric(std::string(name) + "_slope", fit.slope);
    ctx.metric(std::string(name) + "_slope_se", fit.se);
  }
  for (const auto& [name, fit] : slopes)
    if (std::string(name) != "uv")
      ctx.assertion(std::string(name) + "_slope_in_[2.7,3.3]",
                    fit.slope >= 2.7 && fit.slope <= 3.3);
}

void run_converge(Context& ctx, const PotentialModel& potential,
                  const KineticModel& kinetic, const GradientOracle& oracle) {
  const auto& c = ctx.config;
  Rng rng = make_stream(c.sampler.seed, "converge");
  TvDecayOptions options;
  options.n_chains = c.n_chains;
  options.horizon = c.horizon;
  options.reading = c.reading;
  const TvDecayReport report = stage("converge", [&] {
    return tv_decay_estimate(potential, kinetic, oracle, c.sampler, options, rng);
  });
  CsvFile f = ctx.open("tv.csv", "t,tv");
  for (std::size_t t = 0; t < report.tv.size(); ++t)
    f.row({std::to_string(t), num(report.tv[t])});
  f.close();
  ctx.metric("noise_floor", report.noise_floor);
  ctx.metric("fit_first", report.fit_first);
  ctx.metric("fit_last", report.fit_last);
  ctx.metric("contraction", report.contraction);
  ctx.metric("contraction_se", report.contraction_se);
  ctx.metric("theoretical_rate", report.theoretical);
  ctx.metric("theoretical_rate_alt", report.theoretical_alt);
  if (!report.note.empty()) ctx.log << "  note: " << report.note << '\n';
  ctx.assertion("contraction_within_rate", report.passed);
}

void run_diagnose(Context& ctx, const PotentialModel& potential,
                  const KineticModel& kinetic, const GradientOracle& oracle) {
  const auto& c = ctx.config;
  Rng chain_rng = make_stream(c.sampler.seed, "chain");
  Rng moment_rng = make_stream(c.sampler.seed, "moments");
  const ChainRecord chain = stage("diagnose.chain", [&] {
    Rng start_rng = fork(chain_rng);
    const Vector q0 = stationary_positions(potential, 1, start_rng).front();
    return run_chain(q0, potential, kinetic, oracle, c.sampler, c.n_steps, chain_rng);
  });
  write_chain(ctx, chain);
  ctx.metric("acceptance_rate", chain.acceptance_rate());

  const std::pair<std::string, TestFunction> functions[] = {
      {"q1", [](const Vector& q) { return q[0]; }},
      {"q1sq", [](const Vector& q) { return q[0] * q[0]; }},
      {"normsq", [](const Vector& q) { return q.squaredNorm(); }}};
  for (const auto& [name, h] : functions) {
    const DirichletEstimate est =
        stage("diagnose.dirichlet", [&] { return dirichlet_form_estimate(chain, h, c.burn_in); });
    ctx.metric("dirichlet_" + name + "_form", est.form_value);
    ctx.metric("dirichlet_" + name + "_variance", est.variance);
    ctx.metric("dirichlet_" + name + "_lag1", est.lag1_autocorrelation);
    if (est.ratio) {
      ctx.metric("dirichlet_" + name + "_ratio", *est.ratio);
      ctx.metric("dirichlet_" + name + "_ratio_se", est.ratio_se);
      ctx.assertion("dirichlet_" + name + "_identity",
                    std::abs(*est.ratio - (1.0 - est.lag1_autocorrelation)) <=
                        3.0 * est.ratio_se);
    } else {
      ctx.log << "  dirichlet_" << name << ": variance indistinguishable from 0\n";
    }
  }

  for (int p : {1, 2}) {
    const GradientMomentReport m = stage("diagnose.moments", [&] {
      return gradient_moment_check(potential, kinetic, p, c.draws, moment_rng);
    });
    const std::string tag = "grad_moment_p" + std::to_string(p);
    ctx.metric(tag + "_U", m.potential.estimate);
    ctx.metric(tag + "_U_bound", m.potential.bound);
    ctx.metric(tag + "_V", m.kinetic.estimate);
    ctx.metric(tag + "_V_bound", m.kinetic.bound);
    ctx.assertion(tag + "_U_within_bound", m.potential.passed);
    ctx.assertion(tag + "_V_within_bound", m.kinetic.passed);
  }
  const QuadraticFormReport qf = stage("diagnose.quadratic-form", [&] {
    return quadratic_form_moment_check(potential, kinetic, c.draws, moment_rng);
  });
  if (qf.precondition_ok) {
    ctx.metric("quadratic_form", qf.estimate);
    ctx.metric("quadratic_form_bound", qf.bound);
    ctx.assertion("quadratic_form_within_bound", qf.passed);
  } else {
    ctx.log << "  quadratic form check skipped: " << qf.precondition_note << '\n';
  }
}

void run_advise(Context& ctx, const PotentialModel& potential,
                const KineticModel& kinetic, const GradientOracle& oracle) {
  const auto& c = ctx.config;
  Rng rng = make_stream(c.sampler.seed, "advise");
  BoundConstants constants = stage("advise", [&] {
    return acceptance_bound_constants(bound_inputs(potential, kinetic, oracle, rng));
  });
  ctx.metric("sigma_q", constants.inputs.sigma_q);
  ctx.metric("sigma_p", constants.inputs.sigma_p);
  ctx.metric("a3", constants.a3);
  ctx.metric("a3_sg", constants.a3_sg);
  BoundConstants used = constants;
  if (oracle.kind() != OracleKind::exact) used.a3 = constants.a3_sg;
  const double eta = stage("advise", [&] {
    return step_size_advisor(used, c.sampler.leapfrog.steps, c.rho, c.delta);
  });
  ctx.metric("eta", eta);
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir,
                                 std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ExperimentError("output", "cannot create " + out_dir.string() + ": " + ec.message());

  const PotentialModel potential =
      stage("model", [&] { return make_potential(config.potential, config.params); });
  const KineticModel kinetic =
      stage("model", [&] { return make_kinetic(config.kinetic, config.params); });
  const GradientOracle oracle = stage("oracle", [&] {
    if (config.sampler.oracle.kind == OracleKind::minibatch) {
      Rng rng = make_stream(config.sampler.seed, "oracle");
      return minibatch_oracle(potential, config.sampler.oracle.batch, rng);
    }
    return exact_oracle(potential);
  });

  Context ctx{config, out_dir, log, {}, {}};
  log << to_string(config.kind) << ": " << config.potential << " x "
      << config.kinetic << ", d = " << config.params.dim << ", seed = "
      << config.sampler.seed << '\n';
  switch (config.kind) {
    case ExperimentKind::sample: run_sample(ctx, potential, kinetic, oracle); break;
    case ExperimentKind::error_sweep: run_error_sweep(ctx, potential, kinetic, oracle); break;
    case ExperimentKind::converge: run_converge(ctx, potential, kinetic, oracle); break;
    case ExperimentKind::diagnose: run_diagnose(ctx, potential, kinetic, oracle); break;
    case ExperimentKind::advise: run_advise(ctx, potential, kinetic, oracle); break;
  }
  ctx.write_summary();

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json meta;
  meta["version"] = kVersion;
  meta["seed"] = config.sampler.seed;
  meta["potential"] = config.potential;
  meta["kinetic"] = config.kinetic;
  meta["experiment"] = to_string(config.kind);
  meta["config_hash"] = config_hash(config);
  meta["wall_time_seconds"] = wall;
  meta["invariants_passed"] = ctx.outcome.invariants_passed;
  meta["config"] = json::parse(config_to_json(config));
  {
    std::ofstream out(out_dir / "meta.json", std::ios::binary);
    out << meta.dump(2) << '\n';
    if (!out) throw ExperimentError("output", "write failed for meta.json");
  }
  ctx.outcome.files.push_back("meta.json");
  log << (ctx.outcome.invariants_passed ? "all asserted invariants pass"
                                        : "asserted invariant FAILED")
      << '\n';
  return ctx.outcome;
}

}  // namespace adhmc
