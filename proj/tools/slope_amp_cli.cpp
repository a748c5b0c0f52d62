// slope_amp: command-line front end.
//
//   slope_amp <command> [--config file.json] [--seed N] [--threads K] [--out DIR]
//
// Commands: prox, solve, se, calibrate, bench, mse. Parameters come from a
// flat JSON config whose optional "command" key must match the subcommand.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slope_amp/io.hpp"
#include "slope_amp/slope_amp.hpp"

namespace {

using nlohmann::json;
using slope_amp::Index;
using slope_amp::InvalidArgument;
using slope_amp::LambdaSeq;
using slope_amp::Matrix;
using slope_amp::PriorSpec;
using slope_amp::Vector;
namespace fs = std::filesystem;
namespace io = slope_amp::io;

constexpr const char* kSeedEnv = "SLOPE_AMP_SEED";

struct KeySpec {
  const char* name;
  const char* fallback;
  const char* commands;  // space separated; "*" for all
  const char* help;
};

// Every accepted config key with its default. Printed by --help.
const std::vector<KeySpec> kKeys = {
    {"command", "-", "*", "subcommand name; must match the one on the command line"},
    {"seed", "0", "*", "base seed (overridden by $SLOPE_AMP_SEED, then by --seed)"},
    {"threads", "all cores", "*", "worker cap; results do not depend on it"},
    {"out", ".", "*", "output directory"},
    {"input", "-", "prox", "vector file to threshold"},
    {"theta", "-", "prox", "non-increasing threshold file"},
    {"n", "500", "solve bench mse", "rows of the generated design"},
    {"p", "1000", "solve bench mse", "columns of the generated design"},
    {"design", "-", "solve", "design matrix file (with sidecar shape); replaces generation"},
    {"response", "-", "solve", "response vector file, required with design"},
    {"sigma_w", "0", "solve se calibrate bench mse", "noise standard deviation"},
    {"prior", "bernoulli_gaussian", "solve se calibrate bench mse",
     "bernoulli_gaussian | point_mass | empirical"},
    {"prior_epsilon", "0.1", "solve se calibrate bench mse", "Bernoulli-Gaussian sparsity"},
    {"prior_sigma", "1", "solve se calibrate bench mse", "Bernoulli-Gaussian spread"},
    {"prior_value", "0", "solve se calibrate bench mse", "point-mass location"},
    {"prior_sample", "-", "solve se calibrate bench mse", "empirical prior sample file"},
    {"lambda", "bhq", "solve calibrate bench mse",
     "penalty shape: bhq | constant | linear | explicit | file"},
    {"lambda_q", "0.1", "solve calibrate bench mse", "bhq level q"},
    {"lambda_scale", "0.15", "solve calibrate bench mse", "bhq multiplier"},
    {"lambda_value", "1", "solve calibrate bench mse", "constant penalty level"},
    {"lambda_first", "-", "solve calibrate bench mse", "linear: first entry"},
    {"lambda_last", "-", "solve calibrate bench mse", "linear: last entry"},
    {"lambda_values", "-", "solve calibrate bench mse", "explicit: JSON array"},
    {"lambda_file", "-", "solve calibrate bench mse", "file: vector file"},
    {"alpha", "-", "solve se bench",
     "threshold direction, same shapes as lambda; solve and bench calibrate from lambda "
     "when absent"},
    {"alpha_q", "0.1", "solve se bench", "bhq level q"},
    {"alpha_scale", "1", "solve se bench", "bhq multiplier"},
    {"alpha_value", "2", "solve se bench", "constant level"},
    {"alpha_first", "-", "solve se bench", "linear: first entry"},
    {"alpha_last", "-", "solve se bench", "linear: last entry"},
    {"alpha_values", "-", "solve se bench", "explicit: JSON array"},
    {"alpha_file", "-", "solve se bench", "file: vector file"},
    {"delta", "0.5", "se calibrate", "n / p (solve, bench and mse use the instance ratio)"},
    {"p_se", "1000", "se calibrate", "state-evolution dimension (others use p)"},
    {"mc_reps", "64", "solve se calibrate bench mse", "Monte-Carlo replicates"},
    {"fp_tol", "1e-6", "solve se calibrate bench mse", "fixed-point relative tolerance"},
    {"max_fp_iter", "200", "solve se calibrate bench mse", "fixed-point iteration cap"},
    {"tau0_sq", "E[B^2]/delta + sigma_w^2", "se", "initial tau^2"},
    {"iterations", "0", "se", "fixed trajectory length; 0 iterates to the fixed point"},
    {"rel_tol", "1e-3", "solve calibrate bench mse", "calibration bisection tolerance"},
    {"max_iter", "500", "solve", "AMP iteration cap"},
    {"opt_tol", "1e-12", "solve", "AMP stopping tolerance on ||b^t - b^{t-1}||^2 / p"},
    {"threshold_mode", "empirical", "solve",
     "empirical (tau = ||z|| / sqrt(n)) | state_evolution (precomputed schedule)"},
    {"reference", "false", "solve", "also solve to high accuracy and report opt_error"},
    {"thresholds", "[1e-2,1e-3,1e-4,1e-5,1e-6]", "bench", "opt_error thresholds"},
    {"step_rule", "frobenius", "bench", "ISTA/FISTA step 1/L: frobenius | spectral"},
    {"trace_stride", "1", "bench", "keep every k-th trace row"},
    {"amp_max_iter", "1000", "bench", "AMP iteration cap"},
    {"fista_max_iter", "50000", "bench", "FISTA iteration cap"},
    {"ista_max_iter", "100000", "bench", "ISTA iteration cap"},
    {"n_seeds", "20", "mse", "number of instances"},
    {"solver_tol", "1e-12", "mse", "FISTA stopping tolerance"},
};

bool key_allowed(const KeySpec& k, const std::string& command) {
  const std::string cmds = k.commands;
  if (cmds == "*") return true;
  std::istringstream in(cmds);
  std::string c;
  while (in >> c) {
    if (c == command) return true;
  }
  return false;
}

std::string help_footer() {
  std::ostringstream out;
  out << "\nConfig keys (flat JSON; unknown keys are rejected):\n";
  for (const auto& k : kKeys) {
    out << "  " << k.name << " [" << k.commands << "] default " << k.fallback << "\n      "
        << k.help << "\n";
  }
  out << "\nExit codes: 0 ok, 2 config error, 3 numeric failure, 4 non-convergence,\n"
         "5 calibration error (including alpha below A_min), 1 other.\n";
  return out.str();
}

class Config {
 public:
  Config(json j, std::string command) : j_(std::move(j)), command_(std::move(command)) {
    if (!j_.is_object()) throw InvalidArgument("config: top level must be a JSON object");
    for (const auto& [key, value] : j_.items()) {
      const KeySpec* spec = nullptr;
      for (const auto& k : kKeys) {
        if (key == k.name) spec = &k;
      }
      if (!spec) throw InvalidArgument("config: unknown key '" + key + "'");
      if (!key_allowed(*spec, command_)) {
        throw InvalidArgument("config: key '" + key + "' does not apply to '" + command_ + "'");
      }
      if (value.is_object()) throw InvalidArgument("config: key '" + key + "' must be flat");
    }
    if (j_.contains("command") && j_["command"] != command_) {
      throw InvalidArgument("config: command '" + j_["command"].get<std::string>() +
                            "' does not match '" + command_ + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: key '" + key + "' has the wrong type");
    }
  }

  template <class T>
  T require(const std::string& key) const {
    if (!j_.contains(key)) {
      throw InvalidArgument("config: key '" + key + "' is required for '" + command_ + "'");
    }
    return get<T>(key, T{});
  }

  void set(const std::string& key, json value) { j_[key] = std::move(value); }
  const std::string& command() const { return command_; }

 private:
  json j_;
  std::string command_;
};

fs::path resolve(const fs::path& base, const std::string& file) {
  const fs::path f(file);
  return f.is_absolute() ? f : base / f;
}

struct Context {
  Config cfg;
  fs::path config_dir;  // relative file names in the config resolve against this
  fs::path out;
  std::uint64_t seed = 0;
};

LambdaSeq sequence_from(const Context& ctx, const std::string& prefix, Index p,
                        const std::string& fallback_kind, double fallback_scale,
                        double fallback_value) {
  const Config& c = ctx.cfg;
  const std::string kind = c.get<std::string>(prefix, fallback_kind);
  if (kind == "bhq") {
    return LambdaSeq::bhq(p, c.get<double>(prefix + "_q", 0.1),
                          c.get<double>(prefix + "_scale", fallback_scale));
  }
  if (kind == "constant") {
    return LambdaSeq::constant(p, c.get<double>(prefix + "_value", fallback_value));
  }
  if (kind == "linear") {
    return LambdaSeq::linear(p, c.require<double>(prefix + "_first"),
                             c.require<double>(prefix + "_last"));
  }
  Vector v;
  if (kind == "explicit") {
    const auto values = c.require<std::vector<double>>(prefix + "_values");
    v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  } else if (kind == "file") {
    v = io::read_vector(resolve(ctx.config_dir, c.require<std::string>(prefix + "_file")));
  } else {
    throw InvalidArgument("config: unknown " + prefix + " shape '" + kind + "'");
  }
  if (v.size() != p) {
    throw InvalidArgument("config: " + prefix + " has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(p));
  }
  return LambdaSeq(std::move(v));
}

LambdaSeq penalty_from(const Context& ctx, Index p) {
  LambdaSeq lambda = sequence_from(ctx, "lambda", p, "bhq", 0.15, 1.0);
  if (!(lambda.min() > 0.0)) throw InvalidArgument("config: min(lambda) must be > 0");
  return lambda;
}

std::optional<LambdaSeq> alpha_from(const Context& ctx, Index p) {
  if (!ctx.cfg.has("alpha")) return std::nullopt;
  return sequence_from(ctx, "alpha", p, "constant", 1.0, 2.0);
}

PriorSpec prior_from(const Context& ctx) {
  const Config& c = ctx.cfg;
  const std::string kind = c.get<std::string>("prior", "bernoulli_gaussian");
  if (kind == "bernoulli_gaussian") {
    return PriorSpec::bernoulli_gaussian(c.get<double>("prior_epsilon", 0.1),
                                         c.get<double>("prior_sigma", 1.0));
  }
  if (kind == "point_mass") return PriorSpec::point_mass(c.get<double>("prior_value", 0.0));
  if (kind == "empirical") {
    const Vector s =
        io::read_vector(resolve(ctx.config_dir, c.require<std::string>("prior_sample")));
    return PriorSpec::empirical(std::vector<double>(s.data(), s.data() + s.size()));
  }
  throw InvalidArgument("config: unknown prior '" + kind + "'");
}

slope_amp::SeConfig se_from(const Context& ctx, Index p, double delta, double sigma_w) {
  const Config& c = ctx.cfg;
  slope_amp::SeConfig se;
  se.p_se = p;
  se.delta = delta;
  se.sigma_w = sigma_w;
  se.seed = ctx.seed;
  se.mc_reps = c.get<int>("mc_reps", se.mc_reps);
  se.fp_tol = c.get<double>("fp_tol", se.fp_tol);
  se.max_fp_iter = c.get<int>("max_fp_iter", se.max_fp_iter);
  se.validate();
  return se;
}

slope_amp::CalibrationOptions calibration_from(const Context& ctx) {
  slope_amp::CalibrationOptions opts;
  opts.rel_tol = ctx.cfg.get<double>("rel_tol", opts.rel_tol);
  if (!(opts.rel_tol > 0.0)) throw InvalidArgument("config: rel_tol must be > 0");
  return opts;
}

slope_amp::ProblemInstance instance_from(const Context& ctx) {
  const Config& c = ctx.cfg;
  if (c.has("design") || c.has("response")) {
    slope_amp::ProblemInstance inst;
    inst.X = io::read_matrix(resolve(ctx.config_dir, c.require<std::string>("design")));
    inst.y = io::read_vector(resolve(ctx.config_dir, c.require<std::string>("response")));
    if (inst.y.size() != inst.X.rows()) {
      throw InvalidArgument("config: response length does not match design rows");
    }
    if (inst.X.rows() < 1 || inst.X.cols() < 1) throw InvalidArgument("config: empty design");
    inst.delta = static_cast<double>(inst.X.rows()) / static_cast<double>(inst.X.cols());
    inst.sigma_w = c.get<double>("sigma_w", 0.0);
    inst.seed = ctx.seed;
    return inst;
  }
  const Index n = c.get<Index>("n", 500);
  const Index p = c.get<Index>("p", 1000);
  return slope_amp::gen_instance(n, p, prior_from(ctx), c.get<double>("sigma_w", 0.0), ctx.seed);
}

json sequence_json(const LambdaSeq& s) {
  return json(std::vector<double>(s.values().data(), s.values().data() + s.size()));
}

std::string num(double x) { return io::format_double(x); }

// ---------------------------------------------------------------------------

void cmd_prox(const Context& ctx, const std::string& input_flag, const std::string& theta_flag) {
  // Flags resolve against the working directory, config entries against the config file.
  auto locate = [&](const std::string& flag, const char* key) {
    return flag.empty() ? resolve(ctx.config_dir, ctx.cfg.require<std::string>(key))
                        : fs::path(flag);
  };
  const Vector v = io::read_vector(locate(input_flag, "input"));
  const LambdaSeq theta(io::read_vector(locate(theta_flag, "theta")));
  const Vector out = slope_amp::prox_sorted_l1(v, theta);
  const Index k = slope_amp::divergence_unique_nonzeros(out);
  io::write_vector(ctx.out / "prox.csv", out, "# divergence=" + std::to_string(k));
}

void cmd_solve(const Context& ctx) {
  const Config& c = ctx.cfg;
  const slope_amp::ProblemInstance inst = instance_from(ctx);
  const Index n = inst.n();
  const Index p = inst.p();
  const LambdaSeq lambda = penalty_from(ctx, p);
  const slope_amp::SeConfig se = se_from(ctx, p, inst.delta, inst.sigma_w);

  json summary;
  LambdaSeq alpha;
  if (auto given = alpha_from(ctx, p)) {
    alpha = *given;
  } else {
    const auto cal = slope_amp::alpha_of_lambda(lambda, prior_from(ctx), se, calibration_from(ctx));
    alpha = cal.alpha;
    summary["alpha_scale"] = cal.alpha_scale;
    summary["tau_star_sq"] = cal.tau_star_sq;
  }

  slope_amp::AmpConfig amp;
  amp.alpha = alpha;
  amp.max_iter = c.get<int>("max_iter", amp.max_iter);
  amp.opt_tol = c.get<double>("opt_tol", amp.opt_tol);
  const std::string mode = c.get<std::string>("threshold_mode", "empirical");
  if (mode == "state_evolution") {
    const slope_amp::StateEvolution sev(prior_from(ctx), se);
    const auto traj = sev.trajectory(alpha, sev.initial_tau_sq(), amp.max_iter, false);
    for (double t2 : traj.tau_sq_trajectory) amp.tau_schedule.push_back(std::sqrt(t2));
  } else if (mode != "empirical") {
    throw InvalidArgument("config: unknown threshold_mode '" + mode + "'");
  }
  amp.validate();

  std::vector<slope_amp::AmpState> states{slope_amp::amp_init(inst.y, p)};
  bool converged = false;
  for (int t = 0; t < amp.max_iter; ++t) {
    std::optional<double> tau;
    if (!amp.tau_schedule.empty()) {
      tau = amp.tau_schedule[std::min<std::size_t>(t, amp.tau_schedule.size() - 1)];
    }
    states.push_back(slope_amp::amp_step(states.back(), inst.X, inst.y, alpha, tau));
    const double diff =
        (states.back().beta - states[states.size() - 2].beta).squaredNorm() / static_cast<double>(p);
    if (diff <= amp.opt_tol) {
      converged = true;
      break;
    }
  }
  const slope_amp::AmpState& last = states.back();

  // The penalty the AMP fixed point minimizes; falls back to the requested one
  // when it is degenerate (zero data).
  LambdaSeq solved = lambda;
  try {
    const LambdaSeq fp = slope_amp::fixed_point_lambda(last, alpha, n);
    if (!fp.is_zero()) solved = fp;
  } catch (const slope_amp::CalibrationError&) {
  }
  Vector reference;
  const bool want_reference = c.get<bool>("reference", false);
  if (want_reference) reference = slope_amp::reference_solution(inst.X, inst.y, solved);

  std::ofstream trace = [&] {
    fs::create_directories(ctx.out);
    return std::ofstream(ctx.out / "trace.csv");
  }();
  trace << "iter,tau_hat,unique_nonzeros,step_diff,kkt_residual,opt_error\n";
  double kkt = 0.0;
  for (std::size_t t = 1; t < states.size(); ++t) {
    const auto& cur = states[t];
    const auto& prev = states[t - 1];
    kkt = slope_amp::kkt_residual(cur, prev, inst.X, inst.y, solved, alpha);
    const double diff = (cur.beta - prev.beta).squaredNorm() / static_cast<double>(p);
    const double err = want_reference ? slope_amp::opt_error(cur.beta, reference)
                                      : std::numeric_limits<double>::quiet_NaN();
    trace << cur.iter << ',' << num(cur.tau_hat) << ','
          << slope_amp::divergence_unique_nonzeros(cur.beta) << ',' << num(diff) << ','
          << num(kkt) << ',' << num(err) << '\n';
  }
  io::write_vector(ctx.out / "solution.csv", last.beta);
  summary["iterations"] = last.iter;
  summary["converged"] = converged;
  summary["kkt_residual"] = kkt;
  summary["tau_hat"] = last.tau_hat;
  summary["alpha"] = sequence_json(alpha);
  summary["lambda_solved"] = sequence_json(solved);
  summary["lambda_mismatch"] =
      (solved.values() - lambda.values()).norm() / lambda.values().norm();
  if (want_reference) summary["opt_error"] = slope_amp::opt_error(last.beta, reference);
  io::write_json(ctx.out / "summary.json", summary);
}

void cmd_se(const Context& ctx) {
  const Config& c = ctx.cfg;
  const Index p = c.get<Index>("p_se", 1000);
  const slope_amp::SeConfig se =
      se_from(ctx, p, c.get<double>("delta", 0.5), c.get<double>("sigma_w", 0.0));
  const slope_amp::StateEvolution sev(prior_from(ctx), se);
  const LambdaSeq alpha = alpha_from(ctx, p).value_or(LambdaSeq::constant(p, 2.0));
  const double tau0_sq = c.get<double>("tau0_sq", sev.initial_tau_sq());
  if (!(tau0_sq >= 0.0)) throw InvalidArgument("config: tau0_sq must be >= 0");
  const int iterations = c.get<int>("iterations", 0);
  if (iterations < 0) throw InvalidArgument("config: iterations must be >= 0");

  const slope_amp::McEstimate f = sev.f_alpha(alpha);
  slope_amp::SeResult res = iterations > 0 ? sev.trajectory(alpha, tau0_sq, iterations, false)
                                           : sev.fixed_point(alpha, tau0_sq);
  fs::create_directories(ctx.out);
  std::ofstream out(ctx.out / "se.csv");
  out << "t,tau_sq\n";
  for (std::size_t t = 0; t < res.tau_sq_trajectory.size(); ++t) {
    out << t << ',' << num(res.tau_sq_trajectory[t]) << '\n';
  }
  json summary{{"tau_star_sq", res.tau_star_sq},
               {"converged", res.converged},
               {"mc_stderr", res.mc_stderr},
               {"f_alpha", f.mean},
               {"f_alpha_stderr", f.stderr_},
               {"predicted_mse", slope_amp::predicted_mse(res.tau_star_sq, se)}};
  io::write_json(ctx.out / "se.json", summary);
}

void cmd_calibrate(const Context& ctx) {
  const Config& c = ctx.cfg;
  const Index p = c.get<Index>("p_se", 1000);
  const slope_amp::SeConfig se =
      se_from(ctx, p, c.get<double>("delta", 0.5), c.get<double>("sigma_w", 0.0));
  const LambdaSeq lambda = penalty_from(ctx, p);
  const auto cal = slope_amp::alpha_of_lambda(lambda, prior_from(ctx), se, calibration_from(ctx));
  json out{{"alpha", sequence_json(cal.alpha)},
           {"alpha_scale", cal.alpha_scale},
           {"scale", cal.scale},
           {"tau_star_sq", cal.tau_star_sq},
           {"lambda_check", std::vector<double>(cal.lambda_check.data(),
                                                cal.lambda_check.data() + cal.lambda_check.size())},
           {"mc_stderr", cal.mc_stderr},
           {"evaluations", cal.evaluations}};
  io::write_json(ctx.out / "alpha.json", out);
}

void cmd_bench(const Context& ctx) {
  const Config& c = ctx.cfg;
  const slope_amp::ProblemInstance inst = instance_from(ctx);
  const LambdaSeq lambda = penalty_from(ctx, inst.p());
  LambdaSeq alpha;
  if (auto given = alpha_from(ctx, inst.p())) {
    alpha = *given;
  } else {
    const auto se = se_from(ctx, inst.p(), inst.delta, inst.sigma_w);
    alpha = slope_amp::alpha_of_lambda(lambda, prior_from(ctx), se, calibration_from(ctx)).alpha;
  }
  slope_amp::BenchOptions opts;
  opts.thresholds = c.get<std::vector<double>>("thresholds", opts.thresholds);
  opts.trace_stride = c.get<int>("trace_stride", opts.trace_stride);
  opts.amp_max_iter = c.get<int>("amp_max_iter", opts.amp_max_iter);
  opts.fista_max_iter = c.get<int>("fista_max_iter", opts.fista_max_iter);
  opts.ista_max_iter = c.get<int>("ista_max_iter", opts.ista_max_iter);
  const std::string rule = c.get<std::string>("step_rule", "frobenius");
  if (rule == "frobenius") {
    opts.step_rule = slope_amp::StepRule::kFrobenius;
  } else if (rule == "spectral") {
    opts.step_rule = slope_amp::StepRule::kSpectral;
  } else {
    throw InvalidArgument("config: unknown step_rule '" + rule + "'");
  }

  const slope_amp::BenchReport rep = slope_amp::run_convergence_bench(inst, alpha, lambda, opts);
  fs::create_directories(ctx.out);
  std::ofstream bench(ctx.out / "bench.csv");
  bench << "solver,threshold,first_iter\n";
  for (const auto& s : rep.solvers) {
    for (std::size_t k = 0; k < rep.thresholds.size(); ++k) {
      bench << s.solver << ',' << num(rep.thresholds[k]) << ',' << s.first_iter[k] << '\n';
    }
    bench << s.solver << ",set_diff," << s.first_zero_set_diff << '\n';
  }
  std::ofstream trace(ctx.out / "trace.csv");
  trace << "solver,iter,opt_error,set_diff,cost,tau_hat\n";
  for (const auto& s : rep.solvers) {
    for (const auto& r : s.trace) {
      trace << s.solver << ',' << r.iter << ',' << num(r.opt_error) << ',' << r.set_diff << ','
            << num(r.cost) << ',' << num(r.tau_hat) << '\n';
    }
  }
  io::write_json(ctx.out / "bench.json", json{{"alpha", sequence_json(rep.alpha)},
                                              {"lambda_solved", sequence_json(rep.lambda_solved)},
                                              {"lambda_mismatch", rep.lambda_mismatch}});
}

void cmd_mse(const Context& ctx) {
  const Config& c = ctx.cfg;
  const Index n = c.get<Index>("n", 500);
  const Index p = c.get<Index>("p", 1000);
  const double sigma_w = c.get<double>("sigma_w", 0.0);
  slope_amp::MseOptions opts;
  opts.base_seed = ctx.seed;
  opts.solver_tol = c.get<double>("solver_tol", opts.solver_tol);
  opts.se = se_from(ctx, p, static_cast<double>(n) / static_cast<double>(p), sigma_w);
  opts.calibration = calibration_from(ctx);
  const auto rep = slope_amp::mse_experiment(n, p, prior_from(ctx), sigma_w,
                                             penalty_from(ctx, p), c.get<int>("n_seeds", 20), opts);
  fs::create_directories(ctx.out);
  std::ofstream out(ctx.out / "mse.csv");
  out << "n,p,delta,sigma_w,empirical_mse,stderr,predicted_mse\n";
  out << rep.n << ',' << rep.p << ',' << num(rep.delta) << ',' << num(rep.sigma_w) << ','
      << num(rep.empirical_mse) << ',' << num(rep.stderr_) << ',' << num(rep.predicted_mse)
      << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SLOPE regression by approximate message passing"};
  app.footer(help_footer());
  app.require_subcommand(0, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag;
  std::string out_flag;
  app.add_option("--config", config_path, "flat JSON config file");
  app.add_option("--seed", seed_flag, "seed; overrides config and $SLOPE_AMP_SEED");
  app.add_option("--threads", threads_flag, "worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--out", out_flag, "output directory (default .)");

  std::string prox_input, prox_theta;
  auto* prox = app.add_subcommand("prox", "prox of the sorted-l1 norm -> prox.csv");
  prox->add_option("--input", prox_input, "vector file");
  prox->add_option("--theta", prox_theta, "threshold file");
  app.add_subcommand("solve", "AMP solve -> solution.csv, trace.csv, summary.json");
  app.add_subcommand("se", "state evolution -> se.csv, se.json");
  app.add_subcommand("calibrate", "alpha for a penalty lambda -> alpha.json");
  app.add_subcommand("bench", "AMP vs FISTA vs ISTA -> bench.csv, trace.csv, bench.json");
  app.add_subcommand("mse", "empirical vs predicted MSE -> mse.csv");
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(slope_amp::ExitCode::kConfigError);
  }

  std::string command =
      app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();
  try {
    json raw = json::object();
    fs::path config_dir = fs::current_path();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw InvalidArgument("cannot open config '" + config_path + "'");
      try {
        in >> raw;
      } catch (const json::parse_error& e) {
        throw InvalidArgument("config '" + config_path + "': " + e.what());
      }
      config_dir = fs::absolute(config_path).parent_path();
    }
    if (command.empty()) {
      if (!raw.is_object() || !raw.contains("command") || !raw["command"].is_string()) {
        throw InvalidArgument("no subcommand given and the config has no \"command\" key");
      }
      command = raw["command"].get<std::string>();
      if (!app.get_subcommand_no_throw(command)) {
        throw InvalidArgument("config: unknown command '" + command + "'");
      }
    }
    Context ctx{Config(std::move(raw), command), config_dir, {}, 0};

    ctx.seed = ctx.cfg.get<std::uint64_t>("seed", 0);
    if (const char* env = std::getenv(kSeedEnv); env && *env) {
      try {
        ctx.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw InvalidArgument(std::string("$") + kSeedEnv + " is not an unsigned integer");
      }
    }
    if (seed_flag) ctx.seed = *seed_flag;

    if (threads_flag) {
      slope_amp::set_max_threads(*threads_flag);
    } else if (ctx.cfg.has("threads")) {
      const int k = ctx.cfg.get<int>("threads", 1);
      if (k < 1) throw InvalidArgument("config: threads must be >= 1");
      slope_amp::set_max_threads(k);
    }
    ctx.out = out_flag.empty() ? fs::path(ctx.cfg.get<std::string>("out", ".")) : fs::path(out_flag);

    if (command == "prox") {
      cmd_prox(ctx, prox_input, prox_theta);
    } else if (command == "solve") {
      cmd_solve(ctx);
    } else if (command == "se") {
      cmd_se(ctx);
    } else if (command == "calibrate") {
      cmd_calibrate(ctx);
    } else if (command == "bench") {
      cmd_bench(ctx);
    } else {
      cmd_mse(ctx);
    }
  } catch (const slope_amp::Error& e) {
    std::cerr << "slope_amp " << command << ": " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "slope_amp " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
