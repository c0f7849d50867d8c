// Command-line front end: scenario validation, oracle solves, Monte Carlo
// runs, alpha sweeps and concentration checks. All tables are CSV.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctsense/oracle.hpp"
#include "ctsense/policy.hpp"
#include "ctsense/scenario_io.hpp"
#include "ctsense/simulator.hpp"

using namespace ctsense;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt(std::size_t v) { return std::to_string(v); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw ConfigError("cannot write " + path);
  }
  std::ostream& out() { return file_.is_open() ? file_ : std::cout; }
  void row(const std::vector<std::string>& cells) {
    std::ostream& os = out();
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  }

 private:
  std::ofstream file_;
};

std::vector<std::string> indexed(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

template <class... Parts>
std::vector<std::string> concat(std::vector<std::string> head, const Parts&... parts) {
  (head.insert(head.end(), parts.begin(), parts.end()), ...);
  return head;
}

std::vector<double> default_alphas() {
  return {std::exp(-2.0), std::exp(-5.0), std::exp(-10.0), std::exp(-15.0), std::exp(-20.0)};
}

std::vector<double> default_betas(std::size_t controls) {
  std::vector<double> betas{concentration_floor(controls)};
  for (double b = std::floor(betas.front()) + 1.0; b <= 25.0; b += 1.0) betas.push_back(b);
  return betas;
}

int cmd_validate(const std::string& path, std::uint64_t seed) {
  const Scenario s = load_scenario(path);
  bool ok = true;
  for (const OverlapFinding& f : find_overlaps(s.space, 1000, seed)) {
    std::cerr << "overlap: hypothesis " << f.sampled.hypothesis + 1 << " cell " << f.sampled.cell + 1
              << " meets hypothesis " << f.other.hypothesis + 1 << " cell " << f.other.cell + 1 << '\n';
    ok = false;
  }
  const auto truth = s.space.classify(s.truth);
  if (!truth) {
    std::cerr << "truth lies in no hypothesis\n";
    ok = false;
  } else {
    for (std::size_t m = 0; m < s.space.num_hypotheses(); ++m) {
      if (m == *truth) continue;
      for (std::size_t c = 0; c < s.space.set(m).size(); ++c) {
        const double d = distance(s.truth, HypothesisSet{s.space.set(m)[c]}, s.space.models());
        if (!(d > 0.0)) {
          std::cerr << "truth has zero distance to hypothesis " << m + 1 << " cell " << c + 1 << '\n';
          ok = false;
        }
      }
    }
  }
  if (!ok) return kInvalid;
  std::cout << "valid: " << s.space.num_controls() << " controls, " << s.space.num_hypotheses()
            << " hypotheses, truth in hypothesis " << *truth + 1 << '\n';
  return kOk;
}

int cmd_oracle(const std::string& path, double tol) {
  const Scenario s = load_scenario(path);
  OracleOptions options;
  options.tol = tol;
  const OracleResult r = solve_oracle(s.truth, s.space, s.true_hypothesis(), options);
  CsvWriter csv("");
  csv.row(concat({"d_star", "inv_d_star"}, indexed("q_star_", r.q_star.size()),
                 std::vector<std::string>{"gap", "iterations"}));
  std::vector<std::string> row{fmt(r.d_star), fmt(1.0 / r.d_star)};
  for (double q : r.q_star) row.push_back(fmt(q));
  row.push_back(fmt(r.certified_gap));
  row.push_back(fmt(r.iterations));
  csv.row(row);
  return kOk;
}

void write_summary(std::ostream& os, const RunSummary& s) {
  os << "alpha,trials,mean_tau,std_tau,error_rate,ratio,lower_bound_ratio,d_star,tracking_violations\n"
     << fmt(s.alpha) << ',' << s.trials << ',' << fmt(s.mean_tau) << ',' << fmt(s.std_tau) << ','
     << fmt(s.error_rate) << ',' << fmt(s.ratio) << ',' << fmt(s.lower_bound_ratio) << ',' << fmt(s.d_star)
     << ',' << s.tracking_violations << '\n';
}

int cmd_simulate(const std::string& path, const PolicyConfig& config, std::size_t trials, std::uint64_t seed,
                 const std::string& out, std::size_t threads) {
  const Scenario s = load_scenario(path);
  const BatchResult batch = run_batch(s, config, trials, seed, threads);
  CsvWriter csv(out);
  csv.row(concat({"seed", "tau", "decision", "correct"}, indexed("N_", s.space.num_controls())));
  for (const TrialResult& t : batch.trials) {
    std::vector<std::string> row{std::to_string(t.seed), fmt(t.stopping_time), fmt(t.decision + 1),
                                 t.correct ? "1" : "0"};
    for (std::size_t n : t.final_counts) row.push_back(fmt(n));
    csv.row(row);
  }
  if (out.empty()) {
    write_summary(std::cerr, batch.summary);
  } else {
    std::ofstream summary(out + ".summary.csv");
    if (!summary) throw ConfigError("cannot write " + out + ".summary.csv");
    write_summary(summary, batch.summary);
  }
  return kOk;
}

int cmd_sweep(const std::string& path, const PolicyConfig& config, const std::vector<double>& alphas,
              std::size_t trials, std::uint64_t seed, const std::string& out, std::size_t threads) {
  const Scenario s = load_scenario(path);
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw PreconditionError("every alpha must lie in (0, 1)");
  }
  const std::vector<RunSummary> table = sweep_alpha(s, config, alphas, trials, seed, threads);
  CsvWriter csv(out);
  csv.row({"alpha", "abs_log_alpha", "mean_tau", "std_tau", "ratio", "lower_bound_ratio", "error_rate"});
  for (const RunSummary& r : table) {
    csv.row({fmt(r.alpha), fmt(std::abs(std::log(r.alpha))), fmt(r.mean_tau), fmt(r.std_tau), fmt(r.ratio),
             fmt(r.lower_bound_ratio), fmt(r.error_rate)});
  }
  return kOk;
}

int cmd_concentration(const std::string& path, std::size_t n, std::vector<double> betas, std::size_t samples,
                      std::uint64_t seed, const std::string& out, std::size_t threads) {
  const Scenario s = load_scenario(path);
  if (betas.empty()) betas = default_betas(s.space.num_controls());
  const auto rows = verify_concentration(s.space.models(), s.truth, n, betas, samples, seed, threads);
  CsvWriter csv(out);
  csv.row({"beta", "empirical", "bound", "pass"});
  for (const ConcentrationRow& r : rows) {
    csv.row({fmt(r.beta), fmt(r.empirical), fmt(r.bound), r.pass ? "true" : "false"});
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential controlled sensing: oracle, track-and-stop simulation, diagnostics"};
  app.require_subcommand(1);

  std::string path;
  std::string out;
  double tol = 1e-6;
  double alpha = 0.01;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::size_t threads = default_parallelism();
  std::vector<double> alphas = default_alphas();
  std::size_t n = 200;
  std::vector<double> betas;
  std::size_t samples = 100000;

  auto scenario_arg = [&](CLI::App* sub) {
    sub->add_option("scenario", path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  };
  auto threads_opt = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads (default: CTSENSE_THREADS or core count)")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
  scenario_arg(validate);
  validate->add_option("--seed", seed, "Seed for the overlap sampler");

  CLI::App* oracle = app.add_subcommand("oracle", "Solve for D* and q* at the truth");
  scenario_arg(oracle);
  oracle->add_option("--tol", tol, "Certified optimality gap")->check(CLI::PositiveNumber);

  CLI::App* simulate = app.add_subcommand("simulate", "Run independent trials");
  scenario_arg(simulate);
  simulate->add_option("--alpha", alpha, "Target error probability")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Base seed; trial k uses seed + k");
  simulate->add_option("--out", out, "Per-trial CSV (summary goes to <out>.summary.csv)");
  simulate->add_option("--tol", tol, "Oracle tolerance")->check(CLI::PositiveNumber);
  threads_opt(simulate);

  CLI::App* sweep = app.add_subcommand("sweep", "Mean stopping time across alphas");
  scenario_arg(sweep);
  sweep->add_option("--alphas", alphas, "Comma-separated alphas")->delimiter(',');
  sweep->add_option("--trials", trials, "Trials per alpha")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", seed, "Base seed");
  sweep->add_option("--out", out, "Output CSV");
  sweep->add_option("--tol", tol, "Oracle tolerance")->check(CLI::PositiveNumber);
  threads_opt(sweep);

  CLI::App* conc = app.add_subcommand("concentration", "Empirical check of the concentration bound");
  scenario_arg(conc);
  conc->add_option("--n", n, "Run length")->check(CLI::PositiveNumber);
  conc->add_option("--betas", betas, "Comma-separated thresholds (default: floor, then integers to 25)")
      ->delimiter(',');
  conc->add_option("--samples", samples, "Monte Carlo runs");
  conc->add_option("--seed", seed, "Base seed");
  conc->add_option("--out", out, "Output CSV");
  threads_opt(conc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  PolicyConfig config;
  config.alpha = alpha;
  config.oracle_tol = tol;

  try {
    if (*validate) return cmd_validate(path, seed);
    if (*oracle) return cmd_oracle(path, tol);
    if (*simulate) return cmd_simulate(path, config, trials, seed, out, threads);
    if (*sweep) return cmd_sweep(path, config, alphas, trials, seed, out, threads);
    if (*conc) return cmd_concentration(path, n, betas, samples, seed, out, threads);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::logic_error& e) {
    // Also covers DomainError and UsageError.
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kInvalid;
}
