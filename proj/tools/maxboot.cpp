// maxboot command line: run experiments, numerical checks, rate certificates.

#include <algorithm>
#include <bit>
#include <csignal>
#include <map>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "maxboot/harness.hpp"
#include "maxboot/moments.hpp"
#include "maxboot/theorycheck.hpp"

namespace {

using namespace maxboot;

constexpr int kExitConfig = 1;
constexpr int kExitCheckFailed = 2;
constexpr int kExitInterrupted = 130;

extern "C" void on_sigint(int) { interrupt_requested().store(true); }

int cmd_run(const ExperimentConfig& config) {
  std::signal(SIGINT, on_sigint);
  const auto results = run_configured(config);

  std::vector<ResultRow> rows;
  bool interrupted = results.size() < (config.sweep ? sweep_settings().size() : 1);
  for (const auto& [c, out] : results) {
    rows.insert(rows.end(), out.rows.begin(), out.rows.end());
    interrupted = interrupted || out.interrupted;
    if (!config.figure_path.empty() && out.completed_reps > 0) {
      emit_figure_data(out.ks_per_rep, config.sweep ? figure_path_for(config.figure_path, c) : config.figure_path);
    }
  }
  if (!rows.empty()) emit_results(rows, config.format, config.output_path);
  if (interrupted) {
    std::cerr << "maxboot: interrupted; wrote results for completed outer reps only\n";
    return kExitInterrupted;
  }
  return 0;
}

int cmd_check(const std::string& suite, std::uint64_t seed) {
  if (suite != "all" && suite != "smoothmax" && suite != "lindeberg" && suite != "anticonc") {
    std::cerr << "maxboot: unknown suite '" << suite << "'\n";
    return kExitConfig;
  }
  const SeedSpec base{seed, 0};
  std::vector<CheckReport> reports;
  auto want = [&](const char* s) { return suite == "all" || suite == s; };
  if (want("smoothmax")) {
    reports.push_back(check_smooth_max_sandwich(10000, 1000, base.substream(1)));
    reports.push_back(check_l1_bounds(10000, 10, base.substream(2)));
    reports.push_back(check_softmax_stability(10000, base.substream(3)));
  }
  if (want("lindeberg")) {
    for (auto f : {LindebergFunction::SmoothMaxOfSum, LindebergFunction::SquaredNormOfSum})
      for (std::size_t n = 2; n <= 6; ++n)
        for (std::size_t p = 1; p <= 2; ++p)
          reports.push_back(check_lindeberg_permutation(n, p, f, base.derive({4, n, p})));
  }
  if (want("anticonc")) {
    for (std::size_t p : {1, 10, 100})
      for (double eps : {0.05, 0.1, 0.2})
        reports.push_back(
            check_gaussian_anticoncentration(p, 1.0, eps, 100000, base.derive({5, p, std::bit_cast<std::uint64_t>(eps)})));
  }
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << to_json(r).dump() << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitCheckFailed;
}

// Numeric CSV matrix, one row per observation; a non-numeric first line is
// taken as a header.
DataMatrix read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read input '" + path + "'");
  std::vector<double> values;
  std::size_t n = 0, p = 0;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError(path + ": non-numeric row " + std::to_string(n + 1));
    }
    first = false;
    if (p == 0) p = row.size();
    if (row.size() != p) throw ConfigError(path + ": ragged row " + std::to_string(n + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++n;
  }
  if (n == 0) throw ConfigError(path + ": no data rows");
  return DataMatrix(n, p, std::move(values));
}

nlohmann::json certificate_json(const RateCertificate& c) {
  return {{"gamma_star", c.gamma_star},
          {"branch", c.branch == RateBranch::TailBranch ? "tail" : "moment"},
          {"tail_value", c.tail_value},
          {"moment_value", c.moment_value},
          {"kappa_n4", c.kappa_n4},
          {"b_n", c.b_n},
          {"M", c.M}};
}

int cmd_certify(const std::string& input) {
  const DataMatrix data = read_matrix_csv(input);
  if (data.n() < 2 || data.p() < 2) throw ConfigError("certify needs at least 2 rows and 2 columns");
  const MomentSummary s = estimate_moment_summary(data, Centering::SampleMean);
  nlohmann::json out{{"n", data.n()},
                     {"p", data.p()},
                     {"M2", s.M2},
                     {"M4", s.M4},
                     {"M6", s.M6},
                     {"sigma_lower", s.sigma_lower},
                     {"Mcal4", s.Mcal4},
                     {"empirical", certificate_json(rate_certificate(s, data.n(), data.p(), CertificateScheme::Empirical))},
                     {"wild", certificate_json(rate_certificate(s, data.n(), data.p(), CertificateScheme::Wild))}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maxboot: bootstrap approximation of high-dimensional max statistics"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate bootstrap KS distance and coverage");
  std::string config_file;
  run->add_option("--config", config_file, "flat key = value config file");
  // Every run option lands in a Settings map under its config-file key, so
  // CLI values override the file without a second parser.
  Settings cli;
  std::vector<std::pair<std::string, std::string>> run_opts{
      {"preset", "desk or paper"},
      {"experiment", "I (equicorrelated) or II (AR(1))"},
      {"rho", "latent correlation"},
      {"shape", "gamma shape alpha"},
      {"n", "sample size"},
      {"p", "dimension"},
      {"outer", "datasets per setting"},
      {"truth", "datasets for the reference law of T_n"},
      {"breps", "bootstrap draws per dataset"},
      {"seed", "master seed"},
      {"mode", "onesided or abs"},
      {"schemes", "comma list of g,m,r,e,mix"},
      {"mixed-p0", "Gaussian-branch probability of the mixed multiplier"},
      {"alpha", "coverage level is 1 - alpha"},
      {"threads", "worker threads"},
      {"coverage", "truth_cdf or indicator"},
      {"output", "results path (default stdout)"},
      {"format", "csv or json"},
      {"figure-data", "per-rep KS values, long format"},
  };
  std::map<std::string, std::string> raw;
  for (const auto& [key, help] : run_opts) run->add_option("--" + key, raw[key], help);
  bool sweep = false;
  run->add_flag("--sweep", sweep, "all eight experiment settings");
  bool quiet = false;
  run->add_flag("--quiet", quiet, "no progress on stderr");

  auto* check = app.add_subcommand("check", "numerical checks of the smooth-max and interpolation identities");
  std::string suite = "all";
  std::uint64_t check_seed = 7;
  check->add_option("--suite", suite, "all, smoothmax, lindeberg or anticonc");
  check->add_option("--seed", check_seed, "seed");

  auto* certify = app.add_subcommand("certify", "plug-in moment summary and rate certificates for a data matrix");
  std::string input;
  certify->add_option("--input", input, "CSV matrix, rows are observations")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      for (const auto& [key, help] : run_opts) {
        if (run->count("--" + key) == 0) continue;
        std::string file_key = key;
        std::replace(file_key.begin(), file_key.end(), '-', '_');
        cli[file_key] = raw[key];
      }
      if (sweep) cli["sweep"] = "true";
      Settings merged;
      if (!config_file.empty()) merged = parse_config_file(config_file);
      for (const auto& [k, v] : cli) merged[k] = v;
      ExperimentConfig config = config_from_settings(merged);
      config.quiet = quiet;
      return cmd_run(config);
    }
    if (*check) return cmd_check(suite, check_seed);
    if (*certify) return cmd_certify(input);
  } catch (const ConfigError& e) {
    std::cerr << "maxboot: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "maxboot: error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
