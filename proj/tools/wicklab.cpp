// wicklab command line: error curves, constants, rate fits, Weyl sequences
// and the verification suite.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "wicklab/error_engine.hpp"
#include "wicklab/io.hpp"
#include "wicklab/verification.hpp"
#include "wicklab/weyl_rates.hpp"

using namespace wicklab;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBoundary = 3;

// Thrown for malformed configurations; maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string integrand_file;
  std::string family;
  std::string t = "1/pi";
  std::string T = "1/pi";
  std::string seq_t;
  double q = 0.25;
  bool linear = false;
  std::string seq = "weyl";
  std::string list;
  std::int64_t nmax = 100000;
  std::size_t count = 0;
  int M = 18;
  int quad = 8;
  std::uint64_t seed = 20240601;
  std::string out;
  std::string format = "csv";
  double alpha = 1.0;
  double drop = kDefaultDropFraction;
  std::string from_csv;
  std::string level = "quick";
  bool no_projection = false;
};

TimePoint parse_time(const std::string& s, const char* what) {
  try {
    return TimePoint::parse(s);
  } catch (const Error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

IntegrandSpec build_integrand(const Options& o) {
  if (!o.integrand_file.empty()) {
    std::ifstream in(o.integrand_file);
    if (!in) throw ConfigError("cannot open " + o.integrand_file);
    try {
      return spec_from_json(Json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("integrand JSON: ") + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  const TimePoint t = parse_time(o.t, "--t");
  const TimePoint T = parse_time(o.T, "--T");
  try {
    if (o.family == "abs") return abs_integrand(t, o.M, o.linear);
    if (o.family == "xt") return xt_process(T, o.M);
    if (o.family == "xq") return xq_variable(T, o.q, o.M);
    if (o.family == "ito-exp") return ito_exp(T, o.M);
    if (o.family == "sko-exp") return sko_exp(t, o.M);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown family '" + o.family + "'");
}

TimePoint sequence_time(const Options& o) {
  if (!o.seq_t.empty()) return parse_time(o.seq_t, "--seq-t");
  const bool uses_T = o.family == "ito-exp" || o.family == "xt" || o.family == "xq";
  return uses_T ? parse_time(o.T, "--T") : parse_time(o.t, "--t");
}

std::vector<std::int64_t> build_sequence(const Options& o) {
  if (o.seq == "list") {
    std::vector<std::int64_t> out;
    std::stringstream ss(o.list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stoll(item));
      } catch (const std::exception&) {
        throw ConfigError("bad --list entry '" + item + "'");
      }
      if (out.back() < 1) throw ConfigError("--list entries must be positive");
    }
    if (out.empty()) throw ConfigError("--seq list needs --list");
    return out;
  }
  if (o.seq == "dyadic") {
    std::vector<std::int64_t> out;
    const std::size_t k = o.count ? o.count : 10;
    for (std::size_t i = 1; i <= k; ++i) out.push_back(std::int64_t{1} << i);
    return out;
  }
  const TimePoint t = sequence_time(o);
  try {
    if (o.seq == "rational") return rational_indices(t, o.count ? o.count : 10);
    if (o.seq == "weyl") {
      auto w = weyl_sequence(t, std::max<std::size_t>(o.count, 1), o.nmax);
      if (o.count && w.indices.size() > o.count) w.indices.erase(w.indices.begin(), w.indices.end() - static_cast<std::ptrdiff_t>(o.count));
      return w.indices;
    }
  } catch (const Error& e) {
    if (e.code() == Errc::insufficient_range) throw;
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown sequence '" + o.seq + "'");
}

QuadratureConfig quad_config(const Options& o) {
  QuadratureConfig q;
  q.order = o.quad;
  return q;
}

Json resolved_config(const Options& o, const IntegrandSpec* u) {
  Json j;
  j["version"] = WICKLAB_VERSION;
  if (!o.family.empty()) j["family"] = o.family;
  if (!o.integrand_file.empty()) j["integrand_file"] = o.integrand_file;
  j["t"] = o.t;
  j["T"] = o.T;
  j["q"] = o.q;
  j["M"] = o.M;
  j["seq"] = o.seq;
  if (o.seq == "list") j["list"] = o.list;
  j["nmax"] = o.nmax;
  j["count"] = o.count;
  j["quad"] = o.quad;
  j["seed"] = o.seed;
  if (u) j["integrand"] = spec_to_json(*u);
  return j;
}

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw ConfigError("cannot write " + path);
    os = &file;
  }
  std::ostream& operator*() { return *os; }
};

// Runs mse over the indices with a worker per index; results keep index order.
std::vector<ErrorReport> error_curve(const IntegrandSpec& u, const std::vector<std::int64_t>& ns,
                                     const Options& o, const TimePoint& probe) {
  QuadratureConfig q = quad_config(o);
  std::vector<ErrorReport> out(ns.size());
  std::vector<std::optional<Error>> failures(ns.size());
  const auto count = static_cast<std::int64_t>(ns.size());
  const bool abs_closed = o.family == "abs" && !o.linear && o.integrand_file.empty();
#ifdef _OPENMP
  const bool pooled = omp_get_max_threads() > 1 && count > 1;
#else
  const bool pooled = false;
#endif
  if (pooled) q.execution = QuadratureConfig::Execution::serial;
#pragma omp parallel for schedule(dynamic, 1) if (pooled)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      const auto nodes = std::make_shared<const NodeSet>(NodeSet::equidistant(ns[static_cast<std::size_t>(i)]));
      out[static_cast<std::size_t>(i)] = abs_closed ? abs_mse(probe, nodes, o.M) : mse(u, nodes, q, !o.no_projection);
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(i)] = e;
    }
  }
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!failures[i]) continue;
    if (failures[i]->code() == Errc::boundary_ambiguity)
      std::cerr << "boundary ambiguity at n=" << ns[i] << ", t=" << probe.to_string() << "\n";
    throw *failures[i];
  }
  return out;
}

void write_curve_csv(std::ostream& os, const std::vector<ErrorReport>& rs, double alpha, const Json& config) {
  os << "# wicklab " << WICKLAB_VERSION << "\n# config " << config.dump() << "\n";
  os << "n,e2,e,truncation_bound,scaled\n";
  for (const auto& r : rs)
    os << r.n << "," << csv_number(r.e2) << "," << csv_number(r.e) << "," << csv_number(r.truncation_bound) << ","
       << csv_number(std::pow(static_cast<double>(r.n), alpha) * r.e2) << "\n";
}

int cmd_mse(const Options& o) {
  const IntegrandSpec u = build_integrand(o);
  const auto ns = build_sequence(o);
  const auto rs = error_curve(u, ns, o, o.family == "abs" ? parse_time(o.t, "--t") : sequence_time(o));
  Output out(o.out);
  const Json config = resolved_config(o, &u);
  if (o.format == "json") {
    Json j{{"config", config}, {"reports", Json::array()}};
    for (const auto& r : rs) {
      Json rj = report_to_json(r);
      rj["scaled"] = json_number(std::pow(static_cast<double>(r.n), o.alpha) * r.e2);
      j["reports"].push_back(rj);
    }
    *out << j.dump(2) << "\n";
  } else {
    write_curve_csv(*out, rs, o.alpha, config);
  }
  return 0;
}

int cmd_constants(const Options& o) {
  const IntegrandSpec u = build_integrand(o);
  const QuadratureConfig q = quad_config(o);
  Json j{{"config", resolved_config(o, &u)}};
  j["c1"] = json_number(c1(u, q));
  const bool adapted = std::all_of(u.terms.begin(), u.terms.end(), [](const auto& t) {
    return std::all_of(t.l.begin(), t.l.end(), [](int e) { return e == 0; });
  });
  if (adapted) {
    j["ito_c2"] = json_number(ito_c2(u, q));
  } else {
    const C2Breakdown b = c2_breakdown(u, q);
    j["c2"] = json_number(b.value);
    j["per_tau"] = Json::array();
    for (const auto& [i, v] : b.per_tau) j["per_tau"].push_back({{"tau", time_to_json(u.taus[i])}, {"moment", json_number(v)}});
  }
  Output out(o.out);
  *out << j.dump(2) << "\n";
  return 0;
}

std::vector<std::pair<std::int64_t, double>> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::pair<std::int64_t, double>> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'n') continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) throw ConfigError("bad CSV line '" + line + "'");
    try {
      pts.emplace_back(std::stoll(a), std::stod(b));
    } catch (const std::exception&) {
      throw ConfigError("bad CSV line '" + line + "'");
    }
  }
  return pts;
}

int cmd_rate(const Options& o) {
  std::vector<std::pair<std::int64_t, double>> pts;
  Json config;
  if (!o.from_csv.empty()) {
    pts = read_points(o.from_csv);
    config = {{"version", WICKLAB_VERSION}, {"from_csv", o.from_csv}};
  } else {
    const IntegrandSpec u = build_integrand(o);
    const auto rs = error_curve(u, build_sequence(o), o, o.family == "abs" ? parse_time(o.t, "--t") : sequence_time(o));
    for (const auto& r : rs) pts.emplace_back(r.n, r.e);
    config = resolved_config(o, &u);
    if (!o.out.empty()) {
      Output curve(o.out);
      write_curve_csv(*curve, rs, o.alpha, config);
    }
  }
  const RateFit fit = fit_rate(pts, o.drop);
  std::cout << Json{{"config", config}, {"fit", fit_to_json(fit)}}.dump(2) << "\n";
  return 0;
}

int cmd_weyl(const Options& o) {
  const TimePoint t = parse_time(o.seq_t.empty() ? o.t : o.seq_t, "--t");
  WeylSequence w;
  try {
    w = weyl_sequence(t, std::max<std::size_t>(o.count, 1), o.nmax);
  } catch (const Error& e) {
    if (e.code() == Errc::insufficient_range) throw;
    throw ConfigError(e.what());
  }
  Output out(o.out);
  if (o.format == "json") {
    *out << Json{{"version", WICKLAB_VERSION}, {"sequence", weyl_to_json(w)}}.dump(2) << "\n";
    return 0;
  }
  *out << "# wicklab " << WICKLAB_VERSION << "\n# t " << t.to_string() << "\n";
  *out << "n,gap,scaled_variance\n";
  for (std::size_t i = 0; i < w.indices.size(); ++i) {
    const auto n = w.indices[i];
    *out << n << "," << csv_number(static_cast<double>(w.gaps[i])) << ","
         << csv_number(static_cast<double>(4.0L * n * weyl_bridge_variance(t, n))) << "\n";
  }
  return 0;
}

int cmd_verify(const Options& o) {
  const bool full = o.level == "full";
  if (!full && o.level != "quick") throw ConfigError("--level must be quick or full");
  Json j{{"version", WICKLAB_VERSION}, {"level", o.level}, {"seed", o.seed}};
  bool ok = true;

  const OracleSuite os = oracle_suite(full ? 500 : 100, 6, o.seed, 1e-10);
  j["oracle"] = {{"pairs", os.pairs}, {"failures", os.failures}, {"worst_rel", json_number(os.worst_rel)}};
  ok = ok && os.failures == 0;

  const std::size_t samples = full ? 1000000 : 100000;
  const MomentSuite ms = moment_suite(full ? 50 : 10, 4, samples, o.seed);
  j["moments"] = {{"monomials", ms.monomials}, {"failures", ms.failures}, {"worst_z", json_number(ms.worst_z)}};
  ok = ok && ms.failures == 0;

  const auto nodes = std::make_shared<const NodeSet>(NodeSet::equidistant(4));
  IntegrandSpec u;
  u.taus = {inv_pi()};
  u.terms.push_back({CoeffFn::constant(1.0), 0, {2}});
  const auto fns = default_test_functions(*nodes);
  const ProjectionReport p1 = projection_check(u, nodes, fns, samples, o.seed);
  const ProjectionReport p2 = projection_check(u, nodes, fns, samples, o.seed);
  j["projection"] = projection_to_json(p1);
  const bool same = projection_to_json(p1).dump() == projection_to_json(p2).dump();
  j["deterministic"] = same;
  ok = ok && p1.passed() && same;

  j["passed"] = ok;
  Output out(o.out);
  *out << j.dump(2) << "\n";
  return ok ? 0 : kExitFailure;
}

void add_integrand_options(CLI::App* c, Options& o) {
  auto* src = c->add_option_group("integrand");
  src->add_option("--integrand", o.integrand_file, "Integrand JSON file")->check(CLI::ExistingFile);
  src->add_option("--family", o.family, "Built-in family: abs, xt, xq, ito-exp, sko-exp");
  src->require_option(1);
  c->add_option("--t", o.t, "Time parameter (abs, sko-exp)");
  c->add_option("--T", o.T, "Horizon or base time (ito-exp, xt, xq)");
  c->add_option("--q", o.q, "Exponent q of xq");
  c->add_flag("--linear", o.linear, "abs with weight s instead of 1");
  c->add_option("--M", o.M, "Chaos truncation");
  c->add_option("--quad", o.quad, "Gauss-Legendre order per cell");
}

void add_sequence_options(CLI::App* c, Options& o) {
  c->add_option("--seq", o.seq, "weyl, rational, list or dyadic")->check(CLI::IsMember({"weyl", "rational", "list", "dyadic"}));
  c->add_option("--seq-t", o.seq_t, "Time driving weyl/rational sequences");
  c->add_option("--list", o.list, "Comma separated indices for --seq list");
  c->add_option("--nmax", o.nmax, "Largest index scanned by weyl");
  c->add_option("--count", o.count, "Number of indices (weyl: the last records)");
  c->add_option("--alpha", o.alpha, "Exponent of the scaled column n^alpha e^2");
  c->add_flag("--no-projection", o.no_projection, "Skip the projection identity cross-check");
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
  if (const char* env = std::getenv("WICKLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
  CLI::App app{"Optimal L2 approximation of Skorohod integrals from discrete Brownian information"};
  app.set_version_flag("--version", WICKLAB_VERSION);
  app.require_subcommand(1);
  Options o;

  auto* mse_cmd = app.add_subcommand("mse", "Error curve along an index sequence");
  add_integrand_options(mse_cmd, o);
  add_sequence_options(mse_cmd, o);

  auto* const_cmd = app.add_subcommand("constants", "Asymptotic constants c1, c2 or the adapted c2");
  add_integrand_options(const_cmd, o);

  auto* rate_cmd = app.add_subcommand("rate", "Log-log rate fit of an error curve");
  {
    auto* src = rate_cmd->add_option_group("source");
    src->add_option("--integrand", o.integrand_file, "Integrand JSON file")->check(CLI::ExistingFile);
    src->add_option("--family", o.family, "Built-in family");
    src->add_option("--from-csv", o.from_csv, "Fit (n, e) columns of an existing CSV")->check(CLI::ExistingFile);
    src->require_option(1);
    rate_cmd->add_option("--t", o.t);
    rate_cmd->add_option("--T", o.T);
    rate_cmd->add_option("--q", o.q);
    rate_cmd->add_flag("--linear", o.linear);
    rate_cmd->add_option("--M", o.M);
    rate_cmd->add_option("--quad", o.quad);
    rate_cmd->add_option("--drop", o.drop, "Fraction of smallest indices left out of the fit");
    add_sequence_options(rate_cmd, o);
  }

  auto* weyl_cmd = app.add_subcommand("weyl", "Record indices with {n t} closest to 1/2");
  weyl_cmd->add_option("--t", o.t);
  weyl_cmd->add_option("--nmax", o.nmax);
  weyl_cmd->add_option("--count", o.count, "Minimum number of records");

  auto* verify_cmd = app.add_subcommand("verify", "Oracle, Monte Carlo and determinism checks");
  verify_cmd->add_option("--level", o.level, "quick or full");

  for (auto* c : {mse_cmd, const_cmd, rate_cmd, weyl_cmd, verify_cmd}) {
    c->add_option("--out", o.out, "Output file (default stdout)");
    c->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    c->add_option("--seed", o.seed);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*mse_cmd) return cmd_mse(o);
    if (*const_cmd) return cmd_constants(o);
    if (*rate_cmd) return cmd_rate(o);
    if (*weyl_cmd) return cmd_weyl(o);
    if (*verify_cmd) return cmd_verify(o);
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == Errc::boundary_ambiguity ? kExitBoundary : kExitFailure;
  }
  return kExitFailure;
}
