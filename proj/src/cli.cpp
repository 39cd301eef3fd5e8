#include "momentset/cli.hpp"

#include "momentset/alt.hpp"
#include "momentset/io.hpp"
#include "momentset/mc.hpp"
#include "momentset/regions.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>

namespace momentset {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<Index> n;
  std::string data;
  bool replications = false;
};

int threads_from_env() {
  const char* env = std::getenv("MOMENTSET_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096)
    throw ConfigError("MOMENTSET_THREADS", "expected a positive integer, got '" + std::string(env) + "'");
  return static_cast<int>(v);
}

RunConfig effective_config(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.n) cfg.n = *o.n;
  if (!o.data.empty()) cfg.data = o.data;
  if (o.threads) {
    cfg.threads = *o.threads;
  } else if (const int env = threads_from_env()) {
    cfg.threads = env;
  }
  return cfg;
}

Json manifest(const std::string& subcommand, const RunConfig& cfg, double seconds) {
  Json j;
  j["software"] = {{"name", "momentset"}, {"version", kVersion}};
  j["subcommand"] = subcommand;
  j["seed_rule"] = "mt19937_64 seeded with splitmix64(base_seed, n, replication, stream)";
  j["base_seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["elapsed_seconds"] = seconds;
  j["config"] = config_to_json(cfg);
  return j;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

Json sample_to_json(const Sample& s) {
  const auto cell = [](double v) -> Json {
    if (std::isfinite(v)) return v;
    return format_double(v);
  };
  Json x = Json::array(), w = Json::array();
  for (Index i = 0; i < s.n(); ++i) {
    Json xr = Json::array(), wr = Json::array();
    for (Index k = 0; k < s.dx(); ++k) xr.push_back(cell(s.x()(i, k)));
    for (Index k = 0; k < s.dw(); ++k) wr.push_back(cell(s.w()(i, k)));
    x.push_back(xr);
    w.push_back(wr);
  }
  return {{"x", x}, {"w", w}};
}

std::string out_or(const Options& o, const std::string& fallback) {
  return o.out.empty() ? fallback : o.out;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const RunConfig cfg = effective_config(o);
  const Sample s = simulate(cfg.dgp, cfg.n, cfg.seed);
  const std::string path = out_or(o, o.format == "json" ? "sample.json" : "sample.csv");
  write_atomic(path, o.format == "json" ? sample_to_json(s).dump(1) + "\n" : sample_to_csv(s));
  out << "simulate: " << to_string(cfg.dgp.kind) << " n=" << s.n() << " seed=" << cfg.seed
      << " -> " << path << "\n";
  return 0;
}

ConfidenceRegion estimate_one(const RunConfig& cfg, Estimator e, const Sample& sample,
                              const MomentModel& model, const ThetaGrid& grid) {
  switch (e) {
    case Estimator::weighted_ks:
      return confidence_region(sample, model, grid, cfg.family, cfg.s, cfg.tuning, cfg.strategy);
    case Estimator::bounded_ks:
      return bounded_region(sample, model, grid, cfg.family, cfg.s, cfg.bounded, cfg.strategy);
    case Estimator::kernel:
      return kernel_region(sample, model, grid, cfg.kernel, cfg.s,
                           std::numeric_limits<double>::quiet_NaN(), cfg.strategy);
  }
  throw Error("unknown estimator");
}

int cmd_estimate(const Options& o, std::ostream& out) {
  const RunConfig cfg = effective_config(o);
  const MomentModel model = build_model(cfg.resolved_model());
  const ThetaGrid grid = cfg.resolved_grid();
  Sample sample = cfg.data.empty() ? simulate(cfg.dgp, cfg.n, cfg.seed) : read_sample(cfg.data);
  if (cfg.transform) sample = apply_boundary_transform(sample, *cfg.transform);
  model.validate(sample);

  std::string csv;
  Json regions = Json::array();
  for (Estimator e : cfg.estimators) {
    const ConfidenceRegion r = estimate_one(cfg, e, sample, model, grid);
    std::string part = region_to_csv(r);
    if (!csv.empty()) part.erase(0, part.find('\n') + 1);
    csv += part;
    Json summary = region_summary(r);
    out << "estimate: " << to_string(e) << " n=" << sample.n() << " c=" << fixed3(r.c_used)
        << " members=" << r.count() << "/" << grid.size();
    for (Index k = 0; k < grid.dim(); ++k) {
      const Projection p = project(r, k);
      out << " theta" << k + 1 << "=[" << fixed3(p.lower) << "," << fixed3(p.upper) << "]";
    }
    out << "\n";
    if (o.format == "json") {
      Json members = Json::array();
      const MatrixXd pts = r.member_points();
      for (Index i = 0; i < pts.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < pts.cols(); ++k) row.push_back(pts(i, k));
        members.push_back(row);
      }
      summary["member_points"] = members;
    }
    regions.push_back(summary);
  }
  const std::string path = out_or(o, o.format == "json" ? "region.json" : "region.csv");
  if (o.format == "json") {
    Json doc;
    doc["n"] = sample.n();
    doc["regions"] = regions;
    write_atomic(path, doc.dump(1) + "\n");
  } else {
    write_atomic(path, csv);
  }
  out << "estimate: -> " << path << "\n";
  return 0;
}

int cmd_mc(const Options& o, std::ostream& out) {
  const RunConfig cfg = effective_config(o);
  const auto t0 = std::chrono::steady_clock::now();
  const McReport report = run_mc(cfg.design());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = out_or(o, "mc_out");
  for (const McRow& r : report.rows) {
    out << "mc: " << to_string(r.estimator) << " n=" << r.n << " coverage=" << fixed3(r.coverage)
        << " median_d_h=" << fixed3(r.d_h_q[1]) << " failures=" << r.failures << "\n";
  }
  if (o.format == "json") {
    write_atomic(dir / "report.json", report_to_json(report).dump(1) + "\n");
  } else {
    for (Estimator e : cfg.estimators) {
      const std::string tag = to_string(e);
      write_atomic(dir / ("table1_" + tag + ".csv"), table1_csv(report, e));
      write_atomic(dir / ("table2_" + tag + ".csv"), table2_csv(report, e));
      write_atomic(dir / ("table3_" + tag + ".csv"), table3_csv(report, e));
    }
  }
  if (o.replications) write_atomic(dir / "replications.csv", replications_csv(report));
  write_atomic(dir / "manifest.json", manifest("mc", cfg, secs).dump(1) + "\n");
  out << "mc: " << cfg.reps << " reps in " << fixed3(secs) << "s -> " << dir.string() << "\n";
  return 0;
}

int cmd_rates(const Options& o, std::ostream& out) {
  const RunConfig cfg = effective_config(o);
  const RateReport r =
      rate_experiment(cfg.design(), cfg.rate_sizes, cfg.rate_variable, cfg.predicted_exponent);
  const std::string path = out_or(o, o.format == "json" ? "rates.json" : "rates.csv");
  write_atomic(path, o.format == "json" ? rates_to_json(r).dump(1) + "\n" : rates_csv(r));
  for (const auto& w : r.warnings) out << "rates: warning: " << w << "\n";
  out << "rates: fitted exponent " << fixed3(r.fitted_exponent) << " (predicted "
      << fixed3(r.predicted_exponent) << ") -> " << path << "\n";
  return 0;
}

int cmd_diagnose(const Options& o, std::ostream& out) {
  RunConfig cfg = effective_config(o);
  if (o.config.empty()) {
    DgpSpec contact;
    contact.kind = DgpKind::contact_set;
    cfg.dgp = resolve(contact);
  }
  const DivergenceReport r = divergence_diagnostic(cfg.dgp, cfg.diagnose_sizes, cfg.diagnose_reps,
                                                   cfg.tuning, cfg.seed, cfg.threads);
  const std::string path = out_or(o, o.format == "json" ? "diagnose.json" : "diagnose.csv");
  write_atomic(path, o.format == "json" ? divergence_to_json(r).dump(1) + "\n" : divergence_csv(r));
  out << "diagnose: medians";
  for (double m : r.medians) out << " " << fixed3(m);
  out << " trend=" << (std::isnan(r.trend) ? std::string("n/a") : fixed3(r.trend)) << " -> "
      << path << "\n";
  return 0;
}

int cmd_oracle(const Options& o, std::ostream& out) {
  const RunConfig cfg = effective_config(o);
  const IdentifiedSetOracle oracle = oracle_set(cfg.dgp, cfg.resolved_grid(), cfg.x_check_count);
  const std::string path = out_or(o, o.format == "json" ? "oracle.json" : "oracle.csv");
  Json hulls = Json::array();
  out << "oracle: " << to_string(cfg.dgp.kind) << " members=" << oracle.count() << "/"
      << oracle.grid.size();
  for (Index k = 0; k < oracle.grid.dim(); ++k) {
    const Projection p = project(oracle.grid, oracle.member, k);
    hulls.push_back(Json::array({p.lower, p.upper}));
    out << " theta" << k + 1 << "=[" << fixed3(p.lower) << "," << fixed3(p.upper) << "]";
  }
  out << " -> " << path << "\n";
  if (o.format == "json") {
    Json j;
    j["dgp"] = to_string(cfg.dgp.kind);
    j["members"] = oracle.count();
    j["grid_points"] = oracle.grid.size();
    j["x_check_count"] = oracle.x_check_count;
    j["hulls"] = hulls;
    write_atomic(path, j.dump(1) + "\n");
  } else {
    std::string csv;
    for (Index k = 0; k < oracle.grid.dim(); ++k) csv += "theta" + std::to_string(k + 1) + ",";
    csv += "member\n";
    for (Index idx = 0; idx < oracle.grid.size(); ++idx) {
      const VectorXd p = oracle.grid.point(idx);
      for (Index k = 0; k < p.size(); ++k) csv += format_double(p[k]) + ",";
      csv += oracle.member[idx] ? "1\n" : "0\n";
    }
    write_atomic(path, csv);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence regions for identified sets in conditional moment inequality models",
               args.empty() ? "momentset" : args[0]};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Options o;
  const auto common = [&](CLI::App* sub, bool config_alias) {
    auto* cfg = sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    if (config_alias) sub->add_option("--design", o.config, "JSON Monte Carlo design")->excludes(cfg)->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output path");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1, 4096));
    sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  };

  auto* simulate_cmd = app.add_subcommand("simulate", "draw a sample from a DGP");
  common(simulate_cmd, false);
  simulate_cmd->add_option("-n,--n", o.n, "sample size")->check(CLI::NonNegativeNumber);

  auto* estimate_cmd = app.add_subcommand("estimate", "confidence region for one sample");
  common(estimate_cmd, false);
  estimate_cmd->add_option("--data", o.data, "sample CSV")->check(CLI::ExistingFile);
  estimate_cmd->add_option("-n,--n", o.n, "sample size when simulating")->check(CLI::Range(3, 1 << 30));

  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo tables");
  common(mc_cmd, true);
  mc_cmd->add_flag("--replications", o.replications, "also write per-replication records");

  auto* rates_cmd = app.add_subcommand("rates", "rate of convergence experiment");
  common(rates_cmd, true);

  auto* diagnose_cmd = app.add_subcommand("diagnose", "divergence of sqrt(n) T_n at a contact-set parameter");
  common(diagnose_cmd, false);

  auto* oracle_cmd = app.add_subcommand("oracle", "identified set on the parameter grid");
  common(oracle_cmd, false);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    if (simulate_cmd->parsed()) return cmd_simulate(o, out);
    if (estimate_cmd->parsed()) return cmd_estimate(o, out);
    if (mc_cmd->parsed()) return cmd_mc(o, out);
    if (rates_cmd->parsed()) return cmd_rates(o, out);
    if (diagnose_cmd->parsed()) return cmd_diagnose(o, out);
    if (oracle_cmd->parsed()) return cmd_oracle(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace momentset
