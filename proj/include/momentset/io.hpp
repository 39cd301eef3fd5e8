#pragma once

// Files and configuration: sample CSVs, region exports, Monte Carlo tables,
// and the JSON run configuration.

#include "momentset/alt.hpp"
#include "momentset/core.hpp"
#include "momentset/mc.hpp"
#include "momentset/model.hpp"
#include "momentset/regions.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace momentset {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Writes `content` to a temporary file next to `path`, then renames it over
/// `path`. Parent directories are created.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double; "inf", "-inf"
/// and "nan" for the special values.
std::string format_double(double v);
double parse_double(const std::string& text);

// ---------------------------------------------------------------------------
// Samples
//
// Header x1..x{dx},w1..w{dw}; one row per observation.

std::string sample_to_csv(const Sample& sample);
Sample sample_from_csv(const std::string& text);
Sample read_sample(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Regions

/// theta1..theta{d},stat,member,estimator; one row per grid point.
std::string region_to_csv(const ConfidenceRegion& region);
/// c_used, member counts and per-axis hulls.
Json region_summary(const ConfidenceRegion& region);

// ---------------------------------------------------------------------------
// Monte Carlo tables

/// n,q25,q50,q75,q90,q95,coverage for one estimator.
std::string table1_csv(const McReport& report, Estimator e);
/// param,n,q25,...,q95 of the per-axis projection distances.
std::string table2_csv(const McReport& report, Estimator e);
/// param,n, then quantiles of the hull lower ends and of the upper ends.
std::string table3_csv(const McReport& report, Estimator e);
std::string replications_csv(const McReport& report);
Json report_to_json(const McReport& report);

std::string rates_csv(const RateReport& report);
Json rates_to_json(const RateReport& report);
std::string divergence_csv(const DivergenceReport& report);
Json divergence_to_json(const DivergenceReport& report);

// ---------------------------------------------------------------------------
// Configuration

/// Everything a CLI run can be configured with. Blocks that a subcommand
/// does not use are ignored by it.
struct RunConfig {
  DgpSpec dgp;
  /// Unset: the model implied by the DGP.
  std::optional<ModelSpec> model;
  /// Applied to the sample's X before estimation.
  std::optional<BoundaryTransform> transform;
  /// Unset: the DGP's default grid.
  std::optional<ThetaGrid> grid;
  TuningPolicy tuning = TuningPolicy::standard(0.5);
  InstrumentFamily family = InstrumentFamily::intervals();
  SFunction s = SFunction::sup_norm();
  KernelSpec kernel;
  BoundedWeightPolicy bounded;
  RegionStrategy strategy = RegionStrategy::automatic;

  std::vector<Estimator> estimators{Estimator::weighted_ks};
  std::uint64_t seed = 20240601;
  int threads = 1;

  // simulate / estimate
  Index n = 500;
  std::string data;  // sample CSV for estimate; empty: simulate from the DGP

  // mc
  std::vector<Index> sizes{200, 500, 1000};
  Index reps = 1000;
  Index x_check_count = 1201;

  // rates
  std::vector<Index> rate_sizes{200, 500, 1000};
  RateVariable rate_variable = RateVariable::c2_log_n_over_n;
  double predicted_exponent = 0.4;

  // diagnose
  std::vector<Index> diagnose_sizes{200, 800, 3200};
  Index diagnose_reps = 200;

  ModelSpec resolved_model() const;
  ThetaGrid resolved_grid() const;
  McDesign design() const;
};

/// Parses a configuration document. Missing keys keep their defaults; a bad
/// value raises ConfigError naming the key path (e.g. "tuning.sigma.scale").
RunConfig config_from_json(const Json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Full document with every default materialized.
Json config_to_json(const RunConfig& cfg);

}  // namespace momentset
