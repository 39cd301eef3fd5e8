#include "momentset/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <system_error>

namespace momentset {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  std::string t = text;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  std::size_t start = 0;
  while (start < t.size() && std::isspace(static_cast<unsigned char>(t[start]))) ++start;
  t = t.substr(start);
  if (t == "inf" || t == "+inf" || t == "Inf" || t == "infinity") return kInf;
  if (t == "-inf" || t == "-Inf" || t == "-infinity") return -kInf;
  if (t == "nan" || t == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  auto res = std::from_chars(first, t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw Error("not a number: '" + text + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Samples

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string sample_to_csv(const Sample& sample) {
  std::string out;
  for (Index k = 0; k < sample.dx(); ++k) out += (k ? ",x" : "x") + std::to_string(k + 1);
  for (Index k = 0; k < sample.dw(); ++k) out += ",w" + std::to_string(k + 1);
  out += '\n';
  for (Index i = 0; i < sample.n(); ++i) {
    for (Index k = 0; k < sample.dx(); ++k) {
      if (k) out += ',';
      out += format_double(sample.x()(i, k));
    }
    for (Index k = 0; k < sample.dw(); ++k) out += ',' + format_double(sample.w()(i, k));
    out += '\n';
  }
  return out;
}

Sample sample_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("sample CSV is empty");
  const auto header = split_csv_line(line);
  Index dx = 0, dw = 0;
  for (const auto& h : header) {
    if (h.size() >= 2 && h[0] == 'x' && dw == 0) {
      ++dx;
    } else if (h.size() >= 2 && h[0] == 'w') {
      ++dw;
    } else {
      throw Error("sample CSV header: unexpected column '" + h + "'");
    }
  }
  if (dx == 0 || dw == 0) throw Error("sample CSV needs x and w columns");

  std::vector<std::vector<double>> rows;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != dx + dw)
      throw Error("sample CSV line " + std::to_string(lineno) + ": expected " +
                  std::to_string(dx + dw) + " fields");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        row.push_back(parse_double(c));
      } catch (const Error& e) {
        throw Error("sample CSV line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  MatrixXd x(n, dx), w(n, dw);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < dx; ++k) x(i, k) = rows[i][k];
    for (Index k = 0; k < dw; ++k) w(i, k) = rows[i][dx + k];
  }
  return Sample(std::move(x), std::move(w));
}

Sample read_sample(const fs::path& path) { return sample_from_csv(read_file(path)); }

// ---------------------------------------------------------------------------
// Regions

std::string region_to_csv(const ConfidenceRegion& region) {
  const ThetaGrid& g = region.grid;
  std::string out;
  for (Index k = 0; k < g.dim(); ++k) out += "theta" + std::to_string(k + 1) + ",";
  out += "stat,member,estimator\n";
  const std::string tag = to_string(region.estimator);
  for (Index idx = 0; idx < g.size(); ++idx) {
    const VectorXd p = g.point(idx);
    for (Index k = 0; k < g.dim(); ++k) out += format_double(p[k]) + ",";
    out += format_double(region.stat.size() ? region.stat[idx]
                                             : std::numeric_limits<double>::quiet_NaN());
    out += region.member[idx] ? ",1," : ",0,";
    out += tag;
    out += '\n';
  }
  return out;
}

namespace {

Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

Json vector_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

Json vector_json(const VectorXd& v) {
  Json a = Json::array();
  for (Index k = 0; k < v.size(); ++k) a.push_back(number_json(v[k]));
  return a;
}

}  // namespace

Json region_summary(const ConfidenceRegion& region) {
  Json j;
  j["estimator"] = to_string(region.estimator);
  j["c_used"] = number_json(region.c_used);
  j["grid_points"] = region.grid.size();
  j["members"] = region.count();
  j["empty"] = region.empty();
  j["touches_grid_boundary"] = region.touches_grid_boundary();
  Json hulls = Json::array();
  for (Index k = 0; k < region.grid.dim(); ++k) {
    const Projection p = project(region, k);
    hulls.push_back(Json::array({number_json(p.lower), number_json(p.upper)}));
  }
  j["hulls"] = hulls;
  return j;
}

// ---------------------------------------------------------------------------
// Monte Carlo tables

namespace {

std::string prob_label(const char* prefix, double p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, static_cast<int>(std::lround(p * 100)));
  return buf;
}

void append_values(std::string& out, const std::vector<double>& v) {
  for (double x : v) out += "," + format_double(x);
}

}  // namespace

std::string table1_csv(const McReport& report, Estimator e) {
  std::string out = "n";
  for (double p : kDistanceProbs) out += "," + prob_label("q", p);
  out += ",coverage\n";
  for (Index n : report.design.sizes) {
    const McRow& r = report.row(e, n);
    out += std::to_string(n);
    append_values(out, r.d_h_q);
    out += "," + format_double(r.coverage) + "\n";
  }
  return out;
}

std::string table2_csv(const McReport& report, Estimator e) {
  std::string out = "param,n";
  for (double p : kDistanceProbs) out += "," + prob_label("q", p);
  out += '\n';
  const Index dim = report.oracle.grid.dim();
  for (Index k = 0; k < dim; ++k) {
    for (Index n : report.design.sizes) {
      const McRow& r = report.row(e, n);
      out += "theta" + std::to_string(k + 1) + "," + std::to_string(n);
      append_values(out, r.proj_d_h_q[k]);
      out += '\n';
    }
  }
  return out;
}

std::string table3_csv(const McReport& report, Estimator e) {
  std::string out = "param,n";
  for (double p : kLowerProbs) out += "," + prob_label("lower_q", p);
  for (double p : kUpperProbs) out += "," + prob_label("upper_q", p);
  out += '\n';
  const Index dim = report.oracle.grid.dim();
  for (Index k = 0; k < dim; ++k) {
    for (Index n : report.design.sizes) {
      const McRow& r = report.row(e, n);
      out += "theta" + std::to_string(k + 1) + "," + std::to_string(n);
      append_values(out, r.lower_q[k]);
      append_values(out, r.upper_q[k]);
      out += '\n';
    }
  }
  return out;
}

std::string replications_csv(const McReport& report) {
  const Index dim = report.oracle.grid.dim();
  std::string out = "estimator,n,rep,seed,ok,covered,empty,touches_boundary,count,d_h";
  for (Index k = 0; k < dim; ++k) {
    const std::string t = std::to_string(k + 1);
    out += ",proj_d_h" + t + ",lower" + t + ",upper" + t;
  }
  out += ",error\n";
  for (const auto& r : report.records) {
    out += to_string(r.estimator) + "," + std::to_string(r.n) + "," + std::to_string(r.rep) + "," +
           std::to_string(r.seed) + "," + (r.ok ? "1" : "0") + "," + (r.covered ? "1" : "0") + "," +
           (r.empty ? "1" : "0") + "," + (r.touches_boundary ? "1" : "0") + "," +
           std::to_string(r.count) + "," + format_double(r.d_h);
    for (Index k = 0; k < dim; ++k) {
      const auto at = [&](const std::vector<double>& v) {
        return k < static_cast<Index>(v.size()) ? format_double(v[k]) : std::string("nan");
      };
      out += "," + at(r.proj_d_h) + "," + at(r.lower) + "," + at(r.upper);
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += "," + err + "\n";
  }
  return out;
}

Json report_to_json(const McReport& report) {
  Json j;
  Json oracle;
  oracle["members"] = report.oracle.count();
  oracle["x_check_count"] = report.oracle.x_check_count;
  Json hulls = Json::array();
  for (const auto& p : report.oracle_projection)
    hulls.push_back(Json::array({number_json(p.lower), number_json(p.upper)}));
  oracle["hulls"] = hulls;
  j["oracle"] = oracle;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row;
    row["estimator"] = to_string(r.estimator);
    row["n"] = r.n;
    row["reps_ok"] = r.reps_ok;
    row["failures"] = r.failures;
    row["empty_regions"] = r.empty_regions;
    row["boundary_touches"] = r.boundary_touches;
    row["coverage"] = number_json(r.coverage);
    row["d_h_quantiles"] = vector_json(r.d_h_q);
    Json proj = Json::array(), lo = Json::array(), up = Json::array();
    for (std::size_t k = 0; k < r.proj_d_h_q.size(); ++k) {
      proj.push_back(vector_json(r.proj_d_h_q[k]));
      lo.push_back(vector_json(r.lower_q[k]));
      up.push_back(vector_json(r.upper_q[k]));
    }
    row["projection_d_h_quantiles"] = proj;
    row["lower_quantiles"] = lo;
    row["upper_quantiles"] = up;
    row["fraction_lower_positive"] = vector_json(r.frac_lower_positive);
    rows.push_back(row);
  }
  j["probabilities"] = {{"distance", kDistanceProbs}, {"lower", kLowerProbs}, {"upper", kUpperProbs}};
  j["rows"] = rows;
  return j;
}

std::string rates_csv(const RateReport& report) {
  std::string out = "n,median_d_h,rate_value,observed_shrink,predicted_shrink\n";
  for (std::size_t k = 0; k < report.sizes.size(); ++k) {
    out += std::to_string(report.sizes[k]) + "," + format_double(report.medians[k]) + "," +
           format_double(report.rate_values[k]);
    if (k == 0 || k - 1 >= report.observed_shrink.size()) {
      out += ",,\n";
    } else {
      out += "," + format_double(report.observed_shrink[k - 1]) + "," +
             format_double(report.predicted_shrink[k - 1]) + "\n";
    }
  }
  return out;
}

Json rates_to_json(const RateReport& report) {
  Json j;
  j["sizes"] = report.sizes;
  j["medians"] = vector_json(report.medians);
  j["rate_values"] = vector_json(report.rate_values);
  j["fitted_exponent"] = number_json(report.fitted_exponent);
  j["predicted_exponent"] = number_json(report.predicted_exponent);
  j["observed_shrink"] = vector_json(report.observed_shrink);
  j["predicted_shrink"] = vector_json(report.predicted_shrink);
  j["excluded"] = report.excluded;
  j["warnings"] = report.warnings;
  return j;
}

std::string divergence_csv(const DivergenceReport& report) {
  std::string out = "n,median_scaled_stat\n";
  for (std::size_t k = 0; k < report.sizes.size(); ++k)
    out += std::to_string(report.sizes[k]) + "," + format_double(report.medians[k]) + "\n";
  return out;
}

Json divergence_to_json(const DivergenceReport& report) {
  Json j;
  j["sizes"] = report.sizes;
  j["medians"] = vector_json(report.medians);
  j["trend"] = number_json(report.trend);
  return j;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Rethrows a ConfigError from library validation with its key under `prefix`.
template <class F>
auto rekeyed(const std::string& prefix, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (!e.key.empty() && msg.rfind(e.key + ": ", 0) == 0) msg = msg.substr(e.key.size() + 2);
    throw ConfigError(e.key.rfind(prefix, 0) == 0 ? e.key : join(prefix, e.key), msg);
  }
}

void check_object(const Json& j, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return item.key() == a; });
    if (!known) throw ConfigError(join(path, item.key()), "unknown key");
  }
}

double as_number(const Json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "-inf") return s == "inf" ? kInf : -kInf;
  }
  throw ConfigError(path, "expected a number");
}

double number_or(const Json& obj, const std::string& path, const char* key, double def) {
  if (!obj.contains(key)) return def;
  return as_number(obj.at(key), join(path, key));
}

Index count_or(const Json& obj, const std::string& path, const char* key, Index def,
               Index min_value) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  const auto value = v.get<std::int64_t>();
  if (value < min_value)
    throw ConfigError(join(path, key), "must be at least " + std::to_string(min_value));
  return static_cast<Index>(value);
}

std::string string_or(const Json& obj, const std::string& path, const char* key,
                      const std::string& def) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

VectorXd as_vector(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k)
    out[static_cast<Index>(k)] = as_number(v[k], path + "[" + std::to_string(k) + "]");
  return out;
}

std::vector<Index> as_sizes(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of integers");
  std::vector<Index> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number_integer() || v[k].get<std::int64_t>() < 3)
      throw ConfigError(path + "[" + std::to_string(k) + "]", "sample sizes are integers >= 3");
    out.push_back(static_cast<Index>(v[k].get<std::int64_t>()));
  }
  return out;
}

std::variant<TuningPolicy::DefaultCritical, TuningPolicy::FixedValue> critical_from(
    const Json& j, const std::string& path) {
  check_object(j, path, {"rule", "value"});
  const std::string rule = string_or(j, path, "rule", "paper_default");
  if (rule == "paper_default") return TuningPolicy::DefaultCritical{};
  if (rule == "fixed") {
    if (!j.contains("value")) throw ConfigError(join(path, "value"), "fixed rule needs a value");
    return TuningPolicy::FixedValue{as_number(j.at("value"), join(path, "value"))};
  }
  throw ConfigError(join(path, "rule"), "expected paper_default or fixed");
}

Json critical_to(const std::variant<TuningPolicy::DefaultCritical, TuningPolicy::FixedValue>& c) {
  if (const auto* f = std::get_if<TuningPolicy::FixedValue>(&c))
    return {{"rule", "fixed"}, {"value", number_json(f->value)}};
  return {{"rule", "paper_default"}};
}

TuningPolicy tuning_from(const Json& j, const std::string& path) {
  check_object(j, path, {"sigma", "critical"});
  TuningPolicy t;
  if (j.contains("sigma")) {
    const std::string sp = join(path, "sigma");
    const Json& s = j.at("sigma");
    check_object(s, sp, {"rule", "scale", "value"});
    const std::string rule = string_or(s, sp, "rule", "paper_default");
    if (rule == "paper_default") {
      const double scale = number_or(s, sp, "scale", 0.5);
      if (!(scale > 0.0)) throw ConfigError(join(sp, "scale"), "must be positive");
      t.sigma_rule = TuningPolicy::DefaultSigma{scale};
    } else if (rule == "fixed") {
      if (!s.contains("value")) throw ConfigError(join(sp, "value"), "fixed rule needs a value");
      const double v = as_number(s.at("value"), join(sp, "value"));
      if (!(v > 0.0)) throw ConfigError(join(sp, "value"), "must be positive");
      t.sigma_rule = TuningPolicy::FixedValue{v};
    } else {
      throw ConfigError(join(sp, "rule"), "expected paper_default or fixed");
    }
  }
  if (j.contains("critical")) t.c_rule = critical_from(j.at("critical"), join(path, "critical"));
  return t;
}

Json tuning_to(const TuningPolicy& t) {
  Json j;
  if (const auto* f = std::get_if<TuningPolicy::FixedValue>(&t.sigma_rule)) {
    j["sigma"] = {{"rule", "fixed"}, {"value", number_json(f->value)}};
  } else {
    j["sigma"] = {{"rule", "paper_default"},
                  {"scale", std::get<TuningPolicy::DefaultSigma>(t.sigma_rule).scale}};
  }
  j["critical"] = critical_to(t.c_rule);
  return j;
}

ModelSpec model_from(const Json& j, const std::string& path) {
  check_object(j, path,
               {"kind", "dx", "tau", "y_lower", "y_upper", "theta_lower", "theta_upper",
                "outcome_bound", "regressor_bound", "transform"});
  ModelSpec m;
  m.kind = rekeyed(path, [&] {
    return model_kind_from_string(string_or(j, path, "kind", to_string(m.kind)));
  });
  m.dx = count_or(j, path, "dx", m.dx, 0);
  m.tau = number_or(j, path, "tau", m.tau);
  m.y_lower = number_or(j, path, "y_lower", m.y_lower);
  m.y_upper = number_or(j, path, "y_upper", m.y_upper);
  if (!j.contains("theta_lower")) throw ConfigError(join(path, "theta_lower"), "required");
  if (!j.contains("theta_upper")) throw ConfigError(join(path, "theta_upper"), "required");
  m.theta_box.lower = as_vector(j.at("theta_lower"), join(path, "theta_lower"));
  m.theta_box.upper = as_vector(j.at("theta_upper"), join(path, "theta_upper"));
  m.outcome_bound = number_or(j, path, "outcome_bound", m.outcome_bound);
  m.regressor_bound = number_or(j, path, "regressor_bound", m.regressor_bound);
  rekeyed(path, [&] { return build_model(m); });
  return m;
}

BoundaryTransform transform_from(const Json& j, const std::string& path) {
  check_object(j, path, {"kind", "x0", "k_x", "phi_x"});
  BoundaryTransform t;
  const std::string kind = string_or(j, path, "kind", "finite_support");
  if (kind == "finite_support") {
    t.kind = BoundaryTransform::Kind::finite_support;
    if (!j.contains("x0")) throw ConfigError(join(path, "x0"), "required for finite_support");
    t.x0 = as_vector(j.at("x0"), join(path, "x0"));
  } else if (kind == "at_infinity") {
    t.kind = BoundaryTransform::Kind::at_infinity;
    t.k_x = number_or(j, path, "k_x", 0.0);
    if (!std::isfinite(t.k_x)) throw ConfigError(join(path, "k_x"), "must be finite");
  } else {
    throw ConfigError(join(path, "kind"), "expected finite_support or at_infinity");
  }
  t.phi_x = number_or(j, path, "phi_x", t.kind == BoundaryTransform::Kind::at_infinity ? 2.0 : 0.0);
  if (t.kind == BoundaryTransform::Kind::finite_support && !(t.phi_x > -1.0))
    throw ConfigError(join(path, "phi_x"), "finite_support needs phi_x > -1");
  if (t.kind == BoundaryTransform::Kind::at_infinity && !(t.phi_x > 1.0))
    throw ConfigError(join(path, "phi_x"), "at_infinity needs phi_x > 1");
  return t;
}

Json transform_to(const BoundaryTransform& t) {
  if (t.kind == BoundaryTransform::Kind::at_infinity)
    return {{"kind", "at_infinity"}, {"k_x", t.k_x}, {"phi_x", t.phi_x}};
  return {{"kind", "finite_support"}, {"x0", vector_json(t.x0)}, {"phi_x", t.phi_x}};
}

Json model_to(const ModelSpec& m) {
  return {{"kind", to_string(m.kind)},
          {"dx", m.dx},
          {"tau", m.tau},
          {"y_lower", number_json(m.y_lower)},
          {"y_upper", number_json(m.y_upper)},
          {"theta_lower", vector_json(m.theta_box.lower)},
          {"theta_upper", vector_json(m.theta_box.upper)},
          {"outcome_bound", number_json(m.outcome_bound)},
          {"regressor_bound", number_json(m.regressor_bound)}};
}

DgpSpec dgp_from(const Json& j, const std::string& path) {
  check_object(j, path, {"kind", "true_theta", "noise_sd", "phi_m", "phi_x", "tail", "p_max"});
  DgpSpec d;
  d.kind = rekeyed(path, [&] {
    return dgp_kind_from_string(string_or(j, path, "kind", to_string(d.kind)));
  });
  if (j.contains("true_theta")) d.true_theta = as_vector(j.at("true_theta"), join(path, "true_theta"));
  d.noise_sd = number_or(j, path, "noise_sd", d.noise_sd);
  d.phi_m = number_or(j, path, "phi_m", d.phi_m);
  d.phi_x = number_or(j, path, "phi_x", d.phi_x);
  const std::string tail = string_or(j, path, "tail", "finite");
  if (tail == "finite") {
    d.tail = TailKind::finite;
  } else if (tail == "infinity") {
    d.tail = TailKind::infinity;
  } else {
    throw ConfigError(join(path, "tail"), "expected finite or infinity");
  }
  d.p_max = number_or(j, path, "p_max", d.p_max);
  return rekeyed(path, [&] { return resolve(d); });
}

Json dgp_to(const DgpSpec& d) {
  return {{"kind", to_string(d.kind)},
          {"true_theta", vector_json(d.true_theta)},
          {"noise_sd", d.noise_sd},
          {"phi_m", d.phi_m},
          {"phi_x", d.phi_x},
          {"tail", d.tail == TailKind::finite ? "finite" : "infinity"},
          {"p_max", d.p_max}};
}

ThetaGrid grid_from(const Json& j, const std::string& path) {
  check_object(j, path, {"lower", "upper", "pitch", "axes"});
  return rekeyed(path, [&] {
    if (j.contains("axes")) {
      if (j.contains("lower") || j.contains("upper") || j.contains("pitch"))
        throw ConfigError("axes", "give either axes or lower/upper/pitch");
      const Json& a = j.at("axes");
      if (!a.is_array()) throw ConfigError("axes", "expected an array of arrays");
      std::vector<VectorXd> axes;
      for (std::size_t k = 0; k < a.size(); ++k)
        axes.push_back(as_vector(a[k], join(path, "axes[" + std::to_string(k) + "]")));
      return ThetaGrid(std::move(axes));
    }
    for (const char* key : {"lower", "upper", "pitch"})
      if (!j.contains(key)) throw ConfigError(key, "required");
    return ThetaGrid::uniform(as_vector(j.at("lower"), join(path, "lower")),
                              as_vector(j.at("upper"), join(path, "upper")),
                              as_vector(j.at("pitch"), join(path, "pitch")));
  });
}

Json grid_to(const ThetaGrid& g) {
  Json axes = Json::array();
  for (Index k = 0; k < g.dim(); ++k) axes.push_back(vector_json(g.axis(k)));
  return {{"axes", axes}};
}

InstrumentFamily family_from(const Json& j, const std::string& path) {
  check_object(j, path, {"kind", "corner_cap", "centers", "bandwidths", "kernel"});
  const std::string kind = string_or(j, path, "kind", "all_data_intervals");
  if (kind == "all_data_intervals") return InstrumentFamily::intervals();
  if (kind == "all_data_boxes") return InstrumentFamily::boxes(count_or(j, path, "corner_cap", 0, 0));
  if (kind != "kernel_dilations")
    throw ConfigError(join(path, "kind"),
                      "expected all_data_intervals, all_data_boxes or kernel_dilations");
  std::vector<VectorXd> centers;
  if (!j.contains("centers") || !j.at("centers").is_array())
    throw ConfigError(join(path, "centers"), "expected an array of points");
  const Json& c = j.at("centers");
  for (std::size_t k = 0; k < c.size(); ++k)
    centers.push_back(as_vector(c[k], join(path, "centers[" + std::to_string(k) + "]")));
  if (!j.contains("bandwidths")) throw ConfigError(join(path, "bandwidths"), "required");
  const VectorXd bw = as_vector(j.at("bandwidths"), join(path, "bandwidths"));
  const KernelId kernel = rekeyed(path, [&] {
    return kernel_from_string(string_or(j, path, "kernel", "uniform"));
  });
  return InstrumentFamily::kernel_dilations(std::move(centers),
                                            std::vector<double>(bw.begin(), bw.end()), kernel);
}

Json family_to(const InstrumentFamily& f) {
  switch (f.kind) {
    case InstrumentFamily::Kind::all_data_intervals:
      return {{"kind", "all_data_intervals"}};
    case InstrumentFamily::Kind::all_data_boxes:
      return {{"kind", "all_data_boxes"}, {"corner_cap", f.corner_cap}};
    case InstrumentFamily::Kind::kernel_dilations:
      break;
  }
  Json centers = Json::array();
  for (const auto& c : f.centers) centers.push_back(vector_json(c));
  return {{"kind", "kernel_dilations"},
          {"centers", centers},
          {"bandwidths", vector_json(f.bandwidths)},
          {"kernel", to_string(f.kernel)}};
}

SFunction s_from(const Json& j, const std::string& path) {
  check_object(j, path, {"kind", "p"});
  const std::string kind = string_or(j, path, "kind", "sup_norm");
  if (kind == "sup_norm") return SFunction::sup_norm();
  if (kind == "p_norm") {
    const double p = number_or(j, path, "p", 2.0);
    if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError(join(path, "p"), "needs 1 <= p < inf");
    return SFunction::p_norm(p);
  }
  throw ConfigError(join(path, "kind"), "expected sup_norm or p_norm");
}

Json s_to(const SFunction& s) {
  if (s.kind == SFunction::Kind::neg_part_p_norm) return {{"kind", "p_norm"}, {"p", s.p}};
  return {{"kind", "sup_norm"}};
}

KernelSpec kernel_from(const Json& j, const std::string& path) {
  check_object(j, path, {"kernel", "bandwidth", "side_a", "critical"});
  KernelSpec k;
  k.kernel = rekeyed(path, [&] {
    return kernel_from_string(string_or(j, path, "kernel", to_string(k.kernel)));
  });
  if (j.contains("bandwidth")) {
    const std::string bp = join(path, "bandwidth");
    const Json& b = j.at("bandwidth");
    check_object(b, bp, {"rule", "h", "c", "exponent", "alpha"});
    const std::string rule = string_or(b, bp, "rule", "optimal");
    if (rule == "optimal") {
      const double alpha = number_or(b, bp, "alpha", 2.0);
      if (!(alpha > 0.0)) throw ConfigError(join(bp, "alpha"), "must be positive");
      k.h_rule = KernelSpec::Optimal{alpha};
    } else if (rule == "fixed") {
      const double h = number_or(b, bp, "h", 0.5);
      if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError(join(bp, "h"), "must be positive");
      k.h_rule = KernelSpec::Fixed{h};
    } else if (rule == "power") {
      const double c = number_or(b, bp, "c", 1.0);
      const double e = number_or(b, bp, "exponent", 0.2);
      if (!(c > 0.0)) throw ConfigError(join(bp, "c"), "must be positive");
      if (!(e > 0.0)) throw ConfigError(join(bp, "exponent"), "must be positive");
      k.h_rule = KernelSpec::Power{c, e};
    } else {
      throw ConfigError(join(bp, "rule"), "expected optimal, fixed or power");
    }
  }
  k.side_a = number_or(j, path, "side_a", k.side_a);
  if (!(k.side_a > 0.0)) throw ConfigError(join(path, "side_a"), "must be positive");
  if (j.contains("critical")) k.c_rule = critical_from(j.at("critical"), join(path, "critical"));
  return k;
}

Json kernel_to(const KernelSpec& k) {
  Json b;
  if (const auto* f = std::get_if<KernelSpec::Fixed>(&k.h_rule)) {
    b = {{"rule", "fixed"}, {"h", f->h}};
  } else if (const auto* p = std::get_if<KernelSpec::Power>(&k.h_rule)) {
    b = {{"rule", "power"}, {"c", p->c}, {"exponent", p->exponent}};
  } else {
    b = {{"rule", "optimal"}, {"alpha", std::get<KernelSpec::Optimal>(k.h_rule).alpha}};
  }
  return {{"kernel", to_string(k.kernel)},
          {"bandwidth", b},
          {"side_a", k.side_a},
          {"critical", critical_to(k.c_rule)}};
}

}  // namespace

ModelSpec RunConfig::resolved_model() const { return model ? *model : model_spec_for(dgp); }

ThetaGrid RunConfig::resolved_grid() const { return grid ? *grid : default_grid(dgp); }

McDesign RunConfig::design() const {
  McDesign d;
  d.dgp = dgp;
  d.estimators = estimators;
  d.sizes = sizes;
  d.reps = reps;
  d.base_seed = seed;
  d.grid = resolved_grid();
  d.tuning = tuning;
  d.family = family;
  d.s = s;
  d.kernel = kernel;
  d.bounded = bounded;
  d.x_check_count = x_check_count;
  d.strategy = strategy;
  d.threads = threads;
  return d;
}

RunConfig config_from_json(const Json& j) {
  check_object(j, "",
               {"schema_version", "dgp", "model", "grid", "tuning", "family", "s", "kernel",
                "bounded", "strategy", "estimators", "seed", "threads", "n", "data", "mc", "rates",
                "diagnose"});
  if (!j.contains("schema_version")) throw ConfigError("schema_version", "required");
  if (!j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<std::int64_t>() != kSchemaVersion)
    throw ConfigError("schema_version", "expected " + std::to_string(kSchemaVersion));

  RunConfig c;
  if (j.contains("dgp")) c.dgp = dgp_from(j.at("dgp"), "dgp");
  c.dgp = rekeyed("dgp", [&] { return resolve(c.dgp); });
  if (j.contains("model")) {
    c.model = model_from(j.at("model"), "model");
    if (j.at("model").contains("transform")) {
      c.transform = transform_from(j.at("model").at("transform"), "model.transform");
      if (c.transform->kind == BoundaryTransform::Kind::finite_support &&
          c.transform->x0.size() != c.model->dx)
        throw ConfigError("model.transform.x0", "needs one entry per x column");
    }
  }
  if (j.contains("grid")) c.grid = grid_from(j.at("grid"), "grid");
  if (j.contains("tuning")) c.tuning = tuning_from(j.at("tuning"), "tuning");
  if (j.contains("family")) c.family = family_from(j.at("family"), "family");
  if (j.contains("s")) c.s = s_from(j.at("s"), "s");
  if (j.contains("kernel")) c.kernel = kernel_from(j.at("kernel"), "kernel");
  if (j.contains("bounded")) {
    check_object(j.at("bounded"), "bounded", {"critical"});
    if (j.at("bounded").contains("critical"))
      c.bounded.c_rule = critical_from(j.at("bounded").at("critical"), "bounded.critical");
  }
  c.strategy = rekeyed("strategy", [&] {
    return region_strategy_from_string(string_or(j, "", "strategy", to_string(c.strategy)));
  });
  if (j.contains("estimators")) {
    const Json& e = j.at("estimators");
    if (!e.is_array() || e.empty())
      throw ConfigError("estimators", "expected a nonempty array of names");
    c.estimators.clear();
    for (std::size_t k = 0; k < e.size(); ++k) {
      const std::string key = "estimators[" + std::to_string(k) + "]";
      if (!e[k].is_string()) throw ConfigError(key, "expected a string");
      try {
        c.estimators.push_back(estimator_from_string(e[k].get<std::string>()));
      } catch (const ConfigError&) {
        throw ConfigError(key, "unknown estimator '" + e[k].get<std::string>() + "'");
      }
    }
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.threads = static_cast<int>(count_or(j, "", "threads", c.threads, 1));
  c.n = count_or(j, "", "n", c.n, 0);
  c.data = string_or(j, "", "data", c.data);

  if (j.contains("mc")) {
    const Json& m = j.at("mc");
    check_object(m, "mc", {"sizes", "reps", "x_check_count"});
    if (m.contains("sizes")) c.sizes = as_sizes(m.at("sizes"), "mc.sizes");
    c.reps = count_or(m, "mc", "reps", c.reps, 1);
    c.x_check_count = count_or(m, "mc", "x_check_count", c.x_check_count, 2);
  }
  if (j.contains("rates")) {
    const Json& r = j.at("rates");
    check_object(r, "rates", {"sizes", "variable", "predicted_exponent"});
    if (r.contains("sizes")) c.rate_sizes = as_sizes(r.at("sizes"), "rates.sizes");
    if (c.rate_sizes.size() < 3) throw ConfigError("rates.sizes", "needs at least 3 sizes");
    c.rate_variable = rekeyed("rates", [&] {
      return rate_variable_from_string(string_or(r, "rates", "variable", to_string(c.rate_variable)));
    });
    c.predicted_exponent = number_or(r, "rates", "predicted_exponent", c.predicted_exponent);
  }
  if (j.contains("diagnose")) {
    const Json& d = j.at("diagnose");
    check_object(d, "diagnose", {"sizes", "reps"});
    if (d.contains("sizes")) c.diagnose_sizes = as_sizes(d.at("sizes"), "diagnose.sizes");
    c.diagnose_reps = count_or(d, "diagnose", "reps", c.diagnose_reps, 1);
  }

  const ModelSpec model = c.resolved_model();
  const ThetaGrid grid = c.resolved_grid();
  if (grid.dim() != model.theta_box.dim())
    throw ConfigError("grid", "grid has " + std::to_string(grid.dim()) +
                                  " axes but the model parameter has " +
                                  std::to_string(model.theta_box.dim()));
  return c;
}

RunConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["dgp"] = dgp_to(c.dgp);
  j["model"] = model_to(c.resolved_model());
  if (c.transform) j["model"]["transform"] = transform_to(*c.transform);
  j["grid"] = grid_to(c.resolved_grid());
  j["tuning"] = tuning_to(c.tuning);
  j["family"] = family_to(c.family);
  j["s"] = s_to(c.s);
  j["kernel"] = kernel_to(c.kernel);
  j["bounded"] = {{"critical", critical_to(c.bounded.c_rule)}};
  j["strategy"] = to_string(c.strategy);
  Json est = Json::array();
  for (Estimator e : c.estimators) est.push_back(to_string(e));
  j["estimators"] = est;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["n"] = c.n;
  j["data"] = c.data;
  j["mc"] = {{"sizes", c.sizes}, {"reps", c.reps}, {"x_check_count", c.x_check_count}};
  j["rates"] = {{"sizes", c.rate_sizes},
                {"variable", to_string(c.rate_variable)},
                {"predicted_exponent", c.predicted_exponent}};
  j["diagnose"] = {{"sizes", c.diagnose_sizes}, {"reps", c.diagnose_reps}};
  return j;
}

}  // namespace momentset
