#include "momentset/core.hpp"

#include <algorithm>
#include <cmath>

namespace momentset {

Sample::Sample(MatrixXd x, MatrixXd w) : x_(std::move(x)), w_(std::move(w)) {
  if (x_.rows() != w_.rows()) {
    throw DimensionError("sample: x has " + std::to_string(x_.rows()) + " rows but w has " +
                         std::to_string(w_.rows()));
  }
  if (!x_.allFinite()) throw InvariantViolation("sample: x must be finite");
  if (w_.array().isNaN().any()) throw InvariantViolation("sample: w contains NaN");
}

bool Sample::has_infinite_w() const { return (w_.array().abs() == kInf).any(); }

double kernel_value(KernelId k, double u) {
  const double a = std::abs(u);
  if (a > 1.0) return 0.0;
  switch (k) {
    case KernelId::uniform:
      return 0.5;
    case KernelId::epanechnikov:
      return 0.75 * (1.0 - u * u);
    case KernelId::triangular:
      return 1.0 - a;
  }
  return 0.0;
}

double kernel_value(KernelId k, const Eigen::Ref<const VectorXd>& u) {
  double v = 1.0;
  for (Index i = 0; i < u.size() && v > 0.0; ++i) v *= kernel_value(k, u[i]);
  return v;
}

KernelId kernel_from_string(const std::string& s) {
  if (s == "uniform") return KernelId::uniform;
  if (s == "epanechnikov") return KernelId::epanechnikov;
  if (s == "triangular") return KernelId::triangular;
  throw ConfigError("kernel", "unknown kernel '" + s + "'");
}

std::string to_string(KernelId k) {
  switch (k) {
    case KernelId::uniform:
      return "uniform";
    case KernelId::epanechnikov:
      return "epanechnikov";
    case KernelId::triangular:
      return "triangular";
  }
  return "?";
}

Index instrument_dim(const Instrument& g) {
  return std::visit(
      [](const auto& v) -> Index {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BoxInstrument>) {
          return v.lower.size();
        } else {
          return v.center.size();
        }
      },
      g);
}

double eval_instrument(const Instrument& g, const Eigen::Ref<const VectorXd>& x_row) {
  if (instrument_dim(g) != x_row.size()) {
    throw DimensionError("instrument of dimension " + std::to_string(instrument_dim(g)) +
                         " applied to x of dimension " + std::to_string(x_row.size()));
  }
  if (const auto* box = std::get_if<BoxInstrument>(&g)) {
    for (Index k = 0; k < x_row.size(); ++k) {
      if (!(box->lower[k] < x_row[k] && x_row[k] <= box->upper[k])) return 0.0;
    }
    return 1.0;
  }
  const auto& ker = std::get<KernelInstrument>(g);
  if (!(ker.bandwidth > 0.0)) throw DomainError("kernel instrument bandwidth must be positive");
  return kernel_value(ker.kernel, (x_row - ker.center) / ker.bandwidth);
}

InstrumentFamily InstrumentFamily::kernel_dilations(std::vector<VectorXd> centers,
                                                    std::vector<double> bandwidths, KernelId k) {
  InstrumentFamily f;
  f.kind = Kind::kernel_dilations;
  f.centers = std::move(centers);
  f.bandwidths = std::move(bandwidths);
  f.kernel = k;
  return f;
}

double SFunction::k_s1(Index d_y) const {
  if (kind == Kind::neg_part_sup_norm) return 1.0;
  return std::pow(static_cast<double>(d_y), -1.0 / p);
}

double s_value(const SFunction& s, const Eigen::Ref<const VectorXd>& t) {
  if (s.kind == SFunction::Kind::neg_part_sup_norm) {
    double v = 0.0;
    for (Index j = 0; j < t.size(); ++j) v = std::max(v, -t[j]);
    return v;
  }
  double acc = 0.0;
  for (Index j = 0; j < t.size(); ++j) {
    if (t[j] < 0.0) acc += std::pow(-t[j], s.p);
  }
  return std::pow(acc, 1.0 / s.p);
}

}  // namespace momentset
