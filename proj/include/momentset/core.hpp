#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace momentset {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowVectorXd = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape disagreement between a row, a sample or a parameter and a model.
struct DimensionError : Error {
  using Error::Error;
};

/// A documented invariant failed on actual data (unbounded moment, NaN, ...).
struct InvariantViolation : Error {
  using Error::Error;
};

/// Input outside the domain of an operation (empty sample, n < 3, ...).
struct DomainError : Error {
  using Error::Error;
};

/// Bad user configuration. `key` names the offending setting when known.
struct ConfigError : Error {
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key(std::move(key)) {}
  std::string key;
};

// ---------------------------------------------------------------------------
// Sample

/// n iid observations. Row i of `x` pairs with row i of `w`. `x` is finite;
/// `w` may hold +-inf for fully censored endpoints.
class Sample {
 public:
  Sample() = default;
  Sample(MatrixXd x, MatrixXd w);

  Index n() const { return x_.rows(); }
  Index dx() const { return x_.cols(); }
  Index dw() const { return w_.cols(); }

  const MatrixXd& x() const { return x_; }
  const MatrixXd& w() const { return w_; }

  bool has_infinite_w() const;

 private:
  MatrixXd x_;
  MatrixXd w_;
};

// ---------------------------------------------------------------------------
// Instruments

enum class KernelId { uniform, epanechnikov, triangular };

/// One-dimensional kernel profile. Each integrates to one over R.
double kernel_value(KernelId k, double u);
/// Product kernel over the coordinates of `u`.
double kernel_value(KernelId k, const Eigen::Ref<const VectorXd>& u);
/// Half-width of the support of the kernel (all bundled kernels use 1).
inline constexpr double kernel_support_radius(KernelId) { return 1.0; }

KernelId kernel_from_string(const std::string& s);
std::string to_string(KernelId k);

/// Indicator of the half-open box s < x <= t (componentwise).
struct BoxInstrument {
  VectorXd lower;
  VectorXd upper;
};

/// x -> k((x - center) / bandwidth).
struct KernelInstrument {
  VectorXd center;
  double bandwidth = 1.0;
  KernelId kernel = KernelId::uniform;
};

using Instrument = std::variant<BoxInstrument, KernelInstrument>;

/// g(x) >= 0. Box instruments return exactly 0 or 1.
double eval_instrument(const Instrument& g, const Eigen::Ref<const VectorXd>& x_row);

Index instrument_dim(const Instrument& g);

/// Instrument classes over which the KS supremum is taken.
///
/// `all_data_intervals` and `all_data_boxes` are enumerated from the data:
/// every distinct subset of observations cut out by a half-open interval
/// (box) is visited once. For boxes, `corner_cap > 0` thins the candidate
/// corner coordinates on each axis to at most that many evenly spaced
/// order statistics; the supremum is then taken over that sub-family only.
struct InstrumentFamily {
  enum class Kind { all_data_intervals, all_data_boxes, kernel_dilations };

  Kind kind = Kind::all_data_intervals;
  Index corner_cap = 0;

  // kernel_dilations: every center paired with every bandwidth.
  std::vector<VectorXd> centers;
  std::vector<double> bandwidths;
  KernelId kernel = KernelId::uniform;

  static InstrumentFamily intervals() { return {}; }
  static InstrumentFamily boxes(Index corner_cap = 0) {
    InstrumentFamily f;
    f.kind = Kind::all_data_boxes;
    f.corner_cap = corner_cap;
    return f;
  }
  static InstrumentFamily kernel_dilations(std::vector<VectorXd> centers,
                                           std::vector<double> bandwidths,
                                           KernelId k = KernelId::uniform);

  /// Indicator families admit the prefix-sum scans.
  bool is_indicator() const { return kind != Kind::kernel_dilations; }
};

// ---------------------------------------------------------------------------
// S functions

/// Criterion applied to a vector of (studentized) moments.
///
/// neg_part_sup_norm: S(t) = max_j max(-t_j, 0) = ||t ^ 0||_inf.
/// neg_part_p_norm:   S(t) = (sum_j max(-t_j, 0)^p)^(1/p).
struct SFunction {
  enum class Kind { neg_part_sup_norm, neg_part_p_norm };
  Kind kind = Kind::neg_part_sup_norm;
  double p = 2.0;

  static SFunction sup_norm() { return {}; }
  static SFunction p_norm(double p) { return {Kind::neg_part_p_norm, p}; }

  /// Constants with S(t) >= c => some t_j <= -c K1 and S(t) <= c => all t_j >= -c K2.
  double k_s1(Index d_y) const;
  double k_s2() const { return 1.0; }
};

double s_value(const SFunction& s, const Eigen::Ref<const VectorXd>& t);

}  // namespace momentset
