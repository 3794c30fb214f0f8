#pragma once

// Evaluation: Huber errors, t-tests between error distributions, loss-curve
// normalization, intrinsic dimension and reconstruction similarity.

#include <compare>
#include <string>
#include <vector>

#include "dimsweep/autoencoder.hpp"
#include "dimsweep/core.hpp"

namespace dimsweep {

/// 0.5 r^2 for |r| <= delta, delta (|r| - delta/2) beyond, with r = y - y_hat.
double huber(double y, double y_hat, double delta = 1.0);
/// d huber / d r at residual r (the clipped residual).
double huber_derivative(double residual, double delta = 1.0);

struct ErrorDistribution {
  std::vector<double> errors;  // per test sample, in sample order
  std::string label;
  double delta = 1.0;

  [[nodiscard]] double mean() const;
};

ErrorDistribution error_distribution(const Vector& y, const Vector& y_hat, double delta = 1.0,
                                     std::string label = {});

enum class TTestVariant { Paired, Welch };

std::string_view to_string(TTestVariant v);
TTestVariant parse_ttest_variant(std::string_view text);

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;  // two-sided
  double dof = 0.0;
  std::string label_a;
  std::string label_b;
  TTestVariant variant = TTestVariant::Paired;
};

/// Two-sided t-test of mean(a) - mean(b). The paired variant requires equal
/// lengths (aligned samples). A zero-variance comparison yields t = 0, p = 1
/// when the means agree and throws otherwise.
TTestResult t_test(const ErrorDistribution& a, const ErrorDistribution& b,
                   TTestVariant variant = TTestVariant::Paired);

enum class SignificanceBand { NotSignificant, Below05, Below01 };

SignificanceBand significance_band(double p_value);
std::string_view to_string(SignificanceBand band);

/// A ladder position: a latent width, or the uncompressed input ("raw").
struct Dimension {
  int value = 0;  // latent width, or the input dimension when raw
  bool raw = false;

  [[nodiscard]] std::string label() const { return raw ? "raw" : std::to_string(value); }
  friend auto operator<=>(const Dimension&, const Dimension&) = default;
  friend bool operator==(const Dimension&, const Dimension&) = default;
};

struct CurvePoint {
  Dimension dim;
  double loss = 0.0;
};

struct LossCurve {
  std::vector<CurvePoint> points;
  std::vector<double> normalized;  // parallel to points once normalized
};

/// (L - L_min) / (L_max - L_min) over the curve's own points.
LossCurve normalize_curve(const LossCurve& curve);

enum class IntrinsicRule {
  NormalizedThreshold,  // normalized loss <= threshold
  RelativeToMinimum,    // loss <= (1 + threshold) * L_min
};

std::string_view to_string(IntrinsicRule rule);
IntrinsicRule parse_intrinsic_rule(std::string_view text);

/// Smallest dimension whose loss qualifies under `rule`.
Dimension intrinsic_dimension(const LossCurve& curve, double threshold = 0.10,
                              IntrinsicRule rule = IntrinsicRule::NormalizedThreshold);

double cosine_similarity(const Vector& a, const Vector& b);

struct SimilarityResult {
  double mean_cosine = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // zero-norm inputs or reconstructions
};

/// Mean cos(v_i, D(E(v_i))) over the rows of `rows`.
SimilarityResult reconstruction_similarity(const AutoencoderModel& model, const Matrix& rows);

}  // namespace dimsweep
