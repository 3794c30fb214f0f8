#include "dimsweep/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace dimsweep {

double huber(double y, double y_hat, double delta) {
  const double r = std::abs(y - y_hat);
  return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

double huber_derivative(double residual, double delta) {
  if (std::abs(residual) <= delta) return residual;
  return residual > 0.0 ? delta : -delta;
}

double ErrorDistribution::mean() const {
  if (errors.empty()) throw Error("mean of an empty error distribution");
  double total = 0.0;
  for (double e : errors) total += e;
  return total / static_cast<double>(errors.size());
}

ErrorDistribution error_distribution(const Vector& y, const Vector& y_hat, double delta, std::string label) {
  if (y.size() != y_hat.size()) {
    throw Error("error_distribution: " + std::to_string(y.size()) + " targets vs " + std::to_string(y_hat.size()) +
                " predictions");
  }
  if (!(delta > 0.0)) throw Error("Huber delta must be positive");
  ErrorDistribution out;
  out.label = std::move(label);
  out.delta = delta;
  out.errors.reserve(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) out.errors.push_back(huber(y[i], y_hat[i], delta));
  return out;
}

std::string_view to_string(TTestVariant v) { return v == TTestVariant::Paired ? "paired" : "welch"; }

TTestVariant parse_ttest_variant(std::string_view text) {
  if (text == "paired") return TTestVariant::Paired;
  if (text == "welch") return TTestVariant::Welch;
  throw Error("unknown t-test variant '" + std::string(text) + "' (expected paired or welch)");
}

namespace {

struct Moments {
  double mean;
  double var;  // sample variance (n - 1)
};

Moments moments(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / (n - 1.0)};
}

double two_sided_p(double t, double dof) {
  boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

}  // namespace

TTestResult t_test(const ErrorDistribution& a, const ErrorDistribution& b, TTestVariant variant) {
  if (a.errors.size() < 2 || b.errors.size() < 2) throw Error("t-test needs at least two samples per distribution");
  TTestResult out;
  out.label_a = a.label;
  out.label_b = b.label;
  out.variant = variant;

  if (variant == TTestVariant::Paired) {
    if (a.errors.size() != b.errors.size()) {
      throw Error("paired t-test needs aligned distributions of equal length (" + std::to_string(a.errors.size()) +
                  " vs " + std::to_string(b.errors.size()) + ")");
    }
    std::vector<double> diff(a.errors.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.errors[i] - b.errors[i];
    const auto m = moments(diff);
    const double n = static_cast<double>(diff.size());
    out.dof = n - 1.0;
    if (m.var == 0.0) {
      if (m.mean != 0.0) {
        throw Error("paired t-test '" + a.label + "' vs '" + b.label +
                    "': differences have zero variance but nonzero mean");
      }
      out.t_statistic = 0.0;
      out.p_value = 1.0;
      return out;
    }
    out.t_statistic = m.mean / std::sqrt(m.var / n);
    out.p_value = two_sided_p(out.t_statistic, out.dof);
    return out;
  }

  const auto ma = moments(a.errors);
  const auto mb = moments(b.errors);
  const double na = static_cast<double>(a.errors.size());
  const double nb = static_cast<double>(b.errors.size());
  const double sa = ma.var / na;
  const double sb = mb.var / nb;
  if (sa + sb == 0.0) {
    if (ma.mean != mb.mean) {
      throw Error("Welch t-test '" + a.label + "' vs '" + b.label + "': both samples constant with different means");
    }
    out.dof = na + nb - 2.0;
    out.t_statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.t_statistic = (ma.mean - mb.mean) / std::sqrt(sa + sb);
  out.dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  out.p_value = two_sided_p(out.t_statistic, out.dof);
  return out;
}

SignificanceBand significance_band(double p_value) {
  if (p_value < 0.01) return SignificanceBand::Below01;
  if (p_value < 0.05) return SignificanceBand::Below05;
  return SignificanceBand::NotSignificant;
}

std::string_view to_string(SignificanceBand band) {
  switch (band) {
    case SignificanceBand::NotSignificant: return "p>.05";
    case SignificanceBand::Below05: return "p<.05";
    case SignificanceBand::Below01: return "p<.01";
  }
  return "?";
}

LossCurve normalize_curve(const LossCurve& curve) {
  if (curve.points.size() < 2) throw Error("normalize_curve: need at least two points");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : curve.points) {
    lo = std::min(lo, p.loss);
    hi = std::max(hi, p.loss);
  }
  if (!(hi > lo)) throw Error("normalize_curve: constant curve has no max-min normalization");
  LossCurve out = curve;
  out.normalized.clear();
  for (const auto& p : curve.points) out.normalized.push_back((p.loss - lo) / (hi - lo));
  return out;
}

std::string_view to_string(IntrinsicRule rule) {
  return rule == IntrinsicRule::NormalizedThreshold ? "normalized" : "relative";
}

IntrinsicRule parse_intrinsic_rule(std::string_view text) {
  if (text == "normalized") return IntrinsicRule::NormalizedThreshold;
  if (text == "relative") return IntrinsicRule::RelativeToMinimum;
  throw Error("unknown intrinsic-dimension rule '" + std::string(text) + "' (expected normalized or relative)");
}

Dimension intrinsic_dimension(const LossCurve& curve, double threshold, IntrinsicRule rule) {
  if (curve.points.empty()) throw Error("intrinsic_dimension: empty curve");
  std::vector<double> score;
  if (rule == IntrinsicRule::NormalizedThreshold) {
    score = normalize_curve(curve).normalized;
  } else {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& p : curve.points) lo = std::min(lo, p.loss);
    for (const auto& p : curve.points) score.push_back(p.loss <= (1.0 + threshold) * lo ? 0.0 : 1.0);
    threshold = 0.0;
  }
  std::optional<Dimension> best;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (score[i] <= threshold && (!best || curve.points[i].dim < *best)) best = curve.points[i].dim;
  }
  // The minimum point always qualifies, so best is set.
  return *best;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error("cosine similarity of a zero-norm vector");
  return a.dot(b) / (na * nb);
}

SimilarityResult reconstruction_similarity(const AutoencoderModel& model, const Matrix& rows) {
  if (rows.rows() == 0) throw Error("reconstruction_similarity: empty dataset");
  const Matrix recon = ae_decode_batch(model, ae_encode_batch(model, rows));
  SimilarityResult out;
  double total = 0.0;
  for (Index i = 0; i < rows.rows(); ++i) {
    const double na = rows.row(i).norm();
    const double nb = recon.row(i).norm();
    if (na == 0.0 || nb == 0.0) {
      ++out.excluded;
      continue;
    }
    total += rows.row(i).dot(recon.row(i)) / (na * nb);
    ++out.used;
  }
  if (out.used == 0) throw Error("reconstruction_similarity: every row has zero norm");
  out.mean_cosine = total / static_cast<double>(out.used);
  return out;
}

}  // namespace dimsweep
