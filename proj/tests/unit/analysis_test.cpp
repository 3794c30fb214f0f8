#include <cmath>
#include <limits>

#include "doctest.h"
#include "dimsweep/analysis.hpp"
#include "support/instances.hpp"

using namespace dimsweep;

namespace {

ErrorDistribution dist(std::vector<double> v, std::string label = {}) { return {std::move(v), std::move(label), 1.0}; }

LossCurve curve(std::initializer_list<std::pair<int, double>> pts) {
  LossCurve c;
  for (const auto& [d, l] : pts) c.points.push_back({Dimension{d, false}, l});
  return c;
}

LossCurve normalized_curve(std::initializer_list<std::pair<int, double>> pts) {
  LossCurve c = curve(pts);
  for (const auto& p : c.points) c.normalized.push_back(p.loss);
  return c;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("huber unit values") {
    CHECK(huber(0.0, 0.0) == 0.0);
    CHECK(huber(0.5, 0.0) == 0.125);
    CHECK(huber(2.0, 0.0) == 1.5);
    CHECK(huber(0.0, 2.0) == 1.5);
    CHECK(huber(3.0, 1.0, 0.5) == 0.875);
  }

  TEST_CASE("huber is C1 at the threshold") {
    for (double delta : {1.0, 0.3, 2.5}) {
      const double eps = 1e-13;
      CHECK(std::abs(huber(delta + eps, 0.0, delta) - huber(delta - eps, 0.0, delta)) <= 1e-9);
      CHECK(std::abs(huber(delta, 0.0, delta) - 0.5 * delta * delta) <= 1e-12);
      CHECK(std::abs(huber_derivative(delta + eps, delta) - huber_derivative(delta - eps, delta)) <= 1e-9);
      const double h = 1e-7;
      const double left = (huber(delta, 0.0, delta) - huber(delta - h, 0.0, delta)) / h;
      const double right = (huber(delta + h, 0.0, delta) - huber(delta, 0.0, delta)) / h;
      CHECK(std::abs(left - delta) < 1e-6);
      CHECK(std::abs(right - delta) < 1e-6);
    }
    CHECK(huber_derivative(-5.0) == -1.0);
    CHECK(huber_derivative(0.25) == 0.25);
  }

  TEST_CASE("huber is symmetric in the residual") {
    for (double r : {0.1, 0.9, 1.0, 1.7, 40.0}) CHECK(huber(r, 0.0) == huber(0.0, r));
  }

  TEST_CASE("error distributions") {
    Vector y(3);
    y << 0.5, -1.0, 2.0;
    CHECK(error_distribution(y, y).errors == std::vector<double>{0, 0, 0});
    Vector a(1), b(1);
    a << 0.0;
    b << 2.0;
    const auto single = error_distribution(a, b, 1.0, "dz=8");
    CHECK(single.errors == std::vector<double>{1.5});
    CHECK(single.label == "dz=8");
    Vector pred(3);
    pred << 0.0, 0.0, 0.0;
    const auto e = error_distribution(y, pred);
    CHECK(e.mean() == doctest::Approx((0.125 + 0.5 + 1.5) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(error_distribution(y, a), Error);
  }

  TEST_CASE("identical aligned distributions give p = 1") {
    const auto a = dist({0.1, 0.4, 0.2, 0.9});
    const auto r = t_test(a, a);
    CHECK(r.t_statistic == 0.0);
    CHECK(r.p_value == 1.0);
    const auto w = t_test(a, a, TTestVariant::Welch);
    CHECK(w.p_value == 1.0);
  }

  TEST_CASE("constant nonzero differences are an error") {
    CHECK_THROWS_AS(t_test(dist({1, 1, 1, 1}), dist({0, 0, 0, 0})), Error);
    CHECK_THROWS_AS(t_test(dist({1, 2, 3, 4, 5}), dist({2, 3, 4, 5, 6})), Error);
    CHECK_THROWS_AS(t_test(dist({1, 1, 1}), dist({2, 2, 2}), TTestVariant::Welch), Error);
  }

  TEST_CASE("paired t-test matches reference values") {
    const auto r = t_test(dist({1, 2, 3, 4, 5}, "a"), dist({2, 3, 4, 5, 7}, "b"));
    CHECK(r.t_statistic == doctest::Approx(-6.0).epsilon(1e-9));
    CHECK(std::abs(r.p_value - 0.003882537046960512) < 1e-6);
    CHECK(r.dof == 4.0);
    CHECK(r.label_a == "a");
    CHECK(r.variant == TTestVariant::Paired);

    const auto s = t_test(dist({0.3, 1.2, 0.8, 2.5, 0.1, 0.9, 1.7}), dist({0.5, 1.0, 1.1, 2.0, 0.4, 1.5, 1.6}));
    CHECK(std::abs(s.t_statistic - -0.6102571532587296) < 1e-6);
    CHECK(std::abs(s.p_value - 0.5640750391277167) < 1e-6);
  }

  TEST_CASE("welch t-test matches reference values") {
    const auto r = t_test(dist({0.1, 0.5, 0.3, 0.9, 0.2, 0.4}), dist({0.6, 0.7, 0.2, 1.1, 0.8}), TTestVariant::Welch);
    CHECK(std::abs(r.t_statistic - -1.5023973165368218) < 1e-6);
    CHECK(std::abs(r.p_value - 0.17120987005381996) < 1e-6);
    CHECK(std::abs(r.dof - 8.04025444124377) < 1e-6);
  }

  TEST_CASE("t-test invariances") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> a(30), b(30);
      for (auto& v : a) v = std::abs(normal(rng));
      for (auto& v : b) v = std::abs(normal(rng)) + 0.1;
      for (auto variant : {TTestVariant::Paired, TTestVariant::Welch}) {
        const auto ab = t_test(dist(a), dist(b), variant);
        const auto ba = t_test(dist(b), dist(a), variant);
        CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
        CHECK(ab.t_statistic == doctest::Approx(-ba.t_statistic).epsilon(1e-12));
        CHECK(ab.p_value >= 0.0);
        CHECK(ab.p_value <= 1.0);
      }
      auto a2 = a;
      auto b2 = b;
      for (auto& v : a2) v += 3.0;
      for (auto& v : b2) v += 3.0;
      CHECK(t_test(dist(a2), dist(b2)).t_statistic == doctest::Approx(t_test(dist(a), dist(b)).t_statistic).epsilon(1e-9));
    }
  }

  TEST_CASE("t-test preconditions") {
    CHECK_THROWS_AS(t_test(dist({1.0}), dist({2.0})), Error);
    CHECK_THROWS_AS(t_test(dist({1, 2, 3}), dist({1, 2})), Error);
    CHECK_NOTHROW(t_test(dist({1, 2, 3}), dist({1, 2.5}), TTestVariant::Welch));
    CHECK(parse_ttest_variant("welch") == TTestVariant::Welch);
    CHECK(parse_ttest_variant(to_string(TTestVariant::Paired)) == TTestVariant::Paired);
    CHECK_THROWS_AS(parse_ttest_variant("student"), Error);
  }

  TEST_CASE("significance bands") {
    CHECK(significance_band(0.2) == SignificanceBand::NotSignificant);
    CHECK(significance_band(0.05) == SignificanceBand::NotSignificant);
    CHECK(significance_band(0.049) == SignificanceBand::Below05);
    CHECK(significance_band(0.01) == SignificanceBand::Below05);
    CHECK(significance_band(0.0099) == SignificanceBand::Below01);
    CHECK(to_string(SignificanceBand::Below01) == "p<.01");
  }

  TEST_CASE("normalize_curve") {
    const auto two = normalize_curve(curve({{1, 2.0}, {2, 4.0}}));
    CHECK(two.normalized == std::vector<double>{0.0, 1.0});
    const auto three = normalize_curve(curve({{1, 1.0}, {2, 2.0}, {4, 3.0}}));
    CHECK(three.normalized == std::vector<double>{0.0, 0.5, 1.0});
    CHECK_THROWS_AS(normalize_curve(curve({{1, 5.0}, {2, 5.0}})), Error);
    CHECK_THROWS_AS(normalize_curve(curve({{1, 5.0}})), Error);

    const auto base = normalize_curve(curve({{1, 0.9}, {2, 0.4}, {4, 0.45}, {8, 0.7}}));
    auto scaled = curve({{1, 0.9}, {2, 0.4}, {4, 0.45}, {8, 0.7}});
    for (auto& p : scaled.points) p.loss = 7.5 * p.loss - 2.0;
    const auto again = normalize_curve(scaled);
    for (std::size_t i = 0; i < base.normalized.size(); ++i) {
      CHECK(again.normalized[i] == doctest::Approx(base.normalized[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("intrinsic dimension") {
    auto c = curve({{1, 1.0}, {2, 0.5}, {4, 0.08}, {8, 0.0}});
    CHECK(intrinsic_dimension(normalize_curve(c)) == Dimension{4, false});
    CHECK(intrinsic_dimension(normalized_curve({{1, 1.0}, {2, 0.5}, {4, 0.08}, {8, 0.0}})) == Dimension{4, false});

    const auto monotone = normalize_curve(curve({{1, 4.0}, {2, 3.0}, {4, 2.0}, {8, 1.0}}));
    CHECK(intrinsic_dimension(monotone) == Dimension{8, false});

    const auto losses = curve({{1, 2.0}, {2, 1.3}, {4, 1.08}, {8, 1.0}, {16, 1.01}});
    CHECK(intrinsic_dimension(losses, 0.10, IntrinsicRule::RelativeToMinimum) == Dimension{4, false});
    CHECK(intrinsic_dimension(losses, 0.05, IntrinsicRule::RelativeToMinimum) == Dimension{8, false});

    const auto wiggly = normalize_curve(curve({{1, 3.0}, {2, 1.2}, {4, 1.5}, {8, 1.05}, {16, 1.0}, {32, 1.4}}));
    Dimension previous{1 << 20, false};
    for (double thr : {0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) {
      const Dimension d = intrinsic_dimension(wiggly, thr);
      CHECK(d <= previous);
      previous = d;
    }
    CHECK(parse_intrinsic_rule(to_string(IntrinsicRule::RelativeToMinimum)) == IntrinsicRule::RelativeToMinimum);
  }

  TEST_CASE("cosine similarity") {
    Vector a(2), b(2);
    a << 1.0, 2.0;
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(a, -a) == doctest::Approx(-1.0).epsilon(1e-15));
    b << -2.0, 1.0;
    CHECK(cosine_similarity(a, b) == 0.0);
  }

  TEST_CASE("reconstruction similarity") {
    auto id = AutoencoderModel::initialize(3, 3, 0, RngSeed{1});
    for (auto* net : {&id.encoder, &id.decoder}) {
      net->layers()[0].weight = Matrix::Identity(3, 3);
      net->layers()[0].bias.setZero();
    }
    Matrix rows(3, 3);
    rows << 1, 2, 3, -1, 0, 4, 0.5, 0.5, -2;
    const auto perfect = reconstruction_similarity(id, rows);
    CHECK(perfect.mean_cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perfect.used == 3);

    auto flip = id;
    flip.decoder.layers()[0].weight = -Matrix::Identity(3, 3);
    CHECK(reconstruction_similarity(flip, rows).mean_cosine == doctest::Approx(-1.0).epsilon(1e-12));

    auto rotate = id;
    rotate.decoder.layers()[0].weight << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    Matrix planar(1, 3);
    planar << 1, 0, 0;
    CHECK(reconstruction_similarity(rotate, planar).mean_cosine == 0.0);

    Matrix with_zero(2, 3);
    with_zero << 0, 0, 0, 1, 1, 1;
    const auto excluded = reconstruction_similarity(id, with_zero);
    CHECK(excluded.used == 1);
    CHECK(excluded.excluded == 1);
    CHECK_THROWS_AS(reconstruction_similarity(id, Matrix::Zero(2, 3)), Error);
  }
}
