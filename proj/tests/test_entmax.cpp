#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "scvae/entmax.hpp"
#include "scvae/gradcheck.hpp"
#include "scvae/rng.hpp"

using namespace scvae;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t d, double lo = -3, double hi = 3) {
  std::vector<double> s(d);
  for (double& v : s) v = rng.uniform(lo, hi);
  return s;
}

std::size_t support_size(const std::vector<double>& p) {
  return std::count_if(p.begin(), p.end(), [](double v) { return v > 0.0; });
}

}  // namespace

TEST_CASE("symmetric inputs give uniform outputs") {
  auto p = entmax15(std::vector<double>{0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  for (double c : {-7.0, 0.0, 3.25}) {
    auto q = entmax15(std::vector<double>{c, c, c, c});
    for (double v : q) CHECK(v == doctest::Approx(0.25));
  }
}

TEST_CASE("[4,0] saturates to one-hot (bisection confirms tau = 1)") {
  auto p = entmax15(std::vector<double>{4.0, 0.0});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == 0.0);
  auto oracle = test::entmax15_bisection(std::vector<double>{4.0, 0.0});
  CHECK(oracle[0] == doctest::Approx(1.0).epsilon(1e-10));
  // tau = 1: [4/2 - 1]^2 = 1 and [0/2 - 1]_+ = 0.
  ThresholdScan scan = threshold_scan(std::vector<double>{2.0, 0.0});
  CHECK(scan.threshold == doctest::Approx(1.0));
  CHECK(scan.support == 1);
}

TEST_CASE("matches the bisection oracle on random inputs, d <= 8") {
  Rng rng(2024);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t d = 1 + rng.next_u64() % 8;
    auto s = random_scores(rng, d);
    auto p = entmax15(s);
    auto q = test::entmax15_bisection(s);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::abs(p[i] - q[i]) < 1e-8);
      total += p[i];
      CHECK(p[i] >= 0.0);
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("shift invariance and permutation equivariance") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    auto s = random_scores(rng, d);
    auto p = entmax15(s);

    const double c = rng.uniform(-5.0, 5.0);
    auto shifted = s;
    for (double& v : shifted) v += c;
    auto ps = entmax15(shifted);
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(ps[i] - p[i]) < 1e-9);

    auto idx = argsort_desc(std::span<const double>(s));
    std::vector<double> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = s[idx[i]];
    auto pp = entmax15(perm);
    for (std::size_t i = 0; i < d; ++i) CHECK(pp[i] == p[idx[i]]);
  }
}

TEST_CASE("sparsity monotonicity: widening the top gap never grows the support") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    auto s = random_scores(rng, d);
    std::size_t top = argsort_desc(std::span<const double>(s))[0];
    auto p0 = entmax15(s);
    std::size_t prev = support_size(p0);
    for (int k = 0; k < 4; ++k) {
      s[top] += 0.5;
      auto p = entmax15(s);
      std::size_t cur = support_size(p);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("threshold scan satisfies its own definitions") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + rng.next_u64() % 8;
    auto z = random_scores(rng, d);
    ThresholdScan scan = threshold_scan(z);
    double sum = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      sum += scan.sorted[r];
      const double m = sum / double(r + 1);
      double ss = 0.0;
      for (std::size_t j = 0; j <= r; ++j)
        ss += (scan.sorted[j] - m) * (scan.sorted[j] - m);
      CHECK(std::abs(scan.top_mean[r] - m) < 1e-12);
      CHECK(std::abs(scan.unnorm_var[r] - ss) < 1e-10);
      if (ss > 1.0) CHECK(std::isinf(scan.tau[r]));
    }
  }
}

TEST_CASE("empty input is rejected") {
  CHECK_THROWS_AS(entmax15(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("vjp: zero upstream gives zero downstream") {
  auto s = std::vector<double>{1.0, 0.3, -2.0};
  auto p = entmax15(s);
  auto d = entmax15_vjp(s, p, std::vector<double>{0, 0, 0});
  for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("vjp: inactive coordinate of a one-hot output gets zero gradient") {
  auto s = std::vector<double>{4.0, 0.0};
  auto p = entmax15(s);
  REQUIRE(p[1] == 0.0);
  auto d = entmax15_vjp(s, p, std::vector<double>{1.0, 1.0});
  CHECK(d[1] == 0.0);
}

TEST_CASE("vjp matches finite differences away from support boundaries") {
  Rng rng(13);
  int checked = 0;
  while (checked < 300) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    auto s = random_scores(rng, d);
    const double step = 1e-6;

    // Skip measure-zero boundary points: support must be stable well beyond
    // the finite-difference step, or curvature near the kink dominates.
    auto sup = [&](std::vector<double> v, std::size_t i, double eps) {
      v[i] += eps;
      return support_size(entmax15(v));
    };
    auto p = entmax15(s);
    bool stable = true;
    for (std::size_t i = 0; i < d && stable; ++i)
      stable = sup(s, i, 1e-3) == support_size(p) && sup(s, i, -1e-3) == support_size(p);
    if (!stable) continue;

    std::vector<double> up(d);
    for (double& v : up) v = rng.uniform(-1.0, 1.0);
    auto analytic = entmax15_vjp(s, p, up);

    for (std::size_t i = 0; i < d; ++i) {
      auto sp = s, sm = s;
      sp[i] += step;
      sm[i] -= step;
      auto pp = entmax15(sp), pm = entmax15(sm);
      double central = 0.0;
      for (std::size_t k = 0; k < d; ++k) central += up[k] * (pp[k] - pm[k]) / (2 * step);
      const double diff = std::abs(analytic[i] - central);
      const double denom = std::abs(analytic[i]) + std::abs(central) + 1e-9;
      CHECK((diff / denom < 1e-4 || diff < 1e-7));
    }
    ++checked;
  }
}

TEST_CASE("entmax tensor op backward agrees with finite differences") {
  Rng rng(17);
  auto f = [](const Tensor& s) {
    Tensor p = entmax15_t(s);
    return sum(mul(p, Tensor::vector({0.7, -0.3, 1.1, 0.2})));
  };
  int done = 0;
  while (done < 20) {
    auto pt = random_scores(rng, 4, -1.0, 1.0);
    // keep full support to stay away from kinks
    auto p = entmax15(pt);
    if (support_size(p) != 4) continue;
    auto res = finite_diff_check(f, Tensor::vector(pt), 1e-6);
    CHECK(res.max_rel_error < 1e-4);
    ++done;
  }
}

TEST_CASE("pad_batch constructs the dummy layout") {
  auto b = pad_batch({{1.0, 0.0}, {2.0, -1.0, 0.5}});
  CHECK(b.rows == 2);
  CHECK(b.width == 3);
  CHECK(b.dummy == doctest::Approx(-3.0));  // global min -1, minus 2
  CHECK(b.data[2] == doctest::Approx(-3.0));
  CHECK(b.degree == std::vector<std::size_t>{2, 3});
}

TEST_CASE("padded rows reproduce the unpadded transform with exact zeros") {
  auto b = pad_batch({{1.0, 0.0}});
  auto rows = entmax15_rows(pad_batch({{1.0, 0.0}, {0.5, 0.5, 0.5}}));
  auto direct = entmax15(std::vector<double>{1.0, 0.0});
  CHECK(std::abs(rows[0][0] - direct[0]) < 1e-12);
  CHECK(std::abs(rows[0][1] - direct[1]) < 1e-12);
  CHECK(rows[0][2] == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(rows[1][i] == doctest::Approx(1.0 / 3));
}

TEST_CASE("segmented entmax equals the per-segment loop exactly") {
  Rng rng(23);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n_edges = 2 + rng.next_u64() % 12;
    const std::size_t n_seg = 1 + rng.next_u64() % std::min<std::size_t>(n_edges, 4);
    std::vector<std::vector<std::size_t>> segments(n_seg);
    for (std::size_t e = 0; e < n_edges; ++e)
      segments[e < n_seg ? e : rng.next_u64() % n_seg].push_back(e);
    auto scores = random_scores(rng, n_edges);

    auto got = segmented_entmax(scores, segments);
    for (const auto& seg : segments) {
      std::vector<double> s;
      for (auto e : seg) s.push_back(scores[e]);
      auto p = entmax15(s);
      for (std::size_t i = 0; i < seg.size(); ++i) CHECK(got[seg[i]] == p[i]);
    }
  }
}

TEST_CASE("segmented entmax: single edge gets weight one, empty segment rejected") {
  auto w = segmented_entmax(std::vector<double>{3.7}, {{0}});
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(segmented_entmax(std::vector<double>{1.0}, {{0}, {}}),
                  std::invalid_argument);
}

TEST_CASE("proposition 2, statement 1: 1000 randomized trials, zero violations") {
  auto rep = verify_prop2(1, 1000, 8, 424242);
  CHECK(rep.violations == 0);
  CHECK(rep.trials == 1000);
}

TEST_CASE("proposition 2, statement 2: 1000 randomized trials, zero violations") {
  auto rep = verify_prop2(2, 1000, 8, 31337);
  CHECK(rep.violations == 0);
}

TEST_CASE("equality boundary: appended score exactly 2*tau gets zero probability") {
  Rng rng(5150);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(3);
    for (double& v : s) v = rng.uniform(-0.3, 0.3);  // small spread, full support
    auto p = entmax15(s);
    REQUIRE(support_size(p) == 3);
    std::vector<double> z = {s[0] / 2, s[1] / 2, s[2] / 2};
    const double tau = threshold_scan(z).tau[2];
    auto s_aug = s;
    s_aug.push_back(2.0 * tau);
    auto pa = entmax15(s_aug);
    CHECK(pa[3] == 0.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(pa[i] - p[i]) < 1e-9);
  }
}

TEST_CASE("d = 1 with appended value s1 - 2 gives [1, 0]") {
  auto p = entmax15(std::vector<double>{0.7, -1.3});
  auto q = test::entmax15_bisection(std::vector<double>{0.7, -1.3});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == 0.0);
  CHECK(q[0] == doctest::Approx(1.0).epsilon(1e-10));
}
