#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "hyperim/lattice.hpp"
#include "hyperim/stats.hpp"

using namespace hyperim;

namespace {

// Independent double loop over the bounding square.
std::vector<LatticePoint> brute_annulus(double lambda, double k) {
  const auto R = static_cast<std::int64_t>(std::ceil(std::sqrt(lambda + k)));
  std::vector<LatticePoint> out;
  for (std::int64_t a = -R; a <= R; ++a)
    for (std::int64_t b = -R; b <= R; ++b) {
      const auto n = static_cast<double>(a * a + b * b);
      if ((a != 0 || b != 0) && lambda - k <= n && n <= lambda + k) out.push_back({a, b});
    }
  return out;
}

}  // namespace

TEST(Representable, SmallValues) {
  EXPECT_TRUE(is_representable(0));
  EXPECT_TRUE(is_representable(2));
  EXPECT_FALSE(is_representable(3));
  EXPECT_TRUE(is_representable(25));
  EXPECT_FALSE(is_representable(21));
  EXPECT_THROW(is_representable(-1), DomainError);
}

TEST(Representable, SieveMatchesExhaustive) {
  const auto mark = representable_sieve(5000);
  for (std::int64_t n = 0; n <= 5000; ++n) ASSERT_EQ(mark[static_cast<std::size_t>(n)], is_representable(n)) << n;
}

TEST(Eigenvalues, Multiplicities) {
  EXPECT_EQ(eigenvalues_with_multiplicity(1), (std::vector<EigenvalueCount>{{1, 4}}));
  EXPECT_EQ(eigenvalues_with_multiplicity(2), (std::vector<EigenvalueCount>{{1, 4}, {2, 4}}));
  const auto e5 = eigenvalues_with_multiplicity(5);
  EXPECT_NE(std::find(e5.begin(), e5.end(), EigenvalueCount{5, 8}), e5.end());
  EXPECT_THROW(eigenvalues_with_multiplicity(0), InvalidRange);
}

TEST(Eigenvalues, GaussCircleConsistency) {
  for (std::int64_t L : {1, 10, 100, 1000}) {
    std::int64_t total = 0;
    for (const auto& e : eigenvalues_with_multiplicity(L)) total += e.multiplicity;
    std::int64_t direct = 0;
    const std::int64_t R = isqrt(L);
    for (std::int64_t a = -R; a <= R; ++a)
      for (std::int64_t b = -R; b <= R; ++b)
        if (a * a + b * b > 0 && a * a + b * b <= L) ++direct;
    EXPECT_EQ(total, direct) << L;
  }
  std::int64_t total100 = 0;
  for (const auto& e : eigenvalues_with_multiplicity(100)) total100 += e.multiplicity;
  EXPECT_EQ(total100, 316);
}

TEST(RecordGaps, FirstRecord) {
  const auto r = record_gaps(10);
  ASSERT_FALSE(r.empty());
  EXPECT_EQ(r.front(), (GapRecord{2, 4, 2}));
  EXPECT_THROW(record_gaps(1), InvalidRange);
}

TEST(RecordGaps, FrozenSequenceTo1e4) {
  // exhaustive per-integer enumeration
  const std::vector<GapRecord> expected{{2, 4, 2},         {5, 8, 3},       {20, 25, 5},     {74, 80, 6},
                                        {90, 97, 7},       {185, 193, 8},   {377, 386, 9},   {986, 997, 11},
                                        {1493, 1508, 15},  {5165, 5184, 19}};
  EXPECT_EQ(record_gaps(10000), expected);
}

TEST(RecordGaps, StrictlyIncreasingAndVerified) {
  const auto r = record_gaps(200000);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) {
      EXPECT_GT(r[i].gap, r[i - 1].gap);
    }
    EXPECT_EQ(r[i].gap, r[i].upper - r[i].lower);
    EXPECT_TRUE(is_representable(r[i].lower));
    EXPECT_TRUE(is_representable(r[i].upper));
    for (std::int64_t n = r[i].lower + 1; n < r[i].upper; ++n) EXPECT_FALSE(is_representable(n));
  }
}

TEST(Annulus, ExactCircle25) {
  const auto pts = annulus_points(25.0, 0.0);
  ASSERT_EQ(pts.size(), 12u);
  EXPECT_TRUE(std::is_sorted(pts.begin(), pts.end()));
  for (const auto& p : pts) EXPECT_EQ(p.norm2(), 25);
  EXPECT_TRUE(annulus_points(3.0, 0.5).empty());
  EXPECT_THROW(annulus_points(2.0, 2.0), InvalidRange);
  EXPECT_THROW(annulus_points(2.0, -1.0), InvalidRange);
}

TEST(Annulus, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lam(2.0, 9000.0), kk(0.0, 40.0);
  for (int t = 0; t < 60; ++t) {
    const double l = lam(rng);
    const double k = std::min(kk(rng), l - 1.0);
    EXPECT_EQ(annulus_points(l, k), brute_annulus(l, k)) << l << " " << k;
  }
}

TEST(Annulus, LargeRadiusCount) {
  const auto pts = annulus_points(1e6, 10.0);
  EXPECT_EQ(pts.size(), 100u);
  EXPECT_EQ(pts.front(), (LatticePoint{-1000, -3}));
}

TEST(MinDistance, Basics) {
  const auto pts = annulus_points(25.0, 0.0);
  EXPECT_NEAR(*min_pairwise_distance(pts), std::sqrt(2.0), 1e-15);
  const std::vector<LatticePoint> one{{1, 0}};
  EXPECT_FALSE(min_pairwise_distance(one).has_value());
  const std::vector<LatticePoint> two{{0, 1}, {0, -1}};
  EXPECT_DOUBLE_EQ(*min_pairwise_distance(two), 2.0);
}

TEST(SparseAnnulus, RejectsBadExponent) {
  EXPECT_THROW(find_sparse_annulus(1e4, 0.2), InvalidExponent);
  EXPECT_THROW(find_sparse_annulus(1e4, 0.0), InvalidExponent);
  EXPECT_THROW(strip_statistics(1e4, 1.0 / 6.0), InvalidExponent);
}

TEST(SparseAnnulus, Mu1e4Frozen) {
  const auto a = find_sparse_annulus(1e4, 0.15);
  ASSERT_TRUE(a.has_value());
  // brute-force bin scan oracle: bin 0 passes the half-open scan, but its
  // closed annulus picks up |x|^2 = 10^4 = mu, where (100,0), (100,1) are 1 apart
  EXPECT_EQ(a->m0, 1);
  EXPECT_EQ(a->points.size(), 16u);
  EXPECT_DOUBLE_EQ(*a->min_distance, 4.0);
  EXPECT_NEAR(a->lambda, 10005.971607558302, 1e-9);
  EXPECT_TRUE(certify_sparse_annulus(*a));
  EXPECT_EQ(a->points, brute_annulus(a->lambda, a->half_width + 1e-9));
  const auto d = min_pairwise_distance(a->points);
  EXPECT_GT(*d, a->certified_threshold());
}

TEST(SparseAnnulus, Mu1e5Threshold) {
  const auto a = find_sparse_annulus(1e5, 0.15);
  ASSERT_TRUE(a.has_value());
  EXPECT_NEAR(a->separation_threshold, std::pow(1e5, 0.075), 1e-12);
  EXPECT_NEAR(a->separation_threshold, 2.371, 1e-3);
  EXPECT_GE(a->lambda_threshold, a->separation_threshold);
  EXPECT_TRUE(certify_sparse_annulus(*a));
  EXPECT_EQ(a->m0, 0);
  EXPECT_EQ(a->points.size(), 24u);
  EXPECT_DOUBLE_EQ(*a->min_distance, 24.0);
}

TEST(SparseAnnulus, ReturnedValuesSatisfyInvariants) {
  for (double mu : {50.0, 300.0, 2000.0, 7777.0, 31000.0}) {
    for (double s : {0.05, 0.1, 0.16}) {
      const auto a = find_sparse_annulus(mu, s);
      if (!a) continue;
      EXPECT_TRUE(certify_sparse_annulus(*a));
      EXPECT_LE(a->m0, static_cast<std::int64_t>(std::floor(std::sqrt(mu))));
      for (const auto& p : a->points) {
        EXPECT_GE(static_cast<double>(p.norm2()), a->lambda - a->half_width);
        EXPECT_LE(static_cast<double>(p.norm2()), a->lambda + a->half_width);
      }
    }
  }
}

TEST(Strips, NoDirectionsBelowUnitRadius) {
  // mu^{s/2} < 1 only for mu < 1, below the search domain mu >= 2
  EXPECT_TRUE(strip_directions(0.5, 0.1).empty());
  EXPECT_EQ(strip_statistics(2.0, 0.1).strip_count, 4);
}

TEST(Strips, FrozenCounts) {
  // direct membership scan oracle
  const auto a = strip_statistics(1e4, 0.15);
  EXPECT_EQ(a.strip_count, 8);
  EXPECT_EQ(a.lattice_hits, 92);
  EXPECT_EQ(a.annulus_points, 1252);
  const auto b = strip_statistics(1e5, 0.15);
  EXPECT_EQ(b.strip_count, 20);
  EXPECT_EQ(b.lattice_hits, 316);
}

TEST(Strips, ClosePairsInsideOneBinAreDetected) {
  // Adversarial: for each bin, every pair at distance <= mu^{s/2} must lie in the strip union.
  const double mu = 4000.0, s = 0.15;
  const auto fam = AnnulusFamily::make(mu, s);
  const auto dirs = strip_directions(mu, s);
  const double thr = std::pow(mu, s / 2.0);
  int close_pairs = 0;
  for (std::int64_t m = 0; m <= fam.J; ++m) {
    const auto pts = shell_points(fam.bin(m));
    for (std::size_t x = 0; x < pts.size(); ++x)
      for (std::size_t y = x + 1; y < pts.size(); ++y)
        if (norm(pts[x] - pts[y]) <= thr) {
          ++close_pairs;
          EXPECT_TRUE(in_strip_union(pts[x], dirs, fam.kappa));
          EXPECT_TRUE(in_strip_union(pts[y], dirs, fam.kappa));
        }
  }
  EXPECT_GT(close_pairs, 0);
}

TEST(Strips, CountDirectionsExhaustively) {
  for (double mu : {1e3, 1e4, 1e5, 1e6}) {
    const double r = std::pow(mu, 0.075);
    std::int64_t n = 0;
    for (int a = -5; a <= 5; ++a)
      for (int b = -5; b <= 5; ++b)
        if ((a || b) && std::sqrt(double(a * a + b * b)) <= r) ++n;
    EXPECT_EQ(strip_statistics(mu, 0.15).strip_count, n) << mu;
  }
}

TEST(Stats, LogLogSlope) {
  const std::vector<double> x{1, 10, 100}, y{2, 20, 200};
  EXPECT_NEAR(loglog_slope(x, y), 1.0, 1e-14);
}

TEST(NearInteger, FlagsBounds) {
  const std::vector<double> b{3.0000000000001, 2.5, 7.0};
  EXPECT_EQ(near_integer_bounds(b).size(), 2u);
}
