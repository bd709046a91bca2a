#include <gtest/gtest.h>

#include "schottky_spectral/congruence.hpp"

namespace ss = schottky_spectral;
using ss::Mat2;

namespace {

const std::string kData = SS_DATA_DIR;
constexpr double kDeltaEx = 0.3274459217324397;

const ss::SchottkyData& gamma_ex() {
  static const ss::SchottkyData d = ss::load_schottky(kData + "/gamma_ex.json");
  return d;
}

}  // namespace

TEST(SL2Order, FormulaMatchesBruteForce) {
  // Brute-force orders from a Python enumeration.
  const long long expect[] = {6, 24, 48, 120, 144, 336, 384};
  for (long long n = 2; n <= 8; ++n) {
    EXPECT_EQ(ss::sl2_order(n), expect[n - 2]) << n;
    if (n <= 6) EXPECT_EQ(ss::sl2_order_brute_force(n), expect[n - 2]) << n;
  }
  EXPECT_EQ(ss::sl2_order(1), 1);
  EXPECT_EQ(ss::sl2_order(9), 648);  // p^{3a-2}(p^2-1) with p=3, a=2
}

TEST(Context, IndexByClosure) {
  const auto c1 = ss::build_context(gamma_ex(), 1);
  EXPECT_EQ(c1.index, 1u);
  EXPECT_TRUE(c1.surjective);
  // Image sizes from an independent Python BFS.
  const std::pair<long long, std::size_t> expect[] = {{2, 6}, {3, 4}, {4, 48}, {5, 120}, {6, 12}};
  for (const auto& [n, idx] : expect) {
    const auto c = ss::build_context(gamma_ex(), n);
    EXPECT_EQ(c.index, idx) << n;
    EXPECT_EQ(c.surjective, static_cast<long long>(idx) == ss::sl2_order(n)) << n;
    EXPECT_TRUE(ss::image_group_closed(c));
  }
}

TEST(Context, NonIntegralData) {
  const auto thick = ss::load_schottky(kData + "/thick.json");
  EXPECT_EQ(ss::build_context(thick, 1).index, 1u);
  try {
    ss::build_context(thick, 2);
    FAIL();
  } catch (const ss::Error& e) {
    EXPECT_EQ(e.code(), ss::Errc::non_integral);
  }
  EXPECT_THROW(ss::build_context(gamma_ex(), 0), ss::Error);
  try {
    ss::build_context(gamma_ex(), 101, 1000);
    FAIL();
  } catch (const ss::Error& e) {
    EXPECT_EQ(e.code(), ss::Errc::enumeration_cap);
  }
}

TEST(Context, MembershipAndTrace) {
  const auto c = ss::build_context(gamma_ex(), 2);
  const Mat2 g1 = gamma_ex().gen(1);
  const Mat2 g1sq = g1 * g1;
  EXPECT_TRUE(g1sq == Mat2::integer(17, 48, 6, 17));
  EXPECT_TRUE(ss::in_gamma_n(c, g1sq));
  EXPECT_FALSE(ss::in_gamma_n(c, g1));
  EXPECT_TRUE(ss::in_gamma_n(c, Mat2::identity()));
  EXPECT_EQ(ss::trace_sigma(c, g1sq), 6);
  EXPECT_EQ(ss::trace_sigma(c, g1), 0);
  EXPECT_EQ(ss::trace_sigma(c, Mat2::identity()), 6);
  const auto c5 = ss::build_context(gamma_ex(), 5);
  EXPECT_TRUE(ss::in_gamma_n(c5, Mat2::identity()));
}

TEST(ContextProperty, ActionMatchesReduction) {
  const auto c = ss::build_context(gamma_ex(), 4);
  for (int m = 1; m <= 5; ++m)
    for (const ss::Word& w : ss::enumerate_words(2, m)) {
      const ss::ModMat r = ss::reduce_mod(ss::gamma_of_word(gamma_ex(), w), 4);
      EXPECT_EQ(c.image_group[c.image_index(w)].e, r.e) << ss::word_str(w);
    }
}

TEST(ContextProperty, ActionIsAPermutation) {
  for (long long n : {2, 3, 4}) {
    const auto c = ss::build_context(gamma_ex(), n);
    for (const auto& row : c.right_mul) {
      std::vector<int> seen(c.index, 0);
      for (int y : row) ++seen.at(y);
      for (int s : seen) EXPECT_EQ(s, 1);
    }
  }
}

TEST(Counting, DivisorsAndThreshold) {
  EXPECT_EQ(ss::divisor_count(6), 8);
  EXPECT_EQ(ss::divisor_count(-6), 8);
  EXPECT_EQ(ss::divisor_count(1), 2);
  EXPECT_EQ(ss::divisor_count(12), 12);
  EXPECT_THROW(ss::divisor_count(0), ss::Error);
  EXPECT_EQ(ss::omega(12), 2);
  EXPECT_EQ(ss::omega(1), 0);
  EXPECT_TRUE((ss::new_eig_threshold(2) == ss::Fraction{2, 3}));
  EXPECT_TRUE((ss::new_eig_threshold(6) == ss::Fraction{2, 3}));
  EXPECT_TRUE((ss::new_eig_threshold(1) == ss::Fraction{1, 1}));
  EXPECT_TRUE((ss::new_eig_threshold(9) == ss::Fraction{3, 1}));
}

TEST(Counting, ExhaustiveGolden) {
  // Counts from an independent Python enumeration over all four entries.
  EXPECT_EQ(ss::count_Nn(1, 1.5).count, 2);
  EXPECT_EQ(ss::count_Nn(2, 2).count, 0);
  EXPECT_EQ(ss::count_Nn(1, 3).count, 34);
  const std::tuple<long long, double, long long> expect[] = {{1, 5, 98},  {1, 10, 506}, {2, 5, 8}, {2, 10, 48},
                                                             {3, 5, 0},   {3, 10, 12},  {5, 5, 0}, {5, 10, 0}};
  for (const auto& [n, R, cnt] : expect) EXPECT_EQ(ss::count_Nn(n, R).count, cnt) << n << " " << R;
  EXPECT_THROW(ss::count_Nn(1, 500), ss::Error);
}

TEST(CountingProperty, WitnessesAreCongruent) {
  for (long long n : {1, 2, 3}) {
    const auto r = ss::count_Nn(n, 12);
    EXPECT_EQ(static_cast<long long>(r.witnesses.size()), r.count);
    for (const auto& w : r.witnesses) {
      EXPECT_EQ(w[0] * w[3] - w[1] * w[2], 1);
      EXPECT_NE(w[1] * w[2], 0);
      EXPECT_EQ(((w[0] - 1) % n + n) % n, 0);
      EXPECT_EQ(((w[3] - 1) % n + n) % n, 0);
      EXPECT_EQ(w[1] % n, 0);
      EXPECT_EQ(w[2] % n, 0);
      EXPECT_LE(w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3], 144);
    }
  }
}

TEST(CountingProperty, ShapeConstantBounded) {
  double D = 0;
  for (long long n : {1, 2, 3, 5})
    for (double R : {5.0, 10.0, 20.0, 40.0}) {
      const double nn = static_cast<double>(n);
      const double rhs = std::pow(R / nn, 0.1) * (R * R / (nn * nn * nn) + R / nn + 1);
      D = std::max(D, static_cast<double>(ss::count_Nn(n, R, 200, false).count) / rhs);
    }
  EXPECT_LE(D, 100.0);
}

TEST(PairAudit, Decomposition) {
  const auto r = ss::decompose_pair({1, 2, 2, 1}, {1, 4, 4, 1});
  EXPECT_EQ(r.len_A, 1u);
  EXPECT_EQ(r.len_C, 1u);
  EXPECT_EQ(r.len_B1, 2u);
  EXPECT_EQ(r.len_B2, 2u);
  const auto s = ss::decompose_pair({1, 2}, {1, 2, 1});
  EXPECT_EQ(s.len_A, 1u);
  EXPECT_EQ(s.len_B1 + s.len_C, 1u);
  EXPECT_EQ(s.len_B2 + s.len_C, 2u);
}

TEST(PairAudit, Buckets) {
  EXPECT_EQ(ss::length_bucket(1.0, 1.0), 0);
  EXPECT_EQ(ss::length_bucket(0.5, 1.0), 0);
  EXPECT_EQ(ss::length_bucket(0.3, 1.0), 1);
  EXPECT_EQ(ss::length_bucket(0.2, 1.0), 2);
}

TEST(PairAudit, LargeModulusLeavesDiagonal) {
  const double tau = 0.05;
  const auto c = ss::build_context(gamma_ex(), 101);
  const auto a = ss::audit_ptau(gamma_ex(), c, tau, kDeltaEx);
  EXPECT_EQ(a.offdiagonal, 0u);
  EXPECT_EQ(a.pairs, a.block_size);
}

TEST(PairAudit, GridFrozen) {
  // (n, tau) -> (#P, off-diagonal) from an independent sympy enumeration.
  const std::tuple<long long, double, std::size_t, std::size_t> expect[] = {
      {1, 0.1, 28, 8}, {1, 0.02, 104, 64}, {2, 0.02, 48, 8}, {2, 0.1, 20, 0}, {3, 0.01, 60, 16}};
  for (const auto& [n, tau, P, off] : expect) {
    const auto c = ss::build_context(gamma_ex(), n);
    const auto a = ss::audit_ptau(gamma_ex(), c, tau, kDeltaEx);
    EXPECT_EQ(a.pairs, P) << n << " " << tau;
    EXPECT_EQ(a.offdiagonal, off) << n << " " << tau;
    EXPECT_EQ(a.diagonal, a.block_size);
  }
}

TEST(PairAuditProperty, PairsAreCongruentAndBucketsBounded) {
  for (long long n : {2, 3}) {
    const auto c = ss::build_context(gamma_ex(), n);
    for (double tau : ss::default_tau_grid(gamma_ex())) {
      const auto a = ss::audit_ptau(gamma_ex(), c, tau, kDeltaEx);
      std::size_t bucket_total = 0;
      for (const auto& [ac, cnt] : a.buckets) {
        bucket_total += cnt;
        EXPECT_LE(std::ldexp(1.0, ac.first + ac.second) * static_cast<double>(n) * tau, a.H_empirical + 1e-15);
      }
      EXPECT_EQ(bucket_total, a.offdiagonal);
      for (const auto& r : a.records) {
        const Mat2 g1 = ss::gamma_of_word(gamma_ex(), r.w1), g2 = ss::gamma_of_word(gamma_ex(), r.w2);
        EXPECT_TRUE(ss::in_gamma_n(c, g1 * g2.inverse()));
        EXPECT_EQ(r.w1.front(), r.w2.front());
        EXPECT_EQ(r.w1.back(), r.w2.back());
        EXPECT_EQ(r.len_A + r.len_B1 + r.len_C, r.w1.size());
        EXPECT_EQ(r.len_A + r.len_B2 + r.len_C, r.w2.size());
      }
    }
  }
  EXPECT_THROW(ss::audit_ptau(gamma_ex(), ss::build_context(gamma_ex(), 2), 1.5, kDeltaEx), ss::Error);
}
