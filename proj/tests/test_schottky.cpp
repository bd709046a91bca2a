#include <gtest/gtest.h>

#include <random>
#include <set>

#include "schottky_spectral/schottky.hpp"

namespace ss = schottky_spectral;
using ss::Mat2;
using ss::Rational;
using ss::Word;

namespace {

const std::string kData = SS_DATA_DIR;
// Growth exponent of the example group from an independent numpy prototype.
constexpr double kDeltaEx = 0.3274459217324397;

const ss::SchottkyData& gamma_ex() {
  static const ss::SchottkyData d = ss::load_schottky(kData + "/gamma_ex.json");
  return d;
}

Word random_reduced(std::mt19937& rng, int N, std::size_t len) {
  std::uniform_int_distribution<int> let(1, 2 * N);
  Word w;
  while (w.size() < len) {
    const int a = let(rng);
    if (!w.empty() && a == ss::mirror_letter(N, w.back())) continue;
    w.push_back(a);
  }
  return w;
}

ss::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ss::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ss::Errc::io;
}

}  // namespace

TEST(SchottkyData, ExampleValidates) {
  const ss::ValidationReport r = ss::validate(gamma_ex());
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_residual, 1e-12);
  EXPECT_DOUBLE_EQ(r.min_gap, 1.0);
  EXPECT_TRUE(gamma_ex().integral);
  EXPECT_EQ(gamma_ex().N, 2);
}

TEST(SchottkyData, FixturesFail) {
  const auto ov = ss::read_schottky_file(kData + "/fixtures/overlapping_disks.json");
  EXPECT_FALSE(ss::validate(ov).pass);
  const auto bi = ss::read_schottky_file(kData + "/fixtures/broken_inverse.json");
  const auto rb = ss::validate(bi);
  EXPECT_FALSE(rb.pass);
  EXPECT_FALSE(rb.inverse_pairing);
  EXPECT_EQ(code_of([] { ss::read_schottky_file(kData + "/fixtures/malformed.json"); }), ss::Errc::parse);
  EXPECT_EQ(code_of([] { ss::read_schottky_file(kData + "/missing.json"); }), ss::Errc::io);
  EXPECT_EQ(code_of([] { ss::load_schottky(kData + "/fixtures/overlapping_disks.json"); }), ss::Errc::invalid_data);
}

TEST(SchottkyData, ThickExampleValidates) {
  const auto d = ss::load_schottky(kData + "/thick.json");
  EXPECT_EQ(d.N, 3);
  EXPECT_FALSE(d.integral);
  EXPECT_GT(d.min_gap(), 0.0);
}

TEST(SchottkyData, JsonRoundTrip) {
  const auto j = ss::schottky_to_json(gamma_ex());
  const auto d2 = ss::parse_schottky_json(j.dump());
  EXPECT_TRUE(d2.integral);
  for (int a = 1; a <= 4; ++a) {
    EXPECT_TRUE(d2.gen(a) == gamma_ex().gen(a));
    EXPECT_EQ(d2.disk(a).center, gamma_ex().disk(a).center);
  }
}

TEST(Words, Algebra) {
  EXPECT_FALSE(ss::is_reduced(2, {1, 3}));
  EXPECT_TRUE(ss::is_reduced(2, {1, 2, 1}));
  EXPECT_TRUE(ss::arrow(2, {1, 2}, {2, 1}));
  EXPECT_TRUE(ss::squiggle({1, 2}, {2, 1}));
  EXPECT_FALSE(ss::arrow(2, {1, 2}, {4, 1}));
  EXPECT_FALSE(ss::squiggle({1, 2}, {1, 2}));
  EXPECT_EQ(ss::mirror(2, {1, 2}), (Word{4, 3}));
  EXPECT_EQ(ss::prime({1, 2, 4}), (Word{1, 2}));
  EXPECT_EQ(ss::concat({1}, {2, 2}), (Word{1, 2, 2}));
}

TEST(Words, GammaGolden) {
  EXPECT_TRUE(ss::gamma_of_word(gamma_ex(), {1, 2}) == Mat2::integer(26, 153, 9, 53));
  EXPECT_TRUE(ss::gamma_of_word(gamma_ex(), {}) == Mat2::identity());
  EXPECT_TRUE(ss::gamma_of_word(gamma_ex(), {2, 1, 4}) == Mat2::integer(165, -937, 28, -159));
  EXPECT_EQ(code_of([] { ss::gamma_of_word(gamma_ex(), {1, 3}); }), ss::Errc::non_reduced_word);
  EXPECT_EQ(code_of([] { ss::gamma_of_word(gamma_ex(), {5}); }), ss::Errc::letter_out_of_range);
}

TEST(Words, IntervalGolden) {
  const ss::RInterval I = ss::interval_of_word(gamma_ex(), {1, 2});
  EXPECT_DOUBLE_EQ(I.lo, 2.875);
  EXPECT_DOUBLE_EQ(I.hi, 2.9);
  EXPECT_NEAR(ss::interval_length(gamma_ex(), {1, 2}), 0.025, 1e-16);
  const ss::ExactInterval E = ss::exact_interval_of_word(gamma_ex(), {1, 2});
  EXPECT_EQ(E.lo, Rational(23, 8));
  EXPECT_EQ(E.hi, Rational(29, 10));
  const ss::RInterval J = ss::interval_of_word(gamma_ex(), {4, 3});
  EXPECT_DOUBLE_EQ(J.lo, -5.9);
  EXPECT_DOUBLE_EQ(J.hi, -5.875);
  // Values from exact sympy evaluation.
  const ss::ExactInterval E3 = ss::exact_interval_of_word(gamma_ex(), {2, 1, 4});
  EXPECT_EQ(E3.lo, Rational(218, 37));
  EXPECT_EQ(E3.hi, Rational(112, 19));
  const ss::ExactInterval E4 = ss::exact_interval_of_word(gamma_ex(), {1, 2, 1});
  EXPECT_EQ(E4.lo, Rational(205, 71));
  EXPECT_EQ(E4.hi, Rational(257, 89));
  EXPECT_EQ(ss::exact_interval_of_word(gamma_ex(), {3, 4}).lo, Rational(-29, 10));
}

TEST(Words, ExactRationalIsExact) {
  EXPECT_EQ(ss::exact_rational(0.1), Rational(3602879701896397, ss::BigInt(1) << 55));
  EXPECT_EQ(ss::exact_rational(-2.5), Rational(-5, 2));
  EXPECT_EQ(ss::exact_rational(0.0), Rational(0));
}

TEST(Distortion, Values) {
  const Mat2 g = Mat2::integer(0, -1, 1, 0);
  EXPECT_NEAR(ss::distortion(g, {1, 2}), std::log(2.0), 1e-15);
  EXPECT_EQ(ss::distortion(Mat2::integer(1, 3, 0, 1), {1, 2}), 0.0);
  EXPECT_EQ(code_of([&] { ss::distortion(g, {-1, 1}); }), ss::Errc::pole_in_interval);
  const Mat2 gp = ss::gamma_of_word(gamma_ex(), {1});
  EXPECT_LT(ss::decomposition_residual(gp, gamma_ex().base_interval(2)), 1e-12);
}

TEST(DistortionProperty, DecompositionOverWords) {
  const auto& d = gamma_ex();
  for (int m = 2; m <= 5; ++m)
    for (const Word& w : ss::enumerate_words(2, m)) {
      const Mat2 g = ss::gamma_of_word(d, ss::prime(w));
      const ss::RInterval J = d.base_interval(w.back());
      const double scale = std::sqrt(g.norm2());
      EXPECT_LT(ss::decomposition_residual(g, J), 1e-12 * scale * scale) << ss::word_str(w);
    }
}

TEST(Partitions, EnumerationAndSuffixPartition) {
  EXPECT_EQ(ss::enumerate_words(2, 1).size(), 4u);
  EXPECT_EQ(ss::enumerate_words(2, 3).size(), 36u);
  EXPECT_EQ(ss::enumerate_words(3, 2).size(), 30u);
  EXPECT_TRUE(ss::is_suffix_partition(2, ss::enumerate_words(2, 4)));
  auto broken = ss::enumerate_words(2, 3);
  broken.pop_back();
  EXPECT_FALSE(ss::is_suffix_partition(2, broken));
  EXPECT_EQ(code_of([&] { ss::partition_sum(gamma_ex(), broken, 0.5); }), ss::Errc::non_partition);
}

TEST(Partitions, SumAtDeltaIsBounded) {
  double lo = INFINITY, hi = 0;
  for (int m = 2; m <= 8; ++m) {
    const double v = ss::partition_sum(gamma_ex(), ss::enumerate_words(2, m), kDeltaEx);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LE(hi / lo, 3.0);
}

TEST(TauBlock, GoldenMembership) {
  const ss::TauBlock b = ss::build_tau_block(gamma_ex(), 0.05);
  std::set<Word> words;
  for (const auto& bw : b.words) words.insert(bw.w);
  EXPECT_TRUE(words.count({1, 2}));
  EXPECT_FALSE(words.count({1, 1}));
  EXPECT_NEAR(ss::interval_length(gamma_ex(), {3, 3}), 0.05714285714285714, 1e-15);
}

TEST(TauBlock, SizesMatchIndependentEnumeration) {
  // Sizes and maximal word lengths from a sympy enumeration.
  const std::vector<std::tuple<double, std::size_t, std::size_t>> expect = {
      {0.1, 20, 3}, {0.05, 24, 3}, {0.02, 40, 4}, {0.01, 44, 4}};
  for (const auto& [tau, size, maxlen] : expect) {
    const ss::TauBlock b = ss::build_tau_block(gamma_ex(), tau);
    EXPECT_EQ(b.words.size(), size) << tau;
    EXPECT_EQ(b.max_word_length(), maxlen) << tau;
    EXPECT_TRUE(ss::mirror_intervals_disjoint(gamma_ex(), b));
    EXPECT_TRUE(ss::is_suffix_partition(2, b.word_list()));
  }
}

TEST(TauBlock, RangeErrors) {
  EXPECT_EQ(code_of([] { ss::build_tau_block(gamma_ex(), 0.0); }), ss::Errc::tau_out_of_range);
  EXPECT_EQ(code_of([] { ss::build_tau_block(gamma_ex(), 2.5); }), ss::Errc::tau_out_of_range);
  EXPECT_EQ(code_of([] { ss::build_tau_block(gamma_ex(), 2.0); }), ss::Errc::tau_out_of_range);
}

TEST(TauBlockProperty, UniqueSuffixForRandomWords) {
  std::mt19937 rng(2024);
  for (double tau : {0.1, 0.02}) {
    const ss::TauBlock b = ss::build_tau_block(gamma_ex(), tau);
    std::set<Word> block, mirrors;
    for (const auto& bw : b.words) {
      block.insert(bw.w);
      mirrors.insert(bw.mirror);
      EXPECT_LE(bw.len_mirror, tau);
      EXPECT_GT(ss::interval_length(gamma_ex(), ss::prime(bw.mirror)), tau);
    }
    for (int i = 0; i < 300; ++i) {
      const Word v = random_reduced(rng, 2, 12);
      EXPECT_EQ(ss::count_block_suffixes(block, v), 1);
      EXPECT_EQ(ss::count_mirror_prefixes(mirrors, ss::mirror(2, v)), 1);
    }
  }
}

TEST(TauBlockProperty, ThickBlocksArePartitions) {
  const auto d = ss::load_schottky(kData + "/thick.json");
  const ss::TauBlock b = ss::build_tau_block(d, 0.1);
  EXPECT_TRUE(ss::is_suffix_partition(3, b.word_list()));
  EXPECT_TRUE(ss::mirror_intervals_disjoint(d, b));
}

TEST(WordsProperty, MirrorInvertsGamma) {
  std::mt19937 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Word w = random_reduced(rng, 2, 1 + i % 9);
    EXPECT_EQ(ss::mirror(2, ss::mirror(2, w)), w);
    EXPECT_TRUE(ss::gamma_of_word(gamma_ex(), ss::mirror(2, w)) == ss::gamma_of_word(gamma_ex(), w).inverse());
    EXPECT_TRUE(ss::gamma_of_word(gamma_ex(), w).exact_det() == 1);
  }
}

TEST(WordsProperty, NestingAndContraction) {
  std::mt19937 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Word w = random_reduced(rng, 2, 2 + i % 8);
    const ss::ExactInterval c = ss::exact_interval_of_word(gamma_ex(), w);
    const ss::ExactInterval p = ss::exact_interval_of_word(gamma_ex(), ss::prime(w));
    EXPECT_TRUE(p.lo < c.lo && c.hi < p.hi) << ss::word_str(w);
    EXPECT_LT(ss::interval_length(gamma_ex(), w), ss::interval_length(gamma_ex(), ss::prime(w)));
  }
}

TEST(LemmaAudit, ExampleGroup) {
  const ss::LemmaAudit a8 = ss::audit_lemmas(gamma_ex(), 8);
  EXPECT_EQ(a8.words, 4u * (1 + 3 + 9 + 27 + 81 + 243 + 729 + 2187));
  EXPECT_TRUE(a8.nesting);
  EXPECT_TRUE(a8.nesting_exact);
  EXPECT_LT(a8.contraction, 1.0);
  EXPECT_LE(a8.concat_max / a8.concat_min, 50.0);
  EXPECT_LE(a8.mirror_max / a8.mirror_min, 50.0);
  EXPECT_LE(a8.normlen_max / a8.normlen_min, 50.0);
  // ||gamma_(1,2)||^2 |I_(1,2)| = 26975 * 0.025 lies in the band.
  const double v = 26975 * 0.025;
  EXPECT_GE(v, a8.normlen_min);
  EXPECT_LE(v, a8.normlen_max);
  EXPECT_NEAR(a8.block_slope, kDeltaEx, 0.1);
  ASSERT_EQ(a8.blocks.size(), 4u);
  for (const auto& b : a8.blocks) EXPECT_GT(b.min_ratio, 0.0);
  EXPECT_THROW(ss::audit_lemmas(gamma_ex(), 2), ss::Error);
}
