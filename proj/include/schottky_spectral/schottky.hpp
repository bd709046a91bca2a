#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include "json.hpp"

#include "schottky_spectral/error.hpp"
#include "schottky_spectral/moebius.hpp"

namespace schottky_spectral {

using Rational = boost::multiprecision::cpp_rational;

// Exact rational value of a finite double.
inline Rational exact_rational(double x) {
  if (x == 0.0) return Rational(0);
  int e = 0;
  const double m = std::frexp(x, &e);
  const auto mant = static_cast<long long>(std::ldexp(m, 53));
  Rational r(mant);
  const int shift = e - 53;
  if (shift >= 0) {
    r *= Rational(BigInt(1) << shift);
  } else {
    r /= Rational(BigInt(1) << (-shift));
  }
  return r;
}

// Reduced words are letter sequences over 1..2N; letters 1..N are the
// generators and N+1..2N their inverses.
using Word = std::vector<int>;

struct WordHash {
  std::size_t operator()(const Word& w) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int a : w) {
      h ^= static_cast<std::size_t>(a);
      h *= 1099511628211ull;
    }
    return h;
  }
};

inline int mirror_letter(int N, int a) { return a <= N ? a + N : a - N; }

inline bool is_reduced(int N, const Word& w) {
  for (std::size_t j = 0; j + 1 < w.size(); ++j) {
    if (w[j + 1] == mirror_letter(N, w[j])) return false;
  }
  return true;
}

// Reversed word with every letter mirrored.
inline Word mirror(int N, const Word& w) {
  Word r(w.rbegin(), w.rend());
  for (int& a : r) a = mirror_letter(N, a);
  return r;
}

inline Word concat(const Word& a, const Word& b) {
  Word r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

// w1 -> w2: the concatenation is reduced.
inline bool arrow(int N, const Word& w1, const Word& w2) {
  if (!is_reduced(N, w1) || !is_reduced(N, w2)) return false;
  if (w1.empty() || w2.empty()) return true;
  return w2.front() != mirror_letter(N, w1.back());
}

// w1 ~> w2: the last letter of w1 equals the first letter of w2.
inline bool squiggle(const Word& w1, const Word& w2) {
  return !w1.empty() && !w2.empty() && w1.back() == w2.front();
}

inline Word prime(const Word& w) { return w.empty() ? w : Word(w.begin(), w.end() - 1); }

inline std::string word_str(const Word& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(w[i]);
  }
  return s;
}

struct SchottkyData {
  int N = 0;
  std::vector<Disk> disks;  // indexed by letter - 1
  std::vector<Mat2> gens;   // indexed by letter - 1
  bool integral = false;

  int letters() const { return 2 * N; }
  int mirror(int a) const { return mirror_letter(N, a); }
  const Disk& disk(int a) const { return disks.at(a - 1); }
  const Mat2& gen(int a) const { return gens.at(a - 1); }
  RInterval base_interval(int a) const {
    const Disk& d = disk(a);
    return {d.center - d.radius, d.center + d.radius};
  }
  // L_Gamma = max_a |I_a|.
  double max_boundary_length() const {
    double m = 0;
    for (const Disk& d : disks) m = std::max(m, 2 * d.radius);
    return m;
  }
  double min_boundary_length() const {
    double m = INFINITY;
    for (const Disk& d : disks) m = std::min(m, 2 * d.radius);
    return m;
  }
  // Smallest distance between the closures of two distinct disks.
  double min_gap() const {
    double g = INFINITY;
    for (std::size_t i = 0; i < disks.size(); ++i)
      for (std::size_t j = i + 1; j < disks.size(); ++j)
        g = std::min(g, std::abs(disks[i].center - disks[j].center) - disks[i].radius -
                            disks[j].radius);
    return g;
  }
  void check_letter(int a) const {
    if (a < 1 || a > 2 * N)
      throw Error(Errc::letter_out_of_range, "letter " + std::to_string(a) + " outside alphabet");
  }
};

// Structural parse of the JSON document; invariants are checked by validate.
inline SchottkyData parse_schottky_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse, std::string("malformed JSON: ") + e.what());
  }
  try {
    SchottkyData d;
    d.N = j.at("N").get<int>();
    if (d.N < 1) throw Error(Errc::parse, "N must be a positive integer");
    const auto& disks = j.at("disks");
    const auto& gens = j.at("generators");
    if (!disks.is_array() || disks.size() != static_cast<std::size_t>(2 * d.N))
      throw Error(Errc::parse, "expected 2N disks");
    if (!gens.is_array() || gens.size() != static_cast<std::size_t>(2 * d.N))
      throw Error(Errc::parse, "expected 2N generators");
    for (const auto& dk : disks) {
      d.disks.push_back(Disk{dk.at("center").get<double>(), dk.at("radius").get<double>()});
    }
    bool integral = true;
    for (const auto& g : gens) {
      if (!g.is_array() || g.size() != 2 || g[0].size() != 2 || g[1].size() != 2)
        throw Error(Errc::parse, "generator must be a 2x2 array");
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
          if (!g[r][c].is_number()) throw Error(Errc::parse, "generator entry is not a number");
          if (!g[r][c].is_number_integer()) integral = false;
        }
    }
    d.integral = integral;
    for (const auto& g : gens) {
      if (integral) {
        d.gens.push_back(Mat2::integer(BigInt(g[0][0].get<long long>()), BigInt(g[0][1].get<long long>()),
                                       BigInt(g[1][0].get<long long>()), BigInt(g[1][1].get<long long>())));
      } else {
        d.gens.push_back(Mat2::real(g[0][0].get<double>(), g[0][1].get<double>(), g[1][0].get<double>(),
                                    g[1][1].get<double>()));
      }
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("schema error: ") + e.what());
  }
}

inline SchottkyData read_schottky_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schottky_json(ss.str());
}

inline nlohmann::json schottky_to_json(const SchottkyData& d) {
  nlohmann::json j;
  j["N"] = d.N;
  j["disks"] = nlohmann::json::array();
  for (const Disk& k : d.disks) j["disks"].push_back({{"center", k.center}, {"radius", k.radius}});
  j["generators"] = nlohmann::json::array();
  for (const Mat2& g : d.gens) {
    if (g.exact()) {
      j["generators"].push_back({{g.ia().convert_to<long long>(), g.ib().convert_to<long long>()},
                                 {g.ic().convert_to<long long>(), g.id().convert_to<long long>()}});
    } else {
      j["generators"].push_back({{g.a(), g.b()}, {g.c(), g.d()}});
    }
  }
  return j;
}

struct ValidationReport {
  bool pass = true;
  double min_gap = 0;
  std::vector<double> pair_margins;  // closure gaps for i < j, row-major
  double max_residual = 0;           // boundary-mapping residual
  bool inverse_pairing = true;
  double inverse_pairing_error = 0;
  bool unimodular = true;
  bool orientation = true;  // exterior of D_{mirror a} lands inside D_a
  std::vector<std::string> failures;

  nlohmann::json to_json() const {
    return {{"pass", pass},
            {"min_gap", min_gap},
            {"pair_margins", pair_margins},
            {"max_boundary_residual", max_residual},
            {"inverse_pairing", inverse_pairing},
            {"inverse_pairing_error", inverse_pairing_error},
            {"unimodular", unimodular},
            {"orientation", orientation},
            {"failures", failures}};
  }
};

// Checks disjoint closures, gens[mirror a] = gens[a]^{-1}, and that gamma_a maps
// the boundary circle of D_{mirror a} onto the boundary of D_a (sampled) and the
// exterior into D_a.
inline ValidationReport validate(const SchottkyData& d, double tol = 1e-10, int samples = 64) {
  ValidationReport r;
  const int L = d.letters();
  r.min_gap = INFINITY;
  for (int i = 0; i < L; ++i) {
    if (!(d.disks[i].radius > 0) || !std::isfinite(d.disks[i].center)) {
      r.failures.push_back("disk " + std::to_string(i + 1) + " has non-positive radius");
    }
    for (int j = i + 1; j < L; ++j) {
      const double m = std::abs(d.disks[i].center - d.disks[j].center) - d.disks[i].radius -
                       d.disks[j].radius;
      r.pair_margins.push_back(m);
      r.min_gap = std::min(r.min_gap, m);
      if (!(m > 0))
        r.failures.push_back("closures of D" + std::to_string(i + 1) + " and D" + std::to_string(j + 1) +
                             " intersect");
    }
  }
  for (int a = 1; a <= L; ++a) {
    const Mat2& g = d.gen(a);
    if (!g.unimodular(tol)) {
      r.unimodular = false;
      r.failures.push_back("generator " + std::to_string(a) + " is not unimodular");
    }
  }
  for (int a = 1; a <= d.N; ++a) {
    const Mat2 inv = d.gen(a).inverse();
    const Mat2& other = d.gen(d.mirror(a));
    if (inv.exact() && other.exact()) {
      if (!(inv == other)) {
        r.inverse_pairing = false;
        r.inverse_pairing_error = std::max(r.inverse_pairing_error, inv.max_abs_diff(other));
      }
    } else {
      const double e = inv.max_abs_diff(other);
      double scale = 1;
      for (double x : inv.entries()) scale = std::max(scale, std::abs(x));
      r.inverse_pairing_error = std::max(r.inverse_pairing_error, e);
      if (e > tol * scale) r.inverse_pairing = false;
    }
  }
  if (!r.inverse_pairing) r.failures.push_back("inverse pairing broken");
  for (int a = 1; a <= L; ++a) {
    const Mat2& g = d.gen(a);
    const Disk& src = d.disk(d.mirror(a));
    const Disk& dst = d.disk(a);
    for (int k = 0; k < samples; ++k) {
      const double th = 2 * M_PI * (k + 0.5) / samples;
      const cplx p = src.center + src.radius * std::polar(1.0, th);
      const ExtComplex q = mobius_apply(g, ExtComplex::at(p));
      const double res = q.infinite ? INFINITY : std::abs(std::abs(q.z - dst.center) - dst.radius);
      r.max_residual = std::max(r.max_residual, res);
    }
    const ExtComplex far = mobius_apply(g, ExtComplex::inf());
    if (far.infinite || !(std::abs(far.z - dst.center) < dst.radius)) r.orientation = false;
  }
  if (!(r.max_residual <= tol)) r.failures.push_back("boundary-mapping residual exceeds tolerance");
  if (!r.orientation) r.failures.push_back("generator does not map the exterior into its disk");
  r.pass = r.failures.empty();
  return r;
}

// Parses and validates; throws invalid_data on failure.
inline SchottkyData load_schottky(const std::string& path, double tol = 1e-10) {
  SchottkyData d = read_schottky_file(path);
  const ValidationReport r = validate(d, tol);
  if (!r.pass) throw Error(Errc::invalid_data, "invalid Schottky data: " + r.failures.front());
  return d;
}

inline void require_reduced(const SchottkyData& d, const Word& w) {
  for (int a : w) d.check_letter(a);
  if (!is_reduced(d.N, w)) throw Error(Errc::non_reduced_word, "word (" + word_str(w) + ") is not reduced");
}

inline Mat2 gamma_of_word(const SchottkyData& d, const Word& w) {
  require_reduced(d, w);
  Mat2 g = Mat2::identity();
  for (int a : w) g = g * d.gen(a);
  return g;
}

// Interval g(J) for a matrix whose pole lies outside J; length computed as
// |y-x| / |(cx+d)(cy+d)| to avoid cancellation.
inline RInterval image_interval(const Mat2& g, const RInterval& J, double* length = nullptr) {
  const double x = J.lo, y = J.hi;
  const double u = mobius_apply_stable(g, x).real();
  const double v = mobius_apply_stable(g, y).real();
  if (length) *length = (y - x) / std::abs((g.c() * x + g.d()) * (g.c() * y + g.d()));
  return {std::min(u, v), std::max(u, v)};
}

inline double image_length(const Mat2& g, const RInterval& J) {
  return (J.hi - J.lo) / std::abs((g.c() * J.lo + g.d()) * (g.c() * J.hi + g.d()));
}

inline RInterval interval_of_word(const SchottkyData& d, const Word& w) {
  if (w.empty()) throw Error(Errc::non_reduced_word, "interval_of_word: empty word");
  const Mat2 g = gamma_of_word(d, prime(w));
  return image_interval(g, d.base_interval(w.back()));
}

inline double interval_length(const SchottkyData& d, const Word& w) {
  if (w.empty()) throw Error(Errc::non_reduced_word, "interval_length: empty word");
  return image_length(gamma_of_word(d, prime(w)), d.base_interval(w.back()));
}

// Exact endpoints of I_w for integral data, with the disk endpoints taken as
// the exact rationals of their double values.
struct ExactInterval {
  Rational lo, hi;
};

inline Rational exact_mobius(const Mat2& g, const Rational& x) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  const BigInt p = numerator(x), q = denominator(x);
  return Rational(g.ia() * p + g.ib() * q) / Rational(g.ic() * p + g.id() * q);
}

inline ExactInterval exact_interval_of_word(const SchottkyData& d, const Word& w) {
  if (!d.integral) throw Error(Errc::non_integral, "exact intervals need integral generators");
  if (w.empty()) throw Error(Errc::non_reduced_word, "exact_interval_of_word: empty word");
  const Mat2 g = gamma_of_word(d, prime(w));
  const RInterval J = d.base_interval(w.back());
  Rational u = exact_mobius(g, exact_rational(J.lo));
  Rational v = exact_mobius(g, exact_rational(J.hi));
  if (v < u) std::swap(u, v);
  return {u, v};
}

// T_J = [[|J|^{1/2}, x_J |J|^{-1/2}], [0, |J|^{-1/2}]] maps [0,1] onto J.
inline Mat2 T_of_interval(const RInterval& J) {
  const double L = J.length();
  return Mat2::real(std::sqrt(L), J.lo / std::sqrt(L), 0.0, 1.0 / std::sqrt(L));
}

inline Mat2 g_alpha(double alpha) {
  const double e = std::exp(alpha / 2), f = std::exp(-alpha / 2);
  return Mat2::real(e, 0.0, e - f, f);
}

// alpha(g, J) = log((g^{-1}(inf) - y) / (g^{-1}(inf) - x)), and 0 for affine g.
inline double distortion(const Mat2& g, const RInterval& J) {
  const ExtComplex p = pole_of_inverse(g);
  if (p.infinite) return 0.0;
  const double q = p.z.real();
  if (q >= J.lo && q <= J.hi) throw Error(Errc::pole_in_interval, "distortion: pole inside interval");
  return std::log((q - J.hi) / (q - J.lo));
}

// Entrywise residual of g = +-T_{g(J1)} g_alpha T_{J1}^{-1}.
inline double decomposition_residual(const Mat2& g, const RInterval& J1) {
  const RInterval J2 = image_interval(g, J1);
  const double al = distortion(g, J1);
  const Mat2 rhs = T_of_interval(J2) * g_alpha(al) * T_of_interval(J1).inverse();
  const Mat2 gd = Mat2::real(g.a(), g.b(), g.c(), g.d());
  return std::min(gd.max_abs_diff(rhs), gd.max_abs_diff(rhs.negated()));
}

// All reduced words of length exactly m, in lexicographic order.
inline std::vector<Word> enumerate_words(int N, int m) {
  if (m < 1) throw Error(Errc::parameter_range, "enumerate_words: m must be >= 1");
  std::vector<Word> out;
  Word w;
  std::function<void()> rec = [&]() {
    if (static_cast<int>(w.size()) == m) {
      out.push_back(w);
      return;
    }
    for (int a = 1; a <= 2 * N; ++a) {
      if (!w.empty() && a == mirror_letter(N, w.back())) continue;
      w.push_back(a);
      rec();
      w.pop_back();
    }
  };
  rec();
  return out;
}

// True when every sufficiently long reduced word has exactly one suffix in P:
// reading words from the right, P must be the leaf set of a complete tree.
inline bool is_suffix_partition(int N, const std::vector<Word>& P) {
  if (P.empty()) return false;
  std::set<Word> rev;
  for (const Word& w : P) {
    if (w.empty() || !is_reduced(N, w)) return false;
    rev.insert(Word(w.rbegin(), w.rend()));
  }
  std::set<Word> internal;
  for (const Word& r : rev)
    for (std::size_t k = 1; k < r.size(); ++k) internal.insert(Word(r.begin(), r.begin() + k));
  for (const Word& r : rev)
    if (internal.count(r)) return false;
  // Every internal node and the root must have all admissible children.
  auto children_ok = [&](const Word& node) {
    for (int a = 1; a <= 2 * N; ++a) {
      if (!node.empty() && a == mirror_letter(N, node.back())) continue;
      Word ch = node;
      ch.push_back(a);
      if (!rev.count(ch) && !internal.count(ch)) return false;
    }
    return true;
  };
  if (!children_ok({})) return false;
  for (const Word& n : internal)
    if (!children_ok(n)) return false;
  return true;
}

inline double partition_sum(const SchottkyData& d, const std::vector<Word>& P, double s) {
  if (!is_suffix_partition(d.N, P)) throw Error(Errc::non_partition, "partition_sum: not a suffix partition");
  double total = 0;
  for (const Word& w : P) total += std::pow(interval_length(d, w), s);
  return total;
}

struct BlockWord {
  Word w;             // element of B(tau)
  Word mirror;        // its mirror word, a member of the prefix frontier
  Mat2 gamma_prime;   // gamma_{w'}
  double len = 0;     // |I_w|
  double len_mirror = 0;  // |I_{mirror w}|
};

struct TauBlock {
  double tau = 0;
  std::vector<BlockWord> words;
  bool precision_warning = false;
  std::size_t max_word_length() const {
    std::size_t m = 0;
    for (const auto& b : words) m = std::max(m, b.w.size());
    return m;
  }
  std::vector<Word> word_list() const {
    std::vector<Word> r;
    for (const auto& b : words) r.push_back(b.w);
    return r;
  }
};

// Depth-first search over words u with the stopping rule |I_u| <= tau < |I_{u'}|
// and |u| >= 2; B(tau) is the set of mirrors of the stopped words. The search
// needs tau < min_a |I_a| so that every first letter has descendants in the
// frontier.
inline TauBlock build_tau_block(const SchottkyData& d, double tau) {
  if (!(tau > 0) || !(tau < d.max_boundary_length()))
    throw Error(Errc::tau_out_of_range, "tau must lie in (0, L_Gamma)");
  if (!(tau < d.min_boundary_length()))
    throw Error(Errc::tau_out_of_range, "tau must be below min_a |I_a| for B(tau) to be a partition");
  TauBlock block;
  block.tau = tau;
  std::vector<std::pair<Word, double>> frontier;
  Word u;
  // gp = gamma_{u'} at each depth.
  std::function<void(const Mat2&)> rec = [&](const Mat2& gp) {
    const int last = u.back();
    const Mat2 gu = gp * d.gen(last);
    for (int x = 1; x <= d.letters(); ++x) {
      if (x == d.mirror(last)) continue;
      u.push_back(x);
      const double len = image_length(gu, d.base_interval(x));
      if (len < 1e-14) block.precision_warning = true;
      if (len <= tau) {
        frontier.emplace_back(u, len);
      } else {
        rec(gu);
      }
      u.pop_back();
    }
  };
  for (int a = 1; a <= d.letters(); ++a) {
    u = {a};
    rec(Mat2::identity());
  }
  for (auto& [uw, len] : frontier) {
    BlockWord b;
    b.mirror = uw;
    b.w = mirror(d.N, uw);
    b.len_mirror = len;
    b.gamma_prime = gamma_of_word(d, prime(b.w));
    b.len = image_length(b.gamma_prime, d.base_interval(b.w.back()));
    block.words.push_back(std::move(b));
  }
  std::sort(block.words.begin(), block.words.end(),
            [](const BlockWord& x, const BlockWord& y) { return x.w < y.w; });
  return block;
}

// Number of suffixes of v lying in the block.
inline int count_block_suffixes(const std::set<Word>& block_words, const Word& v) {
  int c = 0;
  for (std::size_t k = 1; k <= v.size(); ++k)
    if (block_words.count(Word(v.end() - k, v.end()))) ++c;
  return c;
}

// Number of prefixes of v lying in the mirror set of the block.
inline int count_mirror_prefixes(const std::set<Word>& mirror_words, const Word& v) {
  int c = 0;
  for (std::size_t k = 1; k <= v.size(); ++k)
    if (mirror_words.count(Word(v.begin(), v.begin() + k))) ++c;
  return c;
}

// Pairwise disjointness of {I_u : u in mirror set}; exact for integral data.
inline bool mirror_intervals_disjoint(const SchottkyData& d, const TauBlock& b) {
  if (d.integral) {
    std::vector<ExactInterval> iv;
    for (const auto& bw : b.words) iv.push_back(exact_interval_of_word(d, bw.mirror));
    std::sort(iv.begin(), iv.end(), [](const ExactInterval& x, const ExactInterval& y) { return x.lo < y.lo; });
    for (std::size_t i = 0; i + 1 < iv.size(); ++i)
      if (!(iv[i].hi < iv[i + 1].lo)) return false;
    return true;
  }
  std::vector<RInterval> iv;
  for (const auto& bw : b.words) iv.push_back(interval_of_word(d, bw.mirror));
  std::sort(iv.begin(), iv.end(), [](const RInterval& x, const RInterval& y) { return x.lo < y.lo; });
  for (std::size_t i = 0; i + 1 < iv.size(); ++i)
    if (!(iv[i].hi < iv[i + 1].lo)) return false;
  return true;
}

struct BlockStats {
  double tau = 0;
  std::size_t count = 0;
  std::size_t min_len = 0, max_len = 0;
  double min_ratio = 0, max_ratio = 0;  // |I|/tau over B(tau) and its mirror set
};

struct LemmaAudit {
  int max_len = 0;
  std::size_t words = 0;
  double contraction = 0;  // max |I_w| / |I_{w'}|
  bool nesting = true;
  bool nesting_exact = false;
  double concat_min = INFINITY, concat_max = 0;
  double mirror_min = INFINITY, mirror_max = 0;
  double normlen_min = INFINITY, normlen_max = 0;
  std::vector<BlockStats> blocks;
  double block_slope = 0;   // fitted exponent of #B(tau) against tau^{-1}
  double length_slope = 0;  // word-length envelope max|w| <= C log(1/tau) + A
  double length_offset = 0;

  nlohmann::json to_json() const {
    nlohmann::json bj = nlohmann::json::array();
    for (const auto& b : blocks)
      bj.push_back({{"tau", b.tau},
                    {"count", b.count},
                    {"min_word_length", b.min_len},
                    {"max_word_length", b.max_len},
                    {"min_length_over_tau", b.min_ratio},
                    {"max_length_over_tau", b.max_ratio}});
    return {{"max_len", max_len},
            {"words", words},
            {"contraction", contraction},
            {"nesting", nesting},
            {"nesting_exact", nesting_exact},
            {"concatenation", {{"min", concat_min}, {"max", concat_max}}},
            {"mirror", {{"min", mirror_min}, {"max", mirror_max}}},
            {"norm_length", {{"min", normlen_min}, {"max", normlen_max}}},
            {"blocks", bj},
            {"block_slope", block_slope},
            {"word_length_envelope", {{"slope", length_slope}, {"offset", length_offset}}}};
  }
};

inline std::vector<double> default_tau_grid(const SchottkyData& d) {
  const double m = d.min_boundary_length();
  return {0.05 * m, 0.025 * m, 0.01 * m, 0.005 * m};
}

// Least-squares slope and intercept of y against x.
inline std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  const double slope = den != 0 ? (n * sxy - sx * sy) / den : 0.0;
  return {slope, (sy - slope * sx) / n};
}

inline LemmaAudit audit_lemmas(const SchottkyData& d, int max_len, std::vector<double> taus = {}) {
  if (max_len < 3) throw Error(Errc::parameter_range, "audit_lemmas: max_len must be >= 3");
  if (taus.empty()) taus = default_tau_grid(d);
  LemmaAudit A;
  A.max_len = max_len;
  A.nesting_exact = d.integral;
  std::unordered_map<Word, double, WordHash> len;
  Word w;
  // DFS carrying gamma_{w'} and the interval of the parent word; nesting is
  // I_w inside I_{w'}.
  std::function<void(const Mat2&, const ExactInterval&, const RInterval&)> rec =
      [&](const Mat2& gp, const ExactInterval& pe, const RInterval& pf) {
    const int last = w.back();
    const RInterval J = d.base_interval(last);
    const RInterval f = image_interval(gp, J);
    const double L = image_length(gp, J);
    len[w] = L;
    ++A.words;
    ExactInterval e;
    if (d.integral) {
      e.lo = exact_mobius(gp, exact_rational(J.lo));
      e.hi = exact_mobius(gp, exact_rational(J.hi));
      if (e.hi < e.lo) std::swap(e.lo, e.hi);
    }
    if (w.size() >= 2) {
      A.contraction = std::max(A.contraction, L / len.at(prime(w)));
      if (d.integral) {
        if (!(pe.lo < e.lo && e.hi < pe.hi)) A.nesting = false;
      } else if (!(pf.lo <= f.lo && f.hi <= pf.hi)) {
        A.nesting = false;
      }
    }
    const Mat2 g = gp * d.gen(last);
    const double nl = (d.integral ? to_double(g.exact_norm2()) : g.norm2()) * L;
    A.normlen_min = std::min(A.normlen_min, nl);
    A.normlen_max = std::max(A.normlen_max, nl);
    if (static_cast<int>(w.size()) == max_len) return;
    for (int x = 1; x <= d.letters(); ++x) {
      if (x == d.mirror(last)) continue;
      w.push_back(x);
      rec(g, e, f);
      w.pop_back();
    }
  };
  for (int a = 1; a <= d.letters(); ++a) {
    w = {a};
    rec(Mat2::identity(), {}, {});
  }
  for (const auto& [word, L] : len) {
    const double Lm = len.at(mirror(d.N, word));
    A.mirror_min = std::min(A.mirror_min, Lm / L);
    A.mirror_max = std::max(A.mirror_max, Lm / L);
    for (std::size_t k = 1; k < word.size(); ++k) {
      const Word a(word.begin(), word.begin() + k), b(word.begin() + k, word.end());
      const double r = L / (len.at(a) * len.at(b));
      A.concat_min = std::min(A.concat_min, r);
      A.concat_max = std::max(A.concat_max, r);
    }
  }
  std::vector<double> lx, ly, lm;
  for (double tau : taus) {
    const TauBlock b = build_tau_block(d, tau);
    BlockStats s;
    s.tau = tau;
    s.count = b.words.size();
    s.min_len = SIZE_MAX;
    s.min_ratio = INFINITY;
    for (const auto& bw : b.words) {
      s.min_len = std::min(s.min_len, bw.w.size());
      s.max_len = std::max(s.max_len, bw.w.size());
      for (double L : {bw.len, bw.len_mirror}) {
        s.min_ratio = std::min(s.min_ratio, L / tau);
        s.max_ratio = std::max(s.max_ratio, L / tau);
      }
    }
    A.blocks.push_back(s);
    lx.push_back(std::log(1 / tau));
    ly.push_back(std::log(static_cast<double>(s.count)));
    lm.push_back(static_cast<double>(s.max_len));
  }
  if (taus.size() >= 2) {
    A.block_slope = fit_line(lx, ly).first;
    A.length_slope = fit_line(lx, lm).first;
    A.length_offset = -INFINITY;
    for (std::size_t i = 0; i < lx.size(); ++i)
      A.length_offset = std::max(A.length_offset, lm[i] - A.length_slope * lx[i]);
  }
  return A;
}

}  // namespace schottky_spectral
