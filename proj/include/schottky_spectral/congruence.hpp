#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "schottky_spectral/error.hpp"
#include "schottky_spectral/moebius.hpp"
#include "schottky_spectral/schottky.hpp"

namespace schottky_spectral {

// 2x2 matrix over Z/n with entries in [0, n).
struct ModMat {
  std::array<long long, 4> e{1, 0, 0, 1};
  bool operator==(const ModMat& o) const { return e == o.e; }
};

inline ModMat mod_mul(const ModMat& x, const ModMat& y, long long n) {
  return {{(x.e[0] * y.e[0] + x.e[1] * y.e[2]) % n, (x.e[0] * y.e[1] + x.e[1] * y.e[3]) % n,
           (x.e[2] * y.e[0] + x.e[3] * y.e[2]) % n, (x.e[2] * y.e[1] + x.e[3] * y.e[3]) % n}};
}

inline long long mod_reduce(const BigInt& v, long long n) {
  BigInt r = v % n;
  if (r < 0) r += n;
  return r.convert_to<long long>();
}

inline ModMat reduce_mod(const Mat2& m, long long n) {
  if (!m.exact()) throw Error(Errc::non_integral, "reduction mod n needs an integral matrix");
  return {{mod_reduce(m.ia(), n), mod_reduce(m.ib(), n), mod_reduce(m.ic(), n), mod_reduce(m.id(), n)}};
}

inline std::uint64_t mod_key(const ModMat& m, long long n) {
  const auto u = static_cast<std::uint64_t>(n);
  return ((static_cast<std::uint64_t>(m.e[0]) * u + m.e[1]) * u + m.e[2]) * u + m.e[3];
}

// Prime factorisation as (p, a) pairs.
inline std::vector<std::pair<long long, int>> factorize(long long n) {
  std::vector<std::pair<long long, int>> f;
  for (long long p = 2; p * p <= n; ++p) {
    int a = 0;
    while (n % p == 0) {
      n /= p;
      ++a;
    }
    if (a) f.emplace_back(p, a);
  }
  if (n > 1) f.emplace_back(n, 1);
  return f;
}

// #SL(2, Z/n) = prod over p^a || n of p^{3a-2}(p^2 - 1).
inline long long sl2_order(long long n) {
  if (n < 1) throw Error(Errc::parameter_range, "sl2_order: n must be >= 1");
  long long r = 1;
  for (auto [p, a] : factorize(n)) {
    long long q = 1;
    for (int i = 0; i < 3 * a - 2; ++i) q *= p;
    r *= q * (p * p - 1);
  }
  return r;
}

// Direct count of determinant-one matrices over Z/n.
inline long long sl2_order_brute_force(long long n) {
  if (n == 1) return 1;
  long long c = 0;
  for (long long a = 0; a < n; ++a)
    for (long long b = 0; b < n; ++b)
      for (long long cc = 0; cc < n; ++cc)
        for (long long d = 0; d < n; ++d)
          if (((a * d - b * cc) % n + n) % n == 1) ++c;
  return c;
}

struct CongruenceContext {
  long long n = 1;
  std::vector<ModMat> image_group;  // element 0 is the identity
  std::size_t index = 1;
  bool surjective = true;
  long long sl2_size = 1;
  // right_mul[a-1][x] = index of image_group[x] * (gamma_a mod n)
  std::vector<std::vector<int>> right_mul;

  // Coset index reached from x by right multiplication with the image of gamma_w.
  int act(int x, const Word& w) const {
    if (n == 1) return 0;
    for (int a : w) x = right_mul[a - 1][x];
    return x;
  }
  int image_index(const Word& w) const { return act(0, w); }
};

// The closure is enumerated explicitly, so images larger than max_index are refused.
inline CongruenceContext build_context(const SchottkyData& d, long long n, std::size_t max_index = 4000000) {
  if (n < 1) throw Error(Errc::parameter_range, "build_context: n must be >= 1");
  CongruenceContext ctx;
  ctx.n = n;
  ctx.sl2_size = sl2_order(n);
  if (n == 1) {
    ctx.image_group = {ModMat{{0, 0, 0, 0}}};
    ctx.index = 1;
    ctx.surjective = true;
    ctx.right_mul.assign(d.letters(), std::vector<int>{0});
    return ctx;
  }
  if (!d.integral) throw Error(Errc::non_integral, "build_context: generators must be integral for n >= 2");
  std::vector<ModMat> gens;
  for (int a = 1; a <= d.letters(); ++a) gens.push_back(reduce_mod(d.gen(a), n));
  std::unordered_map<std::uint64_t, int> pos;
  ModMat id{{1 % n, 0, 0, 1 % n}};
  ctx.image_group.push_back(id);
  pos[mod_key(id, n)] = 0;
  ctx.right_mul.assign(d.letters(), {});
  for (std::size_t head = 0; head < ctx.image_group.size(); ++head) {
    for (int a = 0; a < d.letters(); ++a) {
      const ModMat y = mod_mul(ctx.image_group[head], gens[a], n);
      auto [it, inserted] = pos.emplace(mod_key(y, n), static_cast<int>(ctx.image_group.size()));
      if (inserted) {
        if (ctx.image_group.size() >= max_index)
          throw Error(Errc::enumeration_cap, "build_context: image of Gamma mod n exceeds " +
                                                 std::to_string(max_index) + " elements");
        ctx.image_group.push_back(y);
      }
      ctx.right_mul[a].resize(ctx.image_group.size(), -1);
      ctx.right_mul[a][head] = it->second;
    }
  }
  for (auto& row : ctx.right_mul) row.resize(ctx.image_group.size());
  ctx.index = ctx.image_group.size();
  ctx.surjective = static_cast<long long>(ctx.index) == ctx.sl2_size;
  return ctx;
}

// Closure check: products and inverses of image elements stay in the set.
inline bool image_group_closed(const CongruenceContext& ctx) {
  if (ctx.n == 1) return true;
  const long long n = ctx.n;
  std::unordered_map<std::uint64_t, int> pos;
  for (std::size_t i = 0; i < ctx.image_group.size(); ++i) pos[mod_key(ctx.image_group[i], n)] = static_cast<int>(i);
  for (const ModMat& x : ctx.image_group) {
    const ModMat inv{{x.e[3], (n - x.e[1]) % n, (n - x.e[2]) % n, x.e[0]}};
    if (!pos.count(mod_key(inv, n))) return false;
    for (const ModMat& y : ctx.image_group)
      if (!pos.count(mod_key(mod_mul(x, y, n), n))) return false;
  }
  return true;
}

// m == I mod n on exact integer entries.
inline bool in_gamma_n(const CongruenceContext& ctx, const Mat2& m) {
  if (ctx.n == 1) return true;
  if (!m.exact()) throw Error(Errc::non_integral, "in_gamma_n needs an integral matrix");
  const BigInt n = ctx.n;
  return ((m.ia() - 1) % n) == 0 && (m.ib() % n) == 0 && (m.ic() % n) == 0 && ((m.id() - 1) % n) == 0;
}

// Trace of the regular representation on the cosets: index on Gamma_n, else 0.
inline long long trace_sigma(const CongruenceContext& ctx, const Mat2& m) {
  return in_gamma_n(ctx, m) ? static_cast<long long>(ctx.index) : 0;
}

struct CountResult {
  long long n = 1;
  double R = 0;
  long long count = 0;
  std::vector<std::array<long long, 4>> witnesses;
};

// N_n(R): integral unimodular m = I mod n with Frobenius norm <= R and bc != 0.
// Loops over (a, d, b) and solves c = (ad - 1)/b.
inline CountResult count_Nn(long long n, double R, double cap = 200, bool keep_witnesses = true) {
  if (n < 1) throw Error(Errc::parameter_range, "count_Nn: n must be >= 1");
  if (!(R > 1)) throw Error(Errc::parameter_range, "count_Nn: R must exceed 1");
  if (R > cap) throw Error(Errc::enumeration_cap, "count_Nn: R exceeds the enumeration cap");
  CountResult res;
  res.n = n;
  res.R = R;
  const auto B = static_cast<long long>(std::floor(R));
  const double R2 = R * R;
  auto congr = [&](long long v, long long target) { return ((v - target) % n + n) % n == 0; };
  for (long long a = -B; a <= B; ++a) {
    if (!congr(a, 1)) continue;
    for (long long d = -B; d <= B; ++d) {
      if (!congr(d, 1)) continue;
      const long long num = a * d - 1;
      for (long long b = -B; b <= B; ++b) {
        if (b == 0 || !congr(b, 0) || num % b != 0) continue;
        const long long c = num / b;
        if (c == 0 || !congr(c, 0)) continue;
        const long long nn = a * a + b * b + c * c + d * d;
        if (static_cast<double>(nn) > R2) continue;
        ++res.count;
        if (keep_witnesses) res.witnesses.push_back({a, b, c, d});
      }
    }
  }
  return res;
}

inline long long divisor_count(long long k) {
  if (k == 0) throw Error(Errc::zero_argument, "divisor_count: k must be nonzero");
  if (k < 0) k = -k;
  long long c = 0;
  for (long long i = 1; i * i <= k; ++i) {
    if (k % i == 0) c += (i * i == k) ? 1 : 2;
  }
  return 2 * c;
}

inline int omega(long long n) {
  if (n < 1) throw Error(Errc::parameter_range, "omega: n must be >= 1");
  return static_cast<int>(factorize(n).size());
}

struct Fraction {
  long long num = 0, den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
};

// n / 3^{omega(n)} in lowest terms.
inline Fraction new_eig_threshold(long long n) {
  long long den = 1;
  for (int i = 0; i < omega(n); ++i) den *= 3;
  const long long g = std::gcd(n, den);
  return {n / g, den / g};
}

struct PairRecord {
  Word w1, w2;
  std::size_t len_A = 0, len_B1 = 0, len_B2 = 0, len_C = 0;
  int a = 0, c = 0;
};

struct PairAudit {
  double tau = 0;
  long long n = 1;
  std::size_t block_size = 0;
  std::size_t pairs = 0;     // #P_n(tau)
  std::size_t diagonal = 0;  // pairs with w1 == w2
  std::size_t offdiagonal = 0;
  std::size_t empty_middle = 0;  // decompositions with B1 or B2 empty
  std::vector<PairRecord> records;                 // off-diagonal pairs
  std::map<std::pair<int, int>, std::size_t> buckets;  // (a, c) -> count
  double H_empirical = 0;  // max 2^{a+c} n tau over nonempty buckets
  double bound_rhs = 0;
  double bound_ratio = 0;

  nlohmann::json to_json() const {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& [ac, cnt] : buckets)
      b.push_back({{"a", ac.first},
                   {"c", ac.second},
                   {"count", cnt},
                   {"scaled", std::ldexp(1.0, ac.first + ac.second) * static_cast<double>(n) * tau}});
    return {{"tau", tau},
            {"n", n},
            {"block_size", block_size},
            {"pairs", pairs},
            {"diagonal", diagonal},
            {"offdiagonal", offdiagonal},
            {"empty_middle", empty_middle},
            {"buckets", b},
            {"H_empirical", H_empirical},
            {"bound_rhs", bound_rhs},
            {"bound_ratio", bound_ratio}};
  }
};

// Bucket index a with 2^{-(a+1)} <= L/G < 2^{-a}.
inline int length_bucket(double L, double G) {
  int a = static_cast<int>(std::ceil(std::log2(G / L))) - 1;
  if (a < 0) a = 0;
  while (L / G >= std::ldexp(1.0, -a) && a > 0) --a;
  while (L / G < std::ldexp(1.0, -(a + 1))) ++a;
  return a;
}

// (log 1/tau)^5 (tau^{-(2+eps)}/n^{3+eps} + tau^{-(1+eps)}/n^{1+eps}) + tau^{-delta}.
inline double ptau_bound_rhs(double tau, long long n, double delta, double eps) {
  const double lg = std::log(1 / tau);
  const double nn = static_cast<double>(n);
  return std::pow(lg, 5) * (std::pow(tau, -(2 + eps)) / std::pow(nn, 3 + eps) +
                            std::pow(tau, -(1 + eps)) / std::pow(nn, 1 + eps)) +
         std::pow(tau, -delta);
}

// Decomposition w1 = A B1 C, w2 = A B2 C with A the longest common prefix that
// leaves both remainders nonempty and C the longest common suffix of the
// remainders.
inline PairRecord decompose_pair(const Word& w1, const Word& w2) {
  PairRecord r;
  r.w1 = w1;
  r.w2 = w2;
  const std::size_t m = std::min(w1.size(), w2.size());
  std::size_t p = 0;
  while (p + 1 < m && w1[p] == w2[p]) ++p;
  std::size_t q = 0;
  const std::size_t r1 = w1.size() - p, r2 = w2.size() - p;
  while (q < std::min(r1, r2) && w1[w1.size() - 1 - q] == w2[w2.size() - 1 - q]) ++q;
  r.len_A = p;
  r.len_C = q;
  r.len_B1 = r1 - q;
  r.len_B2 = r2 - q;
  return r;
}

inline PairAudit audit_ptau(const SchottkyData& d, const CongruenceContext& ctx, double tau, double delta,
                            double eps = 0.1) {
  if (!(tau > 0) || !(tau < std::min(1.0, d.max_boundary_length())))
    throw Error(Errc::tau_out_of_range, "audit_ptau: tau must lie in (0, min{1, L_Gamma})");
  const TauBlock block = build_tau_block(d, tau);
  PairAudit A;
  A.tau = tau;
  A.n = ctx.n;
  A.block_size = block.words.size();
  const double G = 2 * d.max_boundary_length();
  std::vector<Mat2> gam;
  std::map<std::tuple<int, int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < block.words.size(); ++i) {
    const Word& w = block.words[i].w;
    gam.push_back(block.words[i].gamma_prime * d.gen(w.back()));
    groups[{w.front(), w.back(), ctx.image_index(w)}].push_back(i);
  }
  for (const auto& [key, idx] : groups) {
    for (std::size_t i : idx) {
      for (std::size_t j : idx) {
        if (ctx.n > 1 && !in_gamma_n(ctx, gam[i] * gam[j].inverse())) continue;
        ++A.pairs;
        if (i == j) {
          ++A.diagonal;
          continue;
        }
        ++A.offdiagonal;
        PairRecord rec = decompose_pair(block.words[i].w, block.words[j].w);
        if (rec.len_B1 == 0 || rec.len_B2 == 0) ++A.empty_middle;
        const Word& w1 = block.words[i].w;
        const Word Aw(w1.begin(), w1.begin() + rec.len_A);
        const Word Cw(w1.end() - rec.len_C, w1.end());
        rec.a = length_bucket(interval_length(d, Aw), G);
        rec.c = length_bucket(interval_length(d, Cw), G);
        ++A.buckets[{rec.a, rec.c}];
        A.H_empirical = std::max(A.H_empirical, std::ldexp(1.0, rec.a + rec.c) * static_cast<double>(ctx.n) * tau);
        A.records.push_back(std::move(rec));
      }
    }
  }
  A.bound_rhs = ptau_bound_rhs(tau, ctx.n, delta, eps);
  A.bound_ratio = static_cast<double>(A.pairs) / A.bound_rhs;
  return A;
}

}  // namespace schottky_spectral
