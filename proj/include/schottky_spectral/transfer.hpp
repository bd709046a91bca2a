#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "json.hpp"
#include "schottky_spectral/congruence.hpp"
#include "schottky_spectral/error.hpp"
#include "schottky_spectral/moebius.hpp"
#include "schottky_spectral/schottky.hpp"

namespace schottky_spectral {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// exp(s Log z) with the principal logarithm; the cut (-inf, 0] is rejected.
inline cplx power_s(cplx z, cplx s) {
  if (z.imag() == 0.0 && z.real() <= 0.0) throw Error(Errc::branch_cut, "power_s: z on the branch cut");
  return std::exp(s * std::log(z));
}

// Bergman kernel of D(c, r): r^2 / (pi [r^2 - (w-c) conj(z-c)]^2).
inline cplx bergman_kernel(const Disk& D, cplx w, cplx z) {
  if (!D.contains(w) || !D.contains(z)) throw Error(Errc::outside_disk, "bergman_kernel: point outside disk");
  const double r2 = D.radius * D.radius;
  const cplx q = r2 - (w - D.center) * std::conj(z - D.center);
  return r2 / (M_PI * q * q);
}

// Orthonormal basis function phi_k(z) = sqrt((k+1)/pi) (z-c)^k / r^{k+1}.
inline cplx bergman_basis(const Disk& D, int k, cplx z) {
  return std::sqrt((k + 1) / M_PI) * std::pow((z - D.center) / D.radius, k) / D.radius;
}

enum class RepKind { trivial, regular };

struct RepDescriptor {
  RepKind kind = RepKind::trivial;
  const CongruenceContext* ctx = nullptr;

  static RepDescriptor trivial() { return {}; }
  static RepDescriptor regular(const CongruenceContext& c) { return {RepKind::regular, &c}; }
  int dimension() const { return kind == RepKind::trivial ? 1 : static_cast<int>(ctx->index); }
  std::string str() const {
    return kind == RepKind::trivial ? "trivial" : "regular mod " + std::to_string(ctx->n);
  }
};

// One summand c_w(z)^s sigma(gamma_{w'}^{-1}) f(gamma_{w'} z): functions on the
// source disk S(w) are pulled back to the target disk E(w).
struct Term {
  int source = 0;  // letter S(w)
  int target = 0;  // letter E(w)
  Mat2 g;          // gamma_{w'}
  Word gword;      // w', used for the coset action
};

// Single moves a != mirror(b): the operator indexed by two-letter words.
inline std::vector<Term> classical_terms(const SchottkyData& d) {
  std::vector<Term> t;
  for (int b = 1; b <= d.letters(); ++b)
    for (int a = 1; a <= d.letters(); ++a) {
      if (a == d.mirror(b)) continue;
      t.push_back({a, b, d.gen(a), Word{a}});
    }
  return t;
}

inline std::vector<Term> block_terms(const SchottkyData& d, const std::vector<Word>& words) {
  std::vector<Term> t;
  for (const Word& w : words) {
    if (w.size() < 2) throw Error(Errc::parameter_range, "general word sets need words of length >= 2");
    const Word wp = prime(w);
    t.push_back({w.front(), w.back(), gamma_of_word(d, wp), wp});
  }
  return t;
}

inline std::vector<Term> block_terms(const TauBlock& b) {
  std::vector<Term> t;
  for (const auto& bw : b.words) t.push_back({bw.w.front(), bw.w.back(), bw.gamma_prime, prime(bw.w)});
  return t;
}

inline std::size_t default_max_dim() {
  if (const char* v = std::getenv("SCHOTTKY_SPECTRAL_MAX_DIM")) {
    const long long x = std::atoll(v);
    if (x > 0) return static_cast<std::size_t>(x);
  }
  return 20000;
}

struct AssembleOptions {
  double rho = 0.75;  // relative sampling radius
  int quad_factor = 4;  // Q = quad_factor (M+1)
  int max_basis = 256;
  std::size_t max_dim = default_max_dim();
  int threads = 1;
};

struct TransferMatrix {
  CMatrix mat;
  int letters = 0;
  int M = 0;
  int rep_dim = 1;
  cplx s{0, 0};
  std::string rep;
  std::size_t words = 0;
  double rho = 0.75;
  int Q = 0;

  std::size_t index(int disk0, int k, int v) const {
    return (static_cast<std::size_t>(disk0) * (M + 1) + k) * rep_dim + v;
  }
  // Block of rows for target disk b and columns for source disk a.
  auto block(int target_letter, int source_letter) const {
    const Eigen::Index n = static_cast<Eigen::Index>(M + 1) * rep_dim;
    return mat.block((target_letter - 1) * n, (source_letter - 1) * n, n, n);
  }
  nlohmann::json metadata() const {
    return {{"letters", letters}, {"M", M},   {"rep", rep},         {"rep_dim", rep_dim},
            {"words", words},     {"rho", rho}, {"Q", Q},           {"s", {s.real(), s.imag()}},
            {"dimension", mat.rows()}};
  }
};

// Taylor coefficients of z -> c^s phi_{a,k}(g z) around the target centre,
// expressed in the orthonormal basis of the target disk: C(j, k).
inline CMatrix term_block(const SchottkyData& d, const Term& t, cplx s, int M, double rho, int Q,
                          const CMatrix& dft) {
  const Disk& src = d.disk(t.source);
  const Disk& dst = d.disk(t.target);
  CMatrix F(Q, M + 1);
  for (int q = 0; q < Q; ++q) {
    const cplx z = dst.center + rho * dst.radius * std::polar(1.0, 2 * M_PI * q / Q);
    const cplx gz = mobius_apply_stable(t.g, z);
    const cplx der = mobius_derivative(t.g, z);
    cplx ws;
    try {
      ws = power_s(der, s);
    } catch (const Error&) {
      throw Error(Errc::branch_cut, "branch cut hit for word " + word_str(t.gword) + " at z = (" +
                                        std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")");
    }
    const cplx u = (gz - src.center) / src.radius;
    cplx up = ws / src.radius;
    for (int k = 0; k <= M; ++k) {
      F(q, k) = std::sqrt((k + 1) / M_PI) * up;
      up *= u;
    }
  }
  return dft * F;
}

// Rows: target degree j; columns: sample q. Includes the rescaling from Taylor
// coefficients to orthonormal coefficients.
inline CMatrix dft_matrix(const Disk& dst, int M, double rho, int Q) {
  CMatrix E(M + 1, Q);
  for (int j = 0; j <= M; ++j) {
    const double scale = std::pow(rho, -j) * dst.radius / std::sqrt((j + 1) / M_PI) / Q;
    for (int q = 0; q < Q; ++q) E(j, q) = scale * std::polar(1.0, -2 * M_PI * j * q / Q);
  }
  return E;
}

inline TransferMatrix assemble(const SchottkyData& d, const std::vector<Term>& terms, cplx s,
                               const RepDescriptor& rep, int M, const AssembleOptions& opt = {}) {
  if (M < 4) throw Error(Errc::parameter_range, "assemble: M must be >= 4");
  if (M > opt.max_basis) throw Error(Errc::basis_overflow, "assemble: M beyond the configured maximum");
  TransferMatrix T;
  T.letters = d.letters();
  T.M = M;
  T.rep_dim = rep.dimension();
  T.s = s;
  T.rep = rep.str();
  T.words = terms.size();
  T.rho = opt.rho;
  T.Q = opt.quad_factor * (M + 1);
  const std::size_t dim = static_cast<std::size_t>(d.letters()) * (M + 1) * T.rep_dim;
  if (dim > opt.max_dim)
    throw Error(Errc::dimension_cap, "assemble: dimension " + std::to_string(dim) + " exceeds cap " +
                                         std::to_string(opt.max_dim));
  T.mat = CMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::vector<CMatrix> dft;
  for (int b = 1; b <= d.letters(); ++b) dft.push_back(dft_matrix(d.disk(b), M, opt.rho, T.Q));
  // Each worker owns a set of target disks, so rows never overlap and the
  // summation order within a row is fixed.
  auto work = [&](int b) {
    for (const Term& t : terms) {
      if (t.target != b) continue;
      const CMatrix C = term_block(d, t, s, M, opt.rho, T.Q, dft[b - 1]);
      for (int v = 0; v < T.rep_dim; ++v) {
        const int y = rep.kind == RepKind::trivial ? 0 : rep.ctx->act(v, t.gword);
        for (int j = 0; j <= M; ++j)
          for (int k = 0; k <= M; ++k)
            T.mat(static_cast<Eigen::Index>(T.index(b - 1, j, y)),
                  static_cast<Eigen::Index>(T.index(t.source - 1, k, v))) += C(j, k);
      }
    }
  };
  const int nt = std::max(1, std::min(opt.threads, d.letters()));
  if (nt == 1) {
    for (int b = 1; b <= d.letters(); ++b) work(b);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (int i = 0; i < nt; ++i)
      pool.emplace_back([&, i]() {
        try {
          for (int b = 1 + i; b <= d.letters(); b += nt) work(b);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  if (!T.mat.allFinite()) throw Error(Errc::overflow, "assemble: non-finite matrix entry");
  return T;
}

inline TransferMatrix assemble_classical(const SchottkyData& d, cplx s, const RepDescriptor& rep, int M,
                                         const AssembleOptions& opt = {}) {
  return assemble(d, classical_terms(d), s, rep, M, opt);
}

inline cplx det_I_minus(const CMatrix& A) {
  if (A.rows() == 0) return {1.0, 0.0};
  const CMatrix I = CMatrix::Identity(A.rows(), A.cols());
  const cplx v = (I - A).partialPivLu().determinant();
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    throw Error(Errc::overflow, "fredholm_det: non-finite determinant");
  return v;
}

inline cplx fredholm_det(const TransferMatrix& T) { return det_I_minus(T.mat); }

// det(I - L^2) computed as det(I - L) det(I + L).
inline cplx det_I_minus_square(const CMatrix& A) {
  if (A.rows() == 0) return {1.0, 0.0};
  const CMatrix I = CMatrix::Identity(A.rows(), A.cols());
  const cplx v = (I - A).partialPivLu().determinant() * (I + A).partialPivLu().determinant();
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    throw Error(Errc::overflow, "zeta_tau_n: non-finite determinant");
  return v;
}

// zeta_{tau,n}(s) = det(1 - L^2_{B(tau), s, sigma_n}) with the block built once.
class ZetaTauN {
 public:
  ZetaTauN(const SchottkyData& d, const CongruenceContext& ctx, double tau, int M, AssembleOptions opt = {})
      : d_(d), ctx_(ctx), block_(build_tau_block(d, tau)), terms_(block_terms(block_)), M_(M), opt_(opt) {}

  TransferMatrix matrix(cplx s) const { return assemble(d_, terms_, s, rep(), M_, opt_); }
  cplx operator()(cplx s) const { return det_I_minus_square(matrix(s).mat); }
  cplx det_first(cplx s) const { return fredholm_det(matrix(s)); }
  RepDescriptor rep() const { return ctx_.n == 1 ? RepDescriptor::trivial() : RepDescriptor::regular(ctx_); }
  const TauBlock& block() const { return block_; }
  const std::vector<Term>& terms() const { return terms_; }
  int M() const { return M_; }
  std::size_t dimension() const { return static_cast<std::size_t>(d_.letters()) * (M_ + 1) * rep().dimension(); }

 private:
  const SchottkyData& d_;
  const CongruenceContext& ctx_;
  TauBlock block_;
  std::vector<Term> terms_;
  int M_;
  AssembleOptions opt_;
};

inline cplx zeta_tau_n(const SchottkyData& d, const CongruenceContext& ctx, double tau, cplx s, int M,
                       const AssembleOptions& opt = {}) {
  return ZetaTauN(d, ctx, tau, M, opt)(s);
}

// Nodes and weights of Gauss-Legendre quadrature on [0, 1].
template <int NPts>
inline std::pair<std::vector<double>, std::vector<double>> gauss_unit() {
  using G = boost::math::quadrature::gauss<double, NPts>;
  std::vector<double> x, w;
  const auto& ab = G::abscissa();
  const auto& wt = G::weights();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    if (ab[i] == 0.0) {
      x.push_back(0.5);
      w.push_back(wt[i] / 2);
      continue;
    }
    x.push_back(0.5 * (1 - ab[i]));
    w.push_back(wt[i] / 2);
    x.push_back(0.5 * (1 + ab[i]));
    w.push_back(wt[i] / 2);
  }
  return {x, w};
}

// Integral over a disk by a polar tensor rule: Gauss-Legendre in the radius
// (with the Jacobian rho) and the trapezoid rule in the angle.
struct DiskRule {
  std::vector<cplx> z;
  std::vector<double> w;
};

template <int NR>
inline DiskRule disk_rule(const Disk& D, int ntheta) {
  const auto [x, wx] = gauss_unit<NR>();
  DiskRule r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double rr = x[i] * D.radius;
    for (int k = 0; k < ntheta; ++k) {
      r.z.push_back(D.center + rr * std::polar(1.0, 2 * M_PI * (k + 0.5) / ntheta));
      r.w.push_back(wx[i] * D.radius * rr * 2 * M_PI / ntheta);
    }
  }
  return r;
}

struct HSNorm {
  double method_a = 0;  // double-integral formula
  double method_b = 0;  // Frobenius norm of the assembled matrix
  double quadrature_error = 0;
  std::size_t pairs = 0;
};

// Squared HS norm by the pair formula with the given disk rules.
inline double hs_formula_squared(const SchottkyData& d, const CongruenceContext& ctx, const TauBlock& block, cplx s,
                                 const std::vector<DiskRule>& rules, std::size_t* pairs = nullptr) {
  const std::size_t nw = block.words.size();
  std::vector<Mat2> gam(nw);
  for (std::size_t i = 0; i < nw; ++i) gam[i] = block.words[i].gamma_prime * d.gen(block.words[i].w.back());
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < nw; ++i) groups[{block.words[i].w.front(), block.words[i].w.back()}].push_back(i);
  double total = 0;
  std::size_t np = 0;
  for (const auto& [key, idx] : groups) {
    const auto [a, b] = key;
    const DiskRule& R = rules[b - 1];
    const Disk& Da = d.disk(a);
    const std::size_t nq = R.z.size();
    std::vector<std::vector<cplx>> cs(idx.size(), std::vector<cplx>(nq));
    std::vector<std::vector<cplx>> gz(idx.size(), std::vector<cplx>(nq));
    for (std::size_t p = 0; p < idx.size(); ++p) {
      const Mat2& g = block.words[idx[p]].gamma_prime;
      for (std::size_t q = 0; q < nq; ++q) {
        cs[p][q] = power_s(mobius_derivative(g, R.z[q]), s);
        gz[p][q] = mobius_apply_stable(g, R.z[q]);
      }
    }
    for (std::size_t p1 = 0; p1 < idx.size(); ++p1)
      for (std::size_t p2 = 0; p2 < idx.size(); ++p2) {
        const std::size_t i = idx[p1], j = idx[p2];
        if (ctx.n > 1) {
          if (ctx.image_index(block.words[i].w) != ctx.image_index(block.words[j].w)) continue;
          if (!in_gamma_n(ctx, gam[j] * gam[i].inverse())) continue;
        }
        const double tr = static_cast<double>(ctx.index);
        cplx acc = 0;
        for (std::size_t q = 0; q < nq; ++q)
          acc += R.w[q] * cs[p1][q] * std::conj(cs[p2][q]) * bergman_kernel(Da, gz[p1][q], gz[p2][q]);
        total += tr * acc.real();
        ++np;
      }
  }
  if (pairs) *pairs = np;
  return total;
}

// Both evaluations of the Hilbert-Schmidt norm of L_{B(tau), s, sigma_n}.
inline HSNorm hs_norm(const SchottkyData& d, const CongruenceContext& ctx, double tau, cplx s, int M,
                      const AssembleOptions& opt = {}) {
  const ZetaTauN z(d, ctx, tau, M, opt);
  HSNorm h;
  h.method_b = z.matrix(s).mat.norm();
  std::vector<DiskRule> coarse, fine;
  for (int b = 1; b <= d.letters(); ++b) {
    coarse.push_back(disk_rule<20>(d.disk(b), 48));
    fine.push_back(disk_rule<30>(d.disk(b), 72));
  }
  const double a1 = hs_formula_squared(d, ctx, z.block(), s, coarse);
  const double a2 = hs_formula_squared(d, ctx, z.block(), s, fine, &h.pairs);
  h.quadrature_error = std::abs(a2 - a1) / std::max(std::abs(a2), 1e-300);
  if (h.quadrature_error > 1e-6)
    throw Error(Errc::quadrature, "hs_norm: quadrature not converged, relative change " +
                                      std::to_string(h.quadrature_error));
  h.method_a = std::sqrt(std::max(a2, 0.0));
  return h;
}

// Primitive conjugacy classes: Lyndon representatives of cyclically reduced
// words, with a class and its inverse counted separately.
struct GeodesicClass {
  Word word;
  double length = 0;
};

inline bool is_lyndon(const Word& w) {
  const std::size_t n = w.size();
  for (std::size_t r = 1; r < n; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const int x = w[(i + r) % n], y = w[i];
      if (x < y) return false;
      if (x > y) break;
      if (i + 1 == n) return false;  // equal rotation: a proper power
    }
  }
  return true;
}

// Canonical representative of the cyclic class of w (least rotation).
inline Word least_rotation(const Word& w) {
  Word best = w;
  for (std::size_t r = 1; r < w.size(); ++r) {
    Word x(w.begin() + r, w.end());
    x.insert(x.end(), w.begin(), w.begin() + r);
    best = std::min(best, x);
  }
  return best;
}

struct EnumerationStats {
  std::size_t nodes = 0;
};

// All primitive classes with translation length <= cutoff. The search over
// prefixes u is pruned with l(gamma_v) >= log(|I_{S(u)}|/|I_u|) - log K for
// every closed word v extending u, where K = ((L_Gamma + g)/g)^2 and g is the
// smallest gap between disks.
inline std::vector<GeodesicClass> primitive_classes(const SchottkyData& d, double cutoff,
                                                    EnumerationStats* stats = nullptr) {
  const double g = d.min_gap();
  const double logK = 2 * std::log((d.max_boundary_length() + g) / g);
  std::vector<GeodesicClass> out;
  EnumerationStats st;
  Word u;
  std::function<void(const Mat2&)> rec = [&](const Mat2& gp) {
    ++st.nodes;
    const int last = u.back();
    const Mat2 gu = gp * d.gen(last);
    const double Lu = image_length(gp, d.base_interval(last));
    if (std::log(2 * d.disk(u.front()).radius / Lu) - logK > cutoff) return;
    if (last != d.mirror(u.front()) && std::abs(gu.trace()) > 2) {
      const double ell = 2 * std::acosh(std::abs(gu.trace()) / 2);
      if (ell <= cutoff && is_lyndon(u)) out.push_back({u, ell});
    }
    for (int x = 1; x <= d.letters(); ++x) {
      if (x == d.mirror(last)) continue;
      if (x < u.front()) continue;  // Lyndon words start with their least letter
      u.push_back(x);
      rec(gu);
      u.pop_back();
    }
  };
  for (int a = 1; a <= d.letters(); ++a) {
    u = {a};
    rec(Mat2::identity());
  }
  if (stats) *stats = st;
  std::sort(out.begin(), out.end(), [](const GeodesicClass& x, const GeodesicClass& y) {
    return x.length < y.length || (x.length == y.length && x.word < y.word);
  });
  return out;
}

struct EulerProduct {
  cplx value{1, 0};
  std::size_t classes = 0;
  bool few_classes_warning = false;
};

inline EulerProduct euler_product(const std::vector<GeodesicClass>& classes, cplx s) {
  EulerProduct e;
  e.classes = classes.size();
  e.few_classes_warning = classes.size() < 10;
  for (const auto& c : classes) {
    for (int k = 0;; ++k) {
      const cplx q = std::exp(-(s + static_cast<double>(k)) * c.length);
      if (std::abs(q) < 1e-16) break;
      e.value *= 1.0 - q;
    }
  }
  return e;
}

// Selberg zeta by its Euler product over primitive classes of length <= cutoff.
// delta_hint, when finite, enforces Re s > delta_hint + margin.
inline EulerProduct selberg_zeta_euler(const SchottkyData& d, cplx s, double cutoff, double delta_hint = NAN,
                                       double margin = 0.3) {
  if (std::isfinite(delta_hint) && !(s.real() > delta_hint + margin))
    throw Error(Errc::parameter_range, "selberg_zeta_euler: Re s must exceed delta + margin");
  return euler_product(primitive_classes(d, cutoff), s);
}

}  // namespace schottky_spectral
