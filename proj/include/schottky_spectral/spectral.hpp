#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "schottky_spectral/congruence.hpp"
#include "schottky_spectral/error.hpp"
#include "schottky_spectral/schottky.hpp"
#include "schottky_spectral/transfer.hpp"

namespace schottky_spectral {

using AnalyticFn = std::function<cplx(cplx)>;

// Memoised evaluation; contours of neighbouring boxes share edges.
class CachedFn {
 public:
  explicit CachedFn(AnalyticFn f) : f_(std::move(f)) {}
  cplx operator()(cplx z) {
    const auto key = std::make_pair(z.real(), z.imag());
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const cplx v = f_(z);
    cache_.emplace(key, v);
    return v;
  }
  std::size_t evaluations() const { return cache_.size(); }

 private:
  AnalyticFn f_;
  std::map<std::pair<double, double>, cplx> cache_;
};

struct Circle {
  cplx c{0, 0};
  double R = 1;
};

struct Rect {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  cplx center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
  bool contains(cplx z) const { return z.real() > x0 && z.real() < x1 && z.imag() > y0 && z.imag() < y1; }
};

using Contour = std::variant<Circle, Rect>;

inline nlohmann::json contour_json(const Contour& c) {
  if (const auto* k = std::get_if<Circle>(&c))
    return {{"type", "disk"}, {"center", {k->c.real(), k->c.imag()}}, {"radius", k->R}};
  const auto& r = std::get<Rect>(c);
  return {{"type", "rectangle"}, {"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}};
}

// Point at parameter t in [0, 1] along the positively oriented contour.
inline cplx contour_point(const Contour& c, double t) {
  if (const auto* k = std::get_if<Circle>(&c)) return k->c + k->R * std::polar(1.0, 2 * M_PI * t);
  const auto& r = std::get<Rect>(c);
  const double u = 4 * t;
  if (u <= 1) return {r.x0 + u * r.width(), r.y0};
  if (u <= 2) return {r.x1, r.y0 + (u - 1) * r.height()};
  if (u <= 3) return {r.x1 - (u - 2) * r.width(), r.y1};
  return {r.x0, r.y1 - (u - 3) * r.height()};
}

struct ArgumentOptions {
  int nodes = 64;
  int max_depth = 24;
  double zero_tol = 0.0;  // |f| at or below this on the contour counts as a zero
};

// Winding number of f along the contour from phase increments each below pi/2,
// bisecting parameter intervals where an increment is too large.
template <class F>
inline int argument_count(F&& f, const Contour& c, const ArgumentOptions& opt = {}) {
  auto eval = [&](double t) {
    const cplx z = contour_point(c, t);
    const cplx v = f(z);
    if (!(std::abs(v) > opt.zero_tol) || !std::isfinite(std::abs(v)))
      throw Error(Errc::zero_on_contour, "argument_count: f vanishes on the contour at (" +
                                             std::to_string(z.real()) + "," + std::to_string(z.imag()) + ")");
    return v;
  };
  double total = 0;
  std::function<void(double, cplx, double, cplx, int)> seg = [&](double t0, cplx f0, double t1, cplx f1,
                                                                  int depth) {
    const double d = std::arg(f1 / f0);
    if (std::abs(d) < M_PI / 2) {
      total += d;
      return;
    }
    if (depth >= opt.max_depth) {
      const cplx z = contour_point(c, t0);
      throw Error(Errc::phase_step, "argument_count: phase step too large near (" + std::to_string(z.real()) +
                                        "," + std::to_string(z.imag()) + ")");
    }
    const double tm = (t0 + t1) / 2;
    const cplx fm = eval(tm);
    seg(t0, f0, tm, fm, depth + 1);
    seg(tm, fm, t1, f1, depth + 1);
  };
  // Rectangles get nodes on every corner.
  const int n = std::holds_alternative<Rect>(c) ? 4 * std::max(1, opt.nodes / 4) : opt.nodes;
  const cplx start = eval(0.0);
  cplx prev = start;
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const cplx cur = (i == n) ? start : eval(t);
    seg(static_cast<double>(i - 1) / n, prev, t, cur, 0);
    prev = cur;
  }
  return static_cast<int>(std::lround(total / (2 * M_PI)));
}

struct JensenResult {
  double value = 0;
  double radius = 0;
  int retries = 0;
};

struct JensenOptions {
  int nodes = 1024;
  int max_retries = 5;
  double jitter = 0.01;
  double zero_rel_tol = 1e-13;
  bool conjugate_symmetric = false;  // f(conj z) = conj f(z) and c real
};

// (1/2pi) int log|f(c + R e^{i theta})| d theta - log|f(c)| by the trapezoid
// rule; the radius is enlarged by 1% when a node lands on a zero.
template <class F>
inline JensenResult jensen_rhs(F&& f, cplx c, double R, const JensenOptions& opt = {}) {
  const cplx fc = f(c);
  JensenResult res;
  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    const double r = R * std::pow(1 + opt.jitter, attempt);
    const int Q = opt.nodes;
    double maxabs = std::abs(fc);
    std::vector<double> absv(Q);
    for (int q = 0; q < Q; ++q) {
      if (opt.conjugate_symmetric && q > Q / 2) {
        absv[q] = absv[Q - q];
        continue;
      }
      absv[q] = std::abs(f(c + r * std::polar(1.0, 2 * M_PI * q / Q)));
      maxabs = std::max(maxabs, absv[q]);
    }
    if (!(std::abs(fc) > opt.zero_rel_tol * maxabs))
      throw Error(Errc::zero_on_contour, "jensen_rhs: f vanishes at the centre");
    bool hit = false;
    double sum = 0;
    for (int q = 0; q < Q; ++q) {
      if (!(absv[q] > opt.zero_rel_tol * maxabs) || !std::isfinite(absv[q])) {
        hit = true;
        break;
      }
      sum += std::log(absv[q]);
    }
    if (hit) continue;
    res.value = sum / Q - std::log(std::abs(fc));
    res.radius = r;
    res.retries = attempt;
    return res;
  }
  throw Error(Errc::zero_on_contour, "jensen_rhs: zero on the contour after all retries");
}

struct ZeroInfo {
  cplx z{0, 0};
  int multiplicity = 1;
  double residual = 0;
  bool cluster = false;
};

struct ZeroReport {
  Contour region = Rect{};
  std::vector<ZeroInfo> zeros;
  int argument_principle = 0;
  double jensen_bound = NAN;  // only for disk regions
  std::size_t evaluations = 0;
  double tol = 0;

  int listed_multiplicity() const {
    int m = 0;
    for (const auto& z : zeros) m += z.multiplicity;
    return m;
  }
  nlohmann::json to_json() const {
    nlohmann::json zs = nlohmann::json::array();
    for (const auto& z : zeros)
      zs.push_back({{"re", z.z.real()},
                    {"im", z.z.imag()},
                    {"multiplicity", z.multiplicity},
                    {"residual", z.residual},
                    {"cluster", z.cluster}});
    nlohmann::json j = {{"region", contour_json(region)},
                        {"zeros", zs},
                        {"counts", {{"argument_principle", argument_principle}}},
                        {"method", {{"evaluations", evaluations}, {"tol", tol}}}};
    j["counts"]["jensen_bound"] = std::isfinite(jensen_bound) ? nlohmann::json(jensen_bound) : nlohmann::json();
    return j;
  }
};

struct FindOptions {
  double tol = 1e-10;
  double min_box = 1e-9;
  int edge_nodes = 32;
  int newton_iters = 60;
};

namespace detail {

// Newton iteration z <- z - k f/f' with a central-difference derivative.
template <class F>
inline std::optional<cplx> newton(F& f, cplx z, int k, const Rect& box, const FindOptions& opt) {
  const double scale = std::max(box.width(), box.height());
  double prev_step = INFINITY;
  for (int it = 0; it < opt.newton_iters; ++it) {
    const double h = 1e-6 * std::max(1.0, std::abs(z));
    const cplx fz = f(z);
    if (std::abs(fz) == 0.0) return z;
    const cplx df = (f(z + h) - f(z - h)) / (2 * h);
    if (std::abs(df) == 0.0) return std::nullopt;
    const cplx step = static_cast<double>(k) * fz / df;
    z -= step;
    if (!(std::abs(z - box.center()) < 2 * scale)) return std::nullopt;
    const double st = std::abs(step);
    if (st < opt.tol * std::max(1.0, std::abs(z))) return z;
    // Stagnation at the rounding floor of a multiple zero.
    if (it > 4 && st > 0.5 * prev_step && st < 1e-6 * std::max(1.0, scale)) return z;
    prev_step = st;
  }
  return std::nullopt;
}

}  // namespace detail

// Zeros of f in a rectangle by argument-principle quadrisection with
// off-centre splits, Newton refinement, and multiplicities from winding
// numbers of small boxes.
template <class F>
inline ZeroReport find_zeros(F&& fn, const Rect& region, const FindOptions& opt = {}) {
  CachedFn f([&](cplx z) { return fn(z); });
  ArgumentOptions aopt;
  aopt.nodes = opt.edge_nodes;
  ZeroReport rep;
  rep.region = region;
  rep.tol = opt.tol;
  rep.argument_principle = argument_count(f, region, aopt);
  static const double fr[] = {0.5 + 0.0317, 0.5 - 0.0411, 0.5 + 0.0723, 0.5 - 0.0929, 0.5 + 0.1171};
  std::function<void(const Rect&, int)> process = [&](const Rect& B, int k) {
    if (k <= 0) return;
    const double size = std::max(B.width(), B.height());
    const double scale = std::max(region.width(), region.height());
    if (k == 1 || size < 1e-3 * scale) {
      if (auto z = detail::newton(f, B.center(), k, B, opt); z && B.contains(*z)) {
        bool ok = (k == 1);
        if (!ok) {
          const double r = 0.5 * std::min({z->real() - B.x0, B.x1 - z->real(), z->imag() - B.y0, B.y1 - z->imag()});
          try {
            ok = r > 0 && argument_count(f, Circle{*z, r}, aopt) == k;
          } catch (const Error&) {
            ok = false;
          }
        }
        if (ok) {
          rep.zeros.push_back({*z, k, std::abs(f(*z)), false});
          return;
        }
      }
    }
    if (size < opt.min_box) {
      rep.zeros.push_back({B.center(), k, std::abs(f(B.center())), true});
      return;
    }
    for (int attempt = 0; attempt < 5; ++attempt) {
      const double xs = B.x0 + fr[attempt] * B.width();
      const double ys = B.y0 + fr[(attempt + 2) % 5] * B.height();
      const Rect sub[4] = {{B.x0, xs, B.y0, ys}, {xs, B.x1, B.y0, ys}, {B.x0, xs, ys, B.y1}, {xs, B.x1, ys, B.y1}};
      int cnt[4];
      int sum = 0;
      bool failed = false;
      for (int i = 0; i < 4 && !failed; ++i) {
        try {
          cnt[i] = argument_count(f, sub[i], aopt);
          sum += cnt[i];
        } catch (const Error& e) {
          if (e.code() != Errc::zero_on_contour && e.code() != Errc::phase_step) throw;
          failed = true;
        }
      }
      if (failed || sum != k) continue;
      for (int i = 0; i < 4; ++i) process(sub[i], cnt[i]);
      return;
    }
    rep.zeros.push_back({B.center(), k, std::abs(f(B.center())), true});
  };
  process(region, rep.argument_principle);
  std::sort(rep.zeros.begin(), rep.zeros.end(), [](const ZeroInfo& a, const ZeroInfo& b) {
    return a.z.real() > b.z.real() || (a.z.real() == b.z.real() && a.z.imag() < b.z.imag());
  });
  rep.evaluations = f.evaluations();
  return rep;
}

// Leading eigenvalue modulus by power iteration, with a dense eigensolver as
// fallback when the iteration does not settle.
inline double leading_eigenvalue(const CMatrix& A, bool* used_fallback = nullptr) {
  if (used_fallback) *used_fallback = false;
  CVector v = CVector::Ones(A.rows());
  v /= v.norm();
  double lam = 0;
  for (int it = 0; it < 5000; ++it) {
    CVector w = A * v;
    const double nw = w.norm();
    if (nw == 0) return 0;
    const double next = std::abs(v.dot(w));
    w /= nw;
    if (it > 10 && std::abs(next - lam) <= 1e-15 * next && (w - v * (v.dot(w) / std::abs(v.dot(w)))).norm() < 1e-10)
      return next;
    lam = next;
    v = w;
  }
  if (used_fallback) *used_fallback = true;
  Eigen::ComplexEigenSolver<CMatrix> es(A, false);
  double m = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) m = std::max(m, std::abs(es.eigenvalues()[i]));
  return m;
}

struct DeltaEstimate {
  double delta = 0;          // bisection on the leading eigenvalue
  double delta_det = 0;      // largest real zero of det(I - L_s)
  double eigen_residual = 0;  // |leading eigenvalue(delta) - 1|
  bool fallback = false;
  int M = 0;
};

// Bisection of a decreasing-through-zero function on [lo, hi] to width tol_s.
template <class F>
inline double bisect(F&& g, double lo, double hi, double tol_s) {
  double glo = g(lo);
  for (int it = 0; it < 200 && hi - lo > tol_s; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm > 0) == (glo > 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Zero of the leading eigenvalue minus one for the classical operator at
// cutoff M, by bisection on [0, 1] widened upward until bracketed.
inline double leading_eigenvalue_zero(const SchottkyData& d, int M, const AssembleOptions& opt = {},
                                      double tol_s = 1e-12) {
  auto lead = [&](double s) {
    return leading_eigenvalue(assemble_classical(d, s, RepDescriptor::trivial(), M, opt).mat) - 1;
  };
  double hi = 1;
  while (lead(hi) > 0) {
    hi *= 2;
    if (hi > 64) throw Error(Errc::no_convergence, "leading_eigenvalue_zero: no bracket");
  }
  return bisect(lead, 0, hi, tol_s);
}

struct BasisSelection {
  int M = 0;
  std::vector<std::pair<int, double>> history;  // (M, delta at M)
};

// Smallest cutoff in the ladder whose delta agrees with the next rung to tol.
inline BasisSelection select_basis_degree(const SchottkyData& d, double tol = 1e-8,
                                          const AssembleOptions& opt = {},
                                          const std::vector<int>& ladder = {16, 24, 32, 48, 64, 96, 128}) {
  BasisSelection sel;
  for (int M : ladder) {
    if (M > opt.max_basis) break;
    sel.history.emplace_back(M, leading_eigenvalue_zero(d, M, opt));
    const std::size_t k = sel.history.size();
    if (k >= 2 && std::abs(sel.history[k - 1].second - sel.history[k - 2].second) < tol) {
      sel.M = sel.history[k - 2].first;
      return sel;
    }
  }
  throw Error(Errc::no_convergence, "select_basis_degree: delta did not settle along the cutoff ladder");
}

// M <= 0 selects the cutoff with select_basis_degree.
inline DeltaEstimate estimate_delta(const SchottkyData& d, int M = 0, double tol = 1e-10,
                                    const AssembleOptions& opt = {}) {
  if (M <= 0) M = select_basis_degree(d, 1e-8, opt).M;
  DeltaEstimate res;
  res.M = M;
  bool fb = false;
  auto lead = [&](double s) {
    bool f = false;
    const double v = leading_eigenvalue(assemble_classical(d, s, RepDescriptor::trivial(), M, opt).mat, &f);
    fb = fb || f;
    return v - 1;
  };
  double lo = 0, hi = 1;
  if (!(lead(lo) > 0)) throw Error(Errc::no_convergence, "estimate_delta: leading eigenvalue at s=0 below 1");
  while (lead(hi) > 0) {
    hi *= 2;
    if (hi > 64) throw Error(Errc::no_convergence, "estimate_delta: no bracket");
  }
  res.delta = bisect(lead, lo, hi, 1e-15);
  res.eigen_residual = std::abs(lead(res.delta));
  res.fallback = fb;
  if (res.eigen_residual > tol)
    throw Error(Errc::no_convergence, "estimate_delta: eigenvalue residual above tolerance");
  auto det = [&](double s) {
    return fredholm_det(assemble_classical(d, s, RepDescriptor::trivial(), M, opt)).real();
  };
  // Scan down from s = hi + 1 until det changes sign, then bisect.
  double top = hi + 1, step = 0.05;
  double ftop = det(top);
  for (double s = top - step; s > -1; s -= step) {
    const double fs = det(s);
    if ((fs > 0) != (ftop > 0) || fs == 0) {
      res.delta_det = bisect(det, s, s + step, 1e-15);
      return res;
    }
    ftop = fs;
  }
  throw Error(Errc::no_convergence, "estimate_delta: no real zero of the determinant found");
}

struct GapParameters {
  double delta = 0, beta = 0, t = 0, ell = 0, r = 0, eps = 0, alpha = 0;
  nlohmann::json to_json() const {
    return {{"delta", delta}, {"beta", beta}, {"t", t}, {"ell", ell}, {"r", r}, {"eps", eps}, {"alpha", alpha}};
  }
};

inline double t_of_delta(double delta) { return delta / 6 + 2.0 / 3; }

inline GapParameters choose_alpha(double delta, double beta) {
  if (!(delta > 0.8 && delta <= 1)) throw Error(Errc::parameter_range, "choose_alpha: delta must lie in (4/5, 1]");
  GapParameters g;
  g.delta = delta;
  g.beta = beta;
  g.t = t_of_delta(delta);
  if (!(beta > g.t && beta <= delta)) throw Error(Errc::parameter_range, "choose_alpha: beta must lie in (t, delta]");
  g.ell = g.t + (beta - g.t) / 4;
  const double p = 4 - delta, q = -1.5 * (beta - g.t);
  g.r = (-p + std::sqrt(p * p - 4 * q)) / 2;
  g.eps = std::min(g.r, 1.0 / 15);
  g.alpha = (2 + g.eps) / (2 * g.ell - g.delta);
  if (!(g.eps > 0 && g.eps < 1) || !(g.alpha > 2 && g.alpha < 5))
    throw Error(Errc::parameter_range, "choose_alpha: derived parameters out of range");
  return g;
}

// Slacks of the three inequalities with beta1; each is >= 0 up to rounding
// when the inequality holds.
struct X2Slacks {
  double x21 = 0, x22 = 0, x23 = 0;
  bool holds(double rel = 1e-12) const {
    return x21 >= -rel && x22 >= -rel && x23 >= -rel;
  }
};

inline X2Slacks x2_slacks(const GapParameters& g, double beta1) {
  const double e = g.eps, a = g.alpha;
  X2Slacks s;
  s.x21 = ((1 - e) / (2 + e - 2 * beta1) - a) / a;
  s.x22 = (a - (1 + e) / (2 * beta1 - 1 - e)) / a;
  s.x23 = (a - (2 + e) / (2 * beta1 - g.delta)) / a;
  return s;
}

struct PipelineOptions {
  int M = 0;  // <= 0 selects the cutoff automatically
  double c_lo = 3, c_hi = 10, c_step = 0.5;
  std::vector<double> stability_taus{0.02, 0.05, 0.1};
  double stability_tol = 1e-6;
  double fallback_alpha = 3;
  double zero_box_halfheight = 0.25;
  JensenOptions jensen{};
  FindOptions find{};
  AssembleOptions assemble{};
};

struct PipelineZero {
  cplx s;
  int multiplicity = 1;
  double lambda = NAN;
  bool persistent = false;
  double max_shift = 0;
};

struct PipelineReport {
  long long n = 1;
  int M = 0;
  double delta = 0, delta_det = 0;
  double beta = 0, beta1 = 0;
  bool in_regime = false;
  std::optional<GapParameters> gap;
  std::optional<X2Slacks> slacks;
  double alpha = 0, tau = 0;
  std::size_t index = 1;
  std::size_t block_size = 0;
  double c = 0, c_smallest = NAN;
  double jensen_rhs_value = 0, jensen_radius = 0, target_radius = 0;
  double jensen_upper_bound = 0;
  int argument_count = 0;
  std::vector<PipelineZero> zeros;
  double lambda0 = NAN;
  Fraction threshold;
  std::vector<std::pair<double, std::vector<ZeroInfo>>> stability;
  bool tau_stable = true;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["M"] = M;
    j["delta"] = delta;
    j["delta_det"] = delta_det;
    j["beta"] = beta;
    j["beta1"] = beta1;
    j["in_regime"] = in_regime;
    j["gap_parameters"] = gap ? gap->to_json() : nlohmann::json();
    j["x2_slacks"] = slacks ? nlohmann::json{{"x2_1", slacks->x21}, {"x2_2", slacks->x22}, {"x2_3", slacks->x23}}
                            : nlohmann::json();
    j["alpha"] = alpha;
    j["tau"] = tau;
    j["index"] = index;
    j["block_size"] = block_size;
    j["c"] = c;
    j["c_smallest_pointwise_bound"] = std::isfinite(c_smallest) ? nlohmann::json(c_smallest) : nlohmann::json();
    j["jensen"] = {{"rhs", jensen_rhs_value},
                   {"radius", jensen_radius},
                   {"target_radius", target_radius},
                   {"upper_bound", jensen_upper_bound}};
    j["argument_count"] = argument_count;
    nlohmann::json zs = nlohmann::json::array();
    for (const auto& z : zeros) {
      nlohmann::json e = {{"re", z.s.real()},
                          {"im", z.s.imag()},
                          {"multiplicity", z.multiplicity},
                          {"persistent", z.persistent},
                          {"max_shift", z.max_shift}};
      e["lambda"] = std::isfinite(z.lambda) ? nlohmann::json(z.lambda) : nlohmann::json();
      zs.push_back(e);
    }
    j["zeros"] = zs;
    j["lambda0"] = std::isfinite(lambda0) ? nlohmann::json(lambda0) : nlohmann::json();
    j["new_eigenvalue_threshold"] = {{"num", threshold.num}, {"den", threshold.den}, {"value", threshold.value()}};
    nlohmann::json st = nlohmann::json::array();
    for (const auto& [tau_s, zl] : stability) {
      nlohmann::json zz = nlohmann::json::array();
      for (const auto& z : zl) zz.push_back({z.z.real(), z.z.imag(), z.multiplicity});
      st.push_back({{"tau", tau_s}, {"zeros", zz}});
    }
    j["stability"] = st;
    j["tau_stable"] = tau_stable;
    return j;
  }
};

// Zeros with Re s > 1/2 inside the rectangle, after dropping anything on the
// left of the line.
inline std::vector<ZeroInfo> zeros_right_of_half(const ZeroReport& r) {
  std::vector<ZeroInfo> out;
  for (const auto& z : r.zeros)
    if (z.z.real() > 0.5) out.push_back(z);
  return out;
}

inline PipelineReport multiplicity_pipeline(const SchottkyData& d, long long n, double beta,
                                            const PipelineOptions& opt = {}) {
  PipelineReport rep;
  rep.n = n;
  rep.beta = beta;
  if (!(beta > 0.5 && beta < 1)) throw Error(Errc::parameter_range, "pipeline: beta must lie in (1/2, 1)");
  const DeltaEstimate de = estimate_delta(d, opt.M, 1e-10, opt.assemble);
  const int M = de.M;
  rep.M = M;
  rep.delta = de.delta;
  rep.delta_det = de.delta_det;
  const double t = t_of_delta(rep.delta);
  rep.in_regime = rep.delta > 0.8 && rep.delta <= 1 && beta > t && beta <= rep.delta;
  if (rep.in_regime) {
    rep.gap = choose_alpha(rep.delta, beta);
    rep.alpha = rep.gap->alpha;
    rep.beta1 = rep.gap->ell;
    rep.slacks = x2_slacks(*rep.gap, rep.beta1);
  } else {
    rep.alpha = opt.fallback_alpha;
    rep.beta1 = (0.5 + beta) / 2;
  }
  rep.tau = std::pow(static_cast<double>(n), -rep.alpha);
  if (!(rep.tau < d.max_boundary_length()) || !(rep.tau < d.min_boundary_length()))
    throw Error(Errc::infeasible, "pipeline: tau_n = n^{-alpha} is not below min_a |I_a|");
  const CongruenceContext ctx = build_context(d, n);
  rep.index = ctx.index;
  rep.threshold = new_eig_threshold(n);
  const ZetaTauN zeta(d, ctx, rep.tau, M, opt.assemble);
  rep.block_size = zeta.block().words.size();

  // Pointwise bound -log|zeta(c)| <= tau [Gamma:Gamma_n] on the c-window.
  for (double c = opt.c_lo; c <= opt.c_hi + 1e-12; c += opt.c_step) {
    const double v = -std::log(std::abs(zeta(c)));
    if (v <= rep.tau * static_cast<double>(ctx.index)) {
      rep.c_smallest = c;
      break;
    }
  }
  rep.c = std::isfinite(rep.c_smallest) ? rep.c_smallest : opt.c_hi;

  JensenOptions jo = opt.jensen;
  jo.conjugate_symmetric = true;
  const JensenResult J = jensen_rhs(zeta, cplx(rep.c, 0), rep.c - rep.beta1, jo);
  rep.jensen_rhs_value = J.value;
  rep.jensen_radius = J.radius;
  rep.target_radius = rep.c - beta;
  // A zero count is nonnegative, so rounding below zero is clamped.
  rep.jensen_upper_bound = std::max(0.0, J.value / std::log(J.radius / rep.target_radius));
  ArgumentOptions ao;
  ao.nodes = 256;
  rep.argument_count = argument_count(zeta, Circle{cplx(rep.c, 0), rep.target_radius}, ao);

  const Rect box{0.5 + 1e-3, std::max(rep.delta, 0.5) + 0.1, -opt.zero_box_halfheight * 1.0137,
                 opt.zero_box_halfheight};
  const ZeroReport zr = find_zeros(zeta, box, opt.find);
  for (const auto& z : zeros_right_of_half(zr)) {
    PipelineZero pz;
    pz.s = z.z;
    pz.multiplicity = z.multiplicity;
    pz.lambda = (z.z * (1.0 - z.z)).real();
    pz.persistent = true;
    rep.zeros.push_back(pz);
  }
  for (double ts : opt.stability_taus) {
    if (!(ts < d.min_boundary_length())) continue;
    const ZetaTauN zt(d, ctx, ts, M, opt.assemble);
    const ZeroReport r = find_zeros(zt, box, opt.find);
    const auto zl = zeros_right_of_half(r);
    rep.stability.emplace_back(ts, zl);
    for (auto& pz : rep.zeros) {
      double best = INFINITY;
      for (const auto& z : zl) best = std::min(best, std::abs(z.z - pz.s));
      pz.max_shift = std::max(pz.max_shift, best);
      if (!(best <= opt.stability_tol)) pz.persistent = false;
    }
  }
  for (const auto& pz : rep.zeros) {
    if (!pz.persistent) rep.tau_stable = false;
    if (std::abs(pz.s.imag()) < 1e-8 && std::abs(pz.s.real() - rep.delta) < 1e-6) rep.lambda0 = pz.lambda;
  }
  return rep;
}

}  // namespace schottky_spectral
