#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "schottky_spectral/error.hpp"

namespace schottky_spectral {

using BigInt = boost::multiprecision::cpp_int;
using cplx = std::complex<double>;

inline double to_double(const BigInt& x) { return x.convert_to<double>(); }

// 2x2 matrix with determinant one. Integer matrices keep exact entries through
// products and inverses; floating matrices carry doubles only. The double view
// is always available.
class Mat2 {
 public:
  Mat2() : exact_(true), ie_{1, 0, 0, 1}, de_{1, 0, 0, 1} {}

  static Mat2 integer(const BigInt& a, const BigInt& b, const BigInt& c, const BigInt& d) {
    Mat2 m;
    m.exact_ = true;
    m.ie_ = {a, b, c, d};
    m.sync();
    return m;
  }

  static Mat2 real(double a, double b, double c, double d) {
    Mat2 m;
    m.exact_ = false;
    m.de_ = {a, b, c, d};
    return m;
  }

  static Mat2 identity() { return integer(1, 0, 0, 1); }

  bool exact() const { return exact_; }
  double a() const { return de_[0]; }
  double b() const { return de_[1]; }
  double c() const { return de_[2]; }
  double d() const { return de_[3]; }
  const std::array<double, 4>& entries() const { return de_; }

  // Exact entries; only meaningful when exact() is true.
  const BigInt& ia() const { return ie_[0]; }
  const BigInt& ib() const { return ie_[1]; }
  const BigInt& ic() const { return ie_[2]; }
  const BigInt& id() const { return ie_[3]; }
  const std::array<BigInt, 4>& exact_entries() const { return ie_; }

  double det() const { return de_[0] * de_[3] - de_[1] * de_[2]; }
  BigInt exact_det() const { return ie_[0] * ie_[3] - ie_[1] * ie_[2]; }
  double trace() const { return de_[0] + de_[3]; }

  // Determinant one exactly for integer matrices, within tol otherwise.
  bool unimodular(double tol = 1e-12) const {
    if (exact_) return exact_det() == 1;
    return std::abs(det() - 1.0) <= tol;
  }

  Mat2 operator*(const Mat2& o) const {
    if (exact_ && o.exact_) {
      return integer(ie_[0] * o.ie_[0] + ie_[1] * o.ie_[2], ie_[0] * o.ie_[1] + ie_[1] * o.ie_[3],
                     ie_[2] * o.ie_[0] + ie_[3] * o.ie_[2], ie_[2] * o.ie_[1] + ie_[3] * o.ie_[3]);
    }
    return real(a() * o.a() + b() * o.c(), a() * o.b() + b() * o.d(), c() * o.a() + d() * o.c(),
                c() * o.b() + d() * o.d());
  }

  // Inverse of a determinant-one matrix: [[d,-b],[-c,a]].
  Mat2 inverse() const {
    if (exact_) return integer(ie_[3], -ie_[1], -ie_[2], ie_[0]);
    return real(d(), -b(), -c(), a());
  }

  Mat2 negated() const {
    if (exact_) return integer(-ie_[0], -ie_[1], -ie_[2], -ie_[3]);
    return real(-a(), -b(), -c(), -d());
  }

  bool operator==(const Mat2& o) const {
    if (exact_ && o.exact_) return ie_ == o.ie_;
    return de_ == o.de_;
  }

  // Squared Frobenius norm.
  double norm2() const { return a() * a() + b() * b() + c() * c() + d() * d(); }
  BigInt exact_norm2() const {
    return ie_[0] * ie_[0] + ie_[1] * ie_[1] + ie_[2] * ie_[2] + ie_[3] * ie_[3];
  }

  double max_abs_diff(const Mat2& o) const {
    double m = 0;
    for (int i = 0; i < 4; ++i) m = std::max(m, std::abs(de_[i] - o.de_[i]));
    return m;
  }

  std::string str() const {
    auto e = [&](int i) { return exact_ ? ie_[i].str() : std::to_string(de_[i]); };
    return "[[" + e(0) + "," + e(1) + "],[" + e(2) + "," + e(3) + "]]";
  }

 private:
  void sync() {
    for (int i = 0; i < 4; ++i) de_[i] = to_double(ie_[i]);
  }

  bool exact_ = true;
  std::array<BigInt, 4> ie_{1, 0, 0, 1};
  std::array<double, 4> de_{1, 0, 0, 1};
};

// Point of the extended complex plane with an explicit point at infinity.
struct ExtComplex {
  bool infinite = false;
  cplx z{0.0, 0.0};

  static ExtComplex inf() { return {true, {0.0, 0.0}}; }
  static ExtComplex at(cplx v) { return {false, v}; }
  bool operator==(const ExtComplex& o) const {
    return infinite == o.infinite && (infinite || z == o.z);
  }
};

struct Disk {
  double center = 0.0;
  double radius = 1.0;
  bool contains(cplx z) const { return std::abs(z - center) < radius; }
};

struct RInterval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

inline ExtComplex mobius_apply(const Mat2& m, const ExtComplex& p) {
  if (p.infinite) {
    if (m.c() == 0.0) return ExtComplex::inf();
    return ExtComplex::at(m.a() / m.c());
  }
  const cplx den = m.c() * p.z + m.d();
  if (den == cplx(0.0, 0.0)) return ExtComplex::inf();
  return ExtComplex::at((m.a() * p.z + m.b()) / den);
}

inline cplx mobius_apply(const Mat2& m, cplx z) {
  const ExtComplex r = mobius_apply(m, ExtComplex::at(z));
  if (r.infinite) throw Error(Errc::pole, "mobius_apply: point maps to infinity");
  return r.z;
}

// Evaluation as a/c - 1/(c(cz+d)) when c != 0, which keeps full relative
// accuracy for points far from the pole when the entries are large.
inline cplx mobius_apply_stable(const Mat2& m, cplx z) {
  if (m.c() == 0.0) return (m.a() * z + m.b()) / m.d();
  return m.a() / m.c() - 1.0 / (m.c() * (m.c() * z + m.d()));
}

inline cplx mobius_derivative(const Mat2& m, cplx z) {
  const cplx den = m.c() * z + m.d();
  if (den == cplx(0.0, 0.0)) throw Error(Errc::pole, "mobius_derivative: cz+d = 0");
  return 1.0 / (den * den);
}

// Preimage of infinity, -d/c, or the point at infinity for affine matrices.
inline ExtComplex pole_of_inverse(const Mat2& m) {
  if (m.c() == 0.0) return ExtComplex::inf();
  return ExtComplex::at(-m.d() / m.c());
}

inline Disk isometric_circle(const Mat2& m) {
  if (m.c() == 0.0) throw Error(Errc::affine_matrix, "isometric_circle: c = 0");
  return Disk{-m.d() / m.c(), 1.0 / std::abs(m.c())};
}

inline double translation_length(const Mat2& m) {
  const double t = std::abs(m.trace());
  if (m.exact()) {
    BigInt it = m.ia() + m.id();
    if (it < 0) it = -it;
    if (it <= 2) throw Error(Errc::non_hyperbolic, "translation_length: |tr| <= 2");
  } else if (t <= 2.0) {
    throw Error(Errc::non_hyperbolic, "translation_length: |tr| <= 2");
  }
  return 2.0 * std::acosh(t / 2.0);
}

}  // namespace schottky_spectral
