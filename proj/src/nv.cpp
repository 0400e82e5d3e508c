#include "qdm/nv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qdm/constants.hpp"

namespace qdm {

namespace {

using cd = std::complex<double>;

NVOrientationSet make_orientations() {
  const double s23 = std::sqrt(2.0 / 3.0);
  const double s13 = std::sqrt(1.0 / 3.0);
  return {Vec3{-s23, 0.0, s13}, Vec3{s23, 0.0, s13}, Vec3{0.0, s23, s13}, Vec3{0.0, -s23, s13}};
}

// Bilinear cross product (Eigen's complex cross conjugates its result).
Eigen::Vector3cd plain_cross(const Eigen::Vector3cd& x, const Eigen::Vector3cd& y) {
  return {x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]};
}

// Characteristic data of a Hermitian 3x3 after subtracting `shift` from the diagonal:
// trace, sum of principal 2x2 minors, determinant.
struct CharPoly {
  double trace;
  double minors;
  double det;
};

CharPoly char_poly(const Matrix3c& h, double shift) {
  const double a0 = h(0, 0).real() - shift;
  const double a1 = h(1, 1).real() - shift;
  const double a2 = h(2, 2).real() - shift;
  const cd h01 = h(0, 1);
  const cd h02 = h(0, 2);
  const cd h12 = h(1, 2);
  const double n01 = std::norm(h01);
  const double n02 = std::norm(h02);
  const double n12 = std::norm(h12);
  CharPoly cp{};
  cp.trace = a0 + a1 + a2;
  cp.minors = (a0 * a1 - n01) + (a0 * a2 - n02) + (a1 * a2 - n12);
  cp.det = a0 * a1 * a2 + 2.0 * (h01 * h12 * std::conj(h02)).real() - a0 * n12 - a1 * n02 -
           a2 * n01;
  return cp;
}

}  // namespace

const NVOrientationSet& nv_orientations() {
  static const NVOrientationSet set = make_orientations();
  return set;
}

const Vec3& nv_axis(int k) {
  if (k < 1 || k > kOrientationCount) {
    throw std::out_of_range("NV orientation index must be in 1..4, got " + std::to_string(k));
  }
  return nv_orientations()[static_cast<std::size_t>(k - 1)];
}

double projected_field(const Vec3& b, int k) { return b.dot(nv_axis(k)); }

ZfsVector ZfsVector::uniform(double value) {
  ZfsVector z;
  z.d.fill(value);
  return z;
}

bool ZfsVector::in_sanity_window() const {
  return std::all_of(d.begin(), d.end(), [](double v) { return v >= 2.6 && v <= 3.1; });
}

SpinFrame spin_frame(const Vec3& axis, const Vec3& reference) {
  const Vec3 e3 = axis.normalized();
  Vec3 e1 = reference - reference.dot(e3) * e3;
  if (e1.norm() < 1e-12) {
    throw std::invalid_argument("spin frame reference is parallel to the axis");
  }
  e1.normalize();
  return {e1, e3.cross(e1), e3};
}

SpinFrame spin_frame(const Vec3& axis) {
  const Vec3 e3 = axis.normalized();
  const Vec3 x = Vec3::UnitX();
  if ((x - x.dot(e3) * e3).norm() < 1e-12) {
    return spin_frame(e3, Vec3::UnitY());
  }
  return spin_frame(e3, x);
}

SpinFrame spin_frame(int k) { return spin_frame(nv_axis(k)); }

Matrix3c spin1_hamiltonian(const Vec3& b_tesla, double d_zfs_ghz, const SpinFrame& frame) {
  constexpr double gamma = PhysicalConstants::gamma;
  const double b1 = gamma * b_tesla.dot(frame.e1);
  const double b2 = gamma * b_tesla.dot(frame.e2);
  const double b3 = gamma * b_tesla.dot(frame.e3);
  const cd off = cd(b1, -b2) / std::numbers::sqrt2;

  Matrix3c h = Matrix3c::Zero();
  h(0, 0) = d_zfs_ghz + b3;
  h(2, 2) = d_zfs_ghz - b3;
  h(0, 1) = off;
  h(1, 2) = off;
  h(1, 0) = std::conj(off);
  h(2, 1) = std::conj(off);
  return h;
}

Matrix3c spin1_hamiltonian(const Vec3& b_tesla, double d_zfs_ghz, int k) {
  static const std::array<SpinFrame, kOrientationCount> frames = {spin_frame(1), spin_frame(2),
                                                                  spin_frame(3), spin_frame(4)};
  nv_axis(k);  // range check
  return spin1_hamiltonian(b_tesla, d_zfs_ghz, frames[static_cast<std::size_t>(k - 1)]);
}

std::array<double, 3> hermitian3_eigenvalues(const Matrix3c& h) {
  const double m = (h(0, 0).real() + h(1, 1).real() + h(2, 2).real()) / 3.0;
  const double b0 = h(0, 0).real() - m;
  const double b1 = h(1, 1).real() - m;
  const double b2 = h(2, 2).real() - m;
  const double p2 = (b0 * b0 + b1 * b1 + b2 * b2 +
                     2.0 * (std::norm(h(0, 1)) + std::norm(h(0, 2)) + std::norm(h(1, 2)))) /
                    6.0;
  if (!(p2 > 0.0)) {
    return {m, m, m};
  }
  const double p = std::sqrt(p2);
  const CharPoly centred = char_poly(h, m);
  const double r = centred.det / (2.0 * p * p2);

  const double phi = std::acos(std::clamp(r, -1.0, 1.0)) / 3.0;
  constexpr double third = 2.0 * std::numbers::pi / 3.0;
  std::array<double, 3> e = {m + 2.0 * p * std::cos(phi), m + 2.0 * p * std::cos(phi + third),
                             m + 2.0 * p * std::cos(phi + 2.0 * third)};
  std::sort(e.begin(), e.end());

  // The cubic's roots near a (near-)double root carry ~sqrt(eps) error. Keep the
  // isolated root, deflate along its eigenvector and take the close pair from the
  // 2x2 Hermitian block on the orthogonal complement.
  const bool low_pair = (e[1] - e[0]) <= (e[2] - e[1]);
  double iso = low_pair ? e[2] : e[0];
  Eigen::Vector3cd v = Eigen::Vector3cd::Zero();
  // Eigenvector from the best conditioned cross product of two rows of h - iso I;
  // its Rayleigh quotient then sharpens iso. Two passes.
  for (int pass = 0; pass < 2; ++pass) {
    Matrix3c a = h;
    for (int k = 0; k < 3; ++k) a(k, k) -= iso;
    double best = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3cd c =
          plain_cross(a.row(i).transpose(), a.row((i + 1) % 3).transpose());
      if (c.squaredNorm() > best) {
        best = c.squaredNorm();
        v = c;
      }
    }
    if (!(best > 0.0)) return e;
    v.normalize();
    iso = v.dot(h * v).real();
  }
  int k_min = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(v[k]) < std::abs(v[k_min])) k_min = k;
  }
  Eigen::Vector3cd u1 = -std::conj(v[k_min]) * v;
  u1[k_min] += 1.0;
  u1.normalize();
  const Eigen::Vector3cd u2 = plain_cross(v, u1).conjugate();
  const double m11 = u1.dot(h * u1).real();
  const double m22 = u2.dot(h * u2).real();
  const std::complex<double> m12 = u1.dot(h * u2);
  const double centre = 0.5 * (m11 + m22);
  const double half = std::hypot(0.5 * (m11 - m22), std::abs(m12));
  std::array<double, 3> refined = {centre - half, centre + half, iso};
  std::sort(refined.begin(), refined.end());
  return refined;
}

std::array<double, 2> resonance_pair(const Vec3& b_tesla, double d_zfs_ghz, int k) {
  const auto e = hermitian3_eigenvalues(spin1_hamiltonian(b_tesla, d_zfs_ghz, k));
  return {e[1] - e[0], e[2] - e[0]};
}

ResonanceSet resonance_frequencies(const Vec3& b_tesla, const ZfsVector& zfs) {
  ResonanceSet out{};
  for (int k = 1; k <= kOrientationCount; ++k) {
    const auto pair = resonance_pair(b_tesla, zfs.d[static_cast<std::size_t>(k - 1)], k);
    out[static_cast<std::size_t>(2 * (k - 1))] = pair[0];
    out[static_cast<std::size_t>(2 * (k - 1) + 1)] = pair[1];
  }
  return out;
}

}  // namespace qdm
