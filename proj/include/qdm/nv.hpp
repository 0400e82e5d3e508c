#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace qdm {

using Vec3 = Eigen::Vector3d;
using Matrix3c = Eigen::Matrix3cd;

inline constexpr int kOrientationCount = 4;

// The four <111> NV axes in sensor coordinates (x, y in the sensing plane,
// z normal to it). All four share the same +z projection 1/sqrt(3).
using NVOrientationSet = std::array<Vec3, kOrientationCount>;

const NVOrientationSet& nv_orientations();

// Unit vector of orientation k, k in 1..4. Throws std::out_of_range otherwise.
const Vec3& nv_axis(int k);

// b . u_k (signed), in the units of b.
double projected_field(const Vec3& b, int k);

// Axial zero-field splitting per orientation, GHz.
struct ZfsVector {
  std::array<double, kOrientationCount> d{};

  static ZfsVector uniform(double value);
  bool in_sanity_window() const;  // every entry within [2.6, 3.1] GHz
};

// Right-handed spin frame for one NV: e3 along the NV axis, e1/e2 transverse.
struct SpinFrame {
  Vec3 e1;
  Vec3 e2;
  Vec3 e3;
};

// Fixed frame rule: e1 is x-hat projected orthogonal to the axis (y-hat when the
// axis is parallel to x-hat), e2 = axis x e1.
SpinFrame spin_frame(const Vec3& axis);
SpinFrame spin_frame(int k);
// Same construction with an arbitrary reference direction for e1.
SpinFrame spin_frame(const Vec3& axis, const Vec3& reference);

// H = d_zfs S3^2 + g mu_b S.b in the |+1>,|0>,|-1> basis of the given frame, GHz.
Matrix3c spin1_hamiltonian(const Vec3& b_tesla, double d_zfs_ghz, const SpinFrame& frame);
Matrix3c spin1_hamiltonian(const Vec3& b_tesla, double d_zfs_ghz, int k);

// Ascending eigenvalues of a 3x3 Hermitian matrix. Closed-form trigonometric
// roots of the characteristic cubic; the root farthest from the others is
// sharpened by a Rayleigh quotient and the remaining pair comes from the 2x2
// block on the orthogonal complement of its eigenvector.
std::array<double, 3> hermitian3_eigenvalues(const Matrix3c& h);

// Eight transition frequencies in GHz, ordered k = 1..4 with (dms = -1, dms = +1)
// per orientation: f(-1) = E1 - E0, f(+1) = E2 - E0.
using ResonanceSet = std::array<double, 2 * kOrientationCount>;

ResonanceSet resonance_frequencies(const Vec3& b_tesla, const ZfsVector& zfs);

// The (dms = -1, dms = +1) pair for one orientation.
std::array<double, 2> resonance_pair(const Vec3& b_tesla, double d_zfs_ghz, int k);

}  // namespace qdm
