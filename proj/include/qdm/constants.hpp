#pragma once

#include <numbers>

namespace qdm {

// Internal units: frequencies in GHz, fields in tesla, lengths in meters.
struct PhysicalConstants {
  static constexpr double f_zfs = 2.87;          // GHz
  static constexpr double g = 2.003;             // electron Lande factor
  static constexpr double mu_b = 13.996;         // GHz/T
  static constexpr double d_hf_14n = 2.16;       // MHz
  static constexpr double d_hf_15n = 3.03;       // MHz
  static constexpr double temp_coeff = -74.2;    // kHz/K, ZFS thermal shift
  static constexpr double mu0 = 4.0e-7 * std::numbers::pi;  // T m/A

  // Zeeman slope g*mu_b, GHz per tesla (28.034 kHz/uT).
  static constexpr double gamma = g * mu_b;
};

inline constexpr double kMHzPerGHz = 1.0e3;
inline constexpr double kGHzPerMHz = 1.0e-3;

}  // namespace qdm
