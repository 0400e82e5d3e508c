#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace qdm {

struct Uncertain {
  double value = 0.0;
  double sigma = 0.0;  // 1 sigma
};

struct SolenoidGeometry {
  Uncertain radius_a;  // meters
  Uncertain h0;        // meters, nearest loop to the NV layer
  Uncertain delta_h;   // meters, loop spacing
  int n_loops = 10;

  void validate() const;  // throws std::invalid_argument
};

// On-axis field of one circular loop, tesla.
double loop_field_on_axis(double a, double h, double current);

// Sum over loops at h0 + k delta_h, k = 0..n-1. sigma is the first-order
// propagation of the geometric uncertainties (partials times sigma, in quadrature).
Uncertain solenoid_field(const SolenoidGeometry& geom, double current);

// Relative accuracy of the current measurement.
inline constexpr double kCurrentRelativeSigma = 0.006;

struct CalibrationPoint {
  double current = 0.0;  // amperes
  double field = 0.0;    // tesla
};

struct CalibrationCurve {
  std::vector<CalibrationPoint> points;
  Uncertain fit_slope;       // T/A
  Uncertain fit_intercept;   // T
  double slope_ci_low = 0.0;   // 95% Student-t interval
  double slope_ci_high = 0.0;
  double residual_rms = 0.0;   // T
  Uncertain expected_slope;    // T/A, geometry and current terms in quadrature
  Uncertain ratio;             // fit / expected
  bool outside_band = false;   // |ratio - 1| > ratio.sigma
};

// Ordinary least squares of field on current. `expected` is the calculated slope
// with geometric sigma; the current term is added here. Throws
// std::invalid_argument for fewer than 3 points or a degenerate abscissa.
CalibrationCurve fit_calibration(std::span<const CalibrationPoint> points,
                                 Uncertain expected = {std::numeric_limits<double>::quiet_NaN(), 0.0});

// CSV with header current_mA,measured_field_uT.
std::vector<CalibrationPoint> read_calibration_csv(std::istream& is);
void write_calibration_csv(std::ostream& os, std::span<const CalibrationPoint> points);

}  // namespace qdm
