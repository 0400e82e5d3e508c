#include "qdm/calibration.hpp"

#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "qdm/constants.hpp"
#include "qdm/error.hpp"

namespace qdm {

void SolenoidGeometry::validate() const {
  if (!(radius_a.value > 0.0) || !(h0.value > 0.0) || !(delta_h.value > 0.0)) {
    throw std::invalid_argument("solenoid lengths must be > 0");
  }
  if (radius_a.sigma < 0.0 || h0.sigma < 0.0 || delta_h.sigma < 0.0) {
    throw std::invalid_argument("solenoid uncertainties must be >= 0");
  }
  if (n_loops < 1) throw std::invalid_argument("solenoid needs at least one loop");
}

double loop_field_on_axis(double a, double h, double current) {
  const double r2 = a * a + h * h;
  return PhysicalConstants::mu0 / (4.0 * std::numbers::pi) * 2.0 * std::numbers::pi * a * a *
         current / (r2 * std::sqrt(r2));
}

Uncertain solenoid_field(const SolenoidGeometry& geom, double current) {
  geom.validate();
  const double a = geom.radius_a.value;
  double b = 0.0;
  double d_a = 0.0;
  double d_h0 = 0.0;
  double d_dh = 0.0;
  for (int k = 0; k < geom.n_loops; ++k) {
    const double h = geom.h0.value + k * geom.delta_h.value;
    const double bl = loop_field_on_axis(a, h, current);
    const double r2 = a * a + h * h;
    b += bl;
    // dB/da = B (2/a - 3a/r2), dB/dh = -3 h B / r2
    d_a += bl * (2.0 / a - 3.0 * a / r2);
    const double dh = -3.0 * h * bl / r2;
    d_h0 += dh;
    d_dh += k * dh;
  }
  const double sa = d_a * geom.radius_a.sigma;
  const double sh = d_h0 * geom.h0.sigma;
  const double sd = d_dh * geom.delta_h.sigma;
  return {b, std::sqrt(sa * sa + sh * sh + sd * sd)};
}

CalibrationCurve fit_calibration(std::span<const CalibrationPoint> points, Uncertain expected) {
  if (points.size() < 3) throw std::invalid_argument("calibration fit needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.current;
    my += p.field;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.current - mx) * (p.current - mx);
    sxy += (p.current - mx) * (p.field - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("calibration currents are all equal");

  CalibrationCurve c;
  c.points.assign(points.begin(), points.end());
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  for (const auto& p : points) {
    const double r = p.field - (intercept + slope * p.current);
    ss += r * r;
  }
  const double dof = n - 2.0;
  const double s2 = ss / dof;
  c.fit_slope = {slope, std::sqrt(s2 / sxx)};
  c.fit_intercept = {intercept, std::sqrt(s2 * (1.0 / n + mx * mx / sxx))};
  c.residual_rms = std::sqrt(ss / n);
  const boost::math::students_t t(dof);
  const double tq = boost::math::quantile(boost::math::complement(t, 0.025));
  c.slope_ci_low = slope - tq * c.fit_slope.sigma;
  c.slope_ci_high = slope + tq * c.fit_slope.sigma;

  if (std::isfinite(expected.value) && expected.value != 0.0) {
    const double cur = kCurrentRelativeSigma * std::abs(expected.value);
    c.expected_slope = {expected.value, std::sqrt(expected.sigma * expected.sigma + cur * cur)};
    const double ratio = slope / expected.value;
    const double rs = c.fit_slope.sigma / slope;
    const double re = c.expected_slope.sigma / expected.value;
    c.ratio = {ratio, std::abs(ratio) * std::sqrt(rs * rs + re * re)};
    c.outside_band = std::abs(ratio - 1.0) > c.ratio.sigma;
  } else {
    c.expected_slope = expected;
    c.ratio = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  }
  return c;
}

std::vector<CalibrationPoint> read_calibration_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("calibration CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "current_mA,measured_field_uT") {
    throw FormatError("calibration CSV header must be 'current_mA,measured_field_uT', got '" +
                      line + "'");
  }
  std::vector<CalibrationPoint> pts;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b)) {
      throw FormatError("calibration CSV row " + std::to_string(row) + " needs two columns");
    }
    try {
      std::size_t ia = 0, ib = 0;
      const double i_ma = std::stod(a, &ia);
      const double b_ut = std::stod(b, &ib);
      if (ia != a.size() || ib != b.size()) throw std::invalid_argument("trailing text");
      pts.push_back({i_ma * 1e-3, b_ut * 1e-6});
    } catch (const std::exception&) {
      throw FormatError("calibration CSV row " + std::to_string(row) + " is not numeric");
    }
  }
  return pts;
}

void write_calibration_csv(std::ostream& os, std::span<const CalibrationPoint> points) {
  os << "current_mA,measured_field_uT\n" << std::setprecision(17);
  for (const auto& p : points) os << p.current * 1e3 << ',' << p.field * 1e6 << '\n';
}

}  // namespace qdm
