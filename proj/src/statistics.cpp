#include "qdm/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qdm {

Decomposition bias_reversal_decompose(const FieldMap& map_plus, const FieldMap& map_minus,
                                      std::span<const std::uint8_t> source_free) {
  map_plus.validate();
  map_minus.validate();
  if (map_plus.m != map_minus.m || map_plus.n != map_minus.n ||
      map_plus.components != map_minus.components) {
    throw std::invalid_argument("bias-reversal maps differ in shape");
  }
  if (!source_free.empty() && source_free.size() != map_plus.pixels()) {
    throw std::invalid_argument("source-free mask does not match the map size");
  }
  Decomposition d;
  d.remanent = FieldMap::zeros(map_plus.m, map_plus.n, map_plus.components, map_plus.pixel_pitch);
  d.induced = d.remanent;
  for (std::size_t p = 0; p < map_plus.data.size(); ++p) {
    d.remanent.data[p] = (map_plus.data[p] + map_minus.data[p]) / 2.0;
    d.induced.data[p] = (map_plus.data[p] - map_minus.data[p]) / 2.0;
  }
  for (int i = 0; i < map_plus.m; ++i) {
    for (int j = 0; j < map_plus.n; ++j) {
      if (map_plus.masked(i, j) || map_minus.masked(i, j)) {
        d.remanent.set_masked(i, j);
        d.induced.set_masked(i, j);
      }
    }
  }
  if (!source_free.empty()) {
    d.residual_bias.assign(static_cast<std::size_t>(map_plus.components), 0.0);
    std::size_t count = 0;
    for (int i = 0; i < map_plus.m; ++i) {
      for (int j = 0; j < map_plus.n; ++j) {
        if (source_free[static_cast<std::size_t>(i) * map_plus.n + j] == 0 ||
            d.remanent.masked(i, j)) {
          continue;
        }
        ++count;
        for (int c = 0; c < map_plus.components; ++c) d.residual_bias[c] += d.remanent.at(c, i, j);
      }
    }
    if (count == 0) throw std::invalid_argument("source-free region selects no unmasked pixels");
    for (double& b : d.residual_bias) b /= static_cast<double>(count);
  }
  return d;
}

double noise_floor(const FieldMap& map, std::span<const std::uint8_t> source_free, int component) {
  map.validate();
  if (component < 0 || component >= map.components) {
    throw std::invalid_argument("field component out of range");
  }
  if (!source_free.empty() && source_free.size() != map.pixels()) {
    throw std::invalid_argument("source-free mask does not match the map size");
  }
  std::vector<double> v;
  for (int i = 0; i < map.m; ++i) {
    for (int j = 0; j < map.n; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * map.n + j;
      if ((source_free.empty() || source_free[p] != 0) && !map.masked(i, j)) {
        v.push_back(map.at(component, i, j));
      }
    }
  }
  if (v.size() < 100) {
    throw std::invalid_argument("noise floor needs at least 100 pixels, got " +
                                std::to_string(v.size()));
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

SensitivityFit sensitivity_scaling(std::span<const std::pair<double, double>> series,
                                   double area_m2) {
  if (series.size() < 4) throw std::invalid_argument("sensitivity scaling needs >= 4 points");
  if (!(area_m2 > 0.0)) throw std::invalid_argument("normalization area must be > 0");
  double t_min = series.front().first;
  double t_max = series.front().first;
  for (const auto& [t, s] : series) {
    if (!(t > 0.0) || !(s > 0.0)) {
      throw std::invalid_argument("averaging times and noise floors must be > 0");
    }
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
  }
  if (t_max < 10.0 * t_min) {
    throw std::invalid_argument("averaging times must span at least one decade");
  }
  const double n = static_cast<double>(series.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [t, s] : series) {
    sx += std::log(t);
    sy += std::log(s);
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [t, s] : series) {
    const double dx = std::log(t) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(s) - my);
  }
  SensitivityFit fit;
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  fit.longest_time = t_max;
  double noise_at_max = 0.0;
  for (const auto& [t, s] : series) {
    if (t == t_max) noise_at_max = s;
  }
  fit.sensitivity = noise_at_max * std::sqrt(t_max) * std::sqrt(area_m2);
  return fit;
}

}  // namespace qdm
