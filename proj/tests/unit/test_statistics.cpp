#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qdm/statistics.hpp"

using namespace qdm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FieldMap gaussian_map(int m, int n, double sigma, double mean, unsigned seed) {
  FieldMap f = FieldMap::zeros(m, n, 1, 1e-6);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, sigma);
  for (double& v : f.data) v = g(rng);
  return f;
}

}  // namespace

TEST_CASE("bias-reversal decomposition is complete", "[statistics]") {
  const FieldMap p = gaussian_map(10, 12, 1e-6, 0.0, 1);
  const FieldMap q = gaussian_map(10, 12, 1e-6, 0.0, 2);
  const Decomposition d = bias_reversal_decompose(p, q);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    CHECK_THAT(d.remanent.data[i] + d.induced.data[i], WithinAbs(p.data[i], 1e-21));
    CHECK_THAT(d.remanent.data[i] - d.induced.data[i], WithinAbs(q.data[i], 1e-21));
  }
  CHECK(d.residual_bias.empty());
}

TEST_CASE("pure induced and pure remanent sources separate", "[statistics]") {
  const FieldMap r = gaussian_map(8, 8, 1e-6, 0.0, 3);
  const FieldMap ind = gaussian_map(8, 8, 1e-6, 0.0, 4);
  FieldMap plus = r;
  FieldMap minus = r;
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    plus.data[i] = r.data[i] + ind.data[i];
    minus.data[i] = r.data[i] - ind.data[i];
  }
  const Decomposition d = bias_reversal_decompose(plus, minus);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    CHECK_THAT(d.remanent.data[i], WithinAbs(r.data[i], 1e-20));
    CHECK_THAT(d.induced.data[i], WithinAbs(ind.data[i], 1e-20));
  }
  const Decomposition same = bias_reversal_decompose(r, r);
  for (double v : same.induced.data) CHECK(v == 0.0);
}

TEST_CASE("decomposition masks and residual bias", "[statistics]") {
  FieldMap p = FieldMap::zeros(4, 4, 1, 1e-6);
  FieldMap q = p;
  for (double& v : p.data) v = 3.0;
  for (double& v : q.data) v = 1.0;
  p.set_masked(0, 0);
  q.set_masked(3, 3);
  std::vector<std::uint8_t> region(16, 1);
  const Decomposition d = bias_reversal_decompose(p, q, region);
  CHECK(d.remanent.masked(0, 0));
  CHECK(d.induced.masked(3, 3));
  CHECK(d.remanent.masked_count() == 2);
  REQUIRE(d.residual_bias.size() == 1);
  CHECK(d.residual_bias[0] == 2.0);
  std::vector<std::uint8_t> only_masked(16, 0);
  only_masked[0] = 1;
  CHECK_THROWS_AS(bias_reversal_decompose(p, q, only_masked), std::invalid_argument);
  CHECK_THROWS_AS(bias_reversal_decompose(p, FieldMap::zeros(4, 5, 1, 1e-6)), std::invalid_argument);
}

TEST_CASE("noise floor", "[statistics]") {
  CHECK(noise_floor(FieldMap::zeros(20, 20, 1, 1e-6), {}) == 0.0);
  FieldMap c = FieldMap::zeros(20, 20, 1, 1e-6);
  for (double& v : c.data) v = 4.2e-6;
  CHECK_THAT(noise_floor(c, {}), WithinAbs(0.0, 1e-20));
  const FieldMap g = gaussian_map(100, 100, 20e-9, 5e-6, 7);
  CHECK_THAT(noise_floor(g, {}), WithinRel(20e-9, 0.05));
  std::vector<std::uint8_t> small(10000, 0);
  for (int i = 0; i < 99; ++i) small[i] = 1;
  CHECK_THROWS_AS(noise_floor(g, small), std::invalid_argument);
  small[99] = 1;
  CHECK_NOTHROW(noise_floor(g, small));
}

TEST_CASE("sensitivity scaling", "[statistics]") {
  std::vector<std::pair<double, double>> series;
  for (double t : {0.1, 0.3, 1.0, 3.0, 10.0}) series.emplace_back(t, 2e-7 / std::sqrt(t));
  const SensitivityFit fit = sensitivity_scaling(series, 1e-12);
  CHECK_THAT(fit.exponent, WithinAbs(-0.5, 1e-12));
  CHECK_THAT(fit.prefactor, WithinRel(2e-7, 1e-12));
  CHECK(fit.longest_time == 10.0);
  CHECK_THAT(fit.sensitivity, WithinRel(2e-7 * 1e-6, 1e-12));

  // 20 nT after 100 s over a 1.2 um pixel.
  std::vector<std::pair<double, double>> s20;
  for (double t : {1.0, 10.0, 30.0, 100.0}) s20.emplace_back(t, 20e-9 * std::sqrt(100.0 / t));
  const SensitivityFit f20 = sensitivity_scaling(s20, 1.2e-6 * 1.2e-6);
  CHECK_THAT(f20.sensitivity, WithinRel(20e-9 * 10.0 * 1.2e-6, 1e-12));

  CHECK_THROWS_AS(sensitivity_scaling(std::span(series).first(3), 1.0), std::invalid_argument);
  std::vector<std::pair<double, double>> narrow = {{1, 1}, {2, 1}, {3, 1}, {4, 1}};
  CHECK_THROWS_AS(sensitivity_scaling(narrow, 1.0), std::invalid_argument);
  series[0].second = 0.0;
  CHECK_THROWS_AS(sensitivity_scaling(series, 1.0), std::invalid_argument);
}
