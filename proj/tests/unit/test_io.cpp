#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "qdm/error.hpp"
#include "qdm/io.hpp"

using namespace qdm;

namespace {

OdmrStack sample_stack() {
  OdmrStack s;
  s.m = 3;
  s.n = 4;
  s.freqs = {2.80, 2.85, 2.9000000001};
  s.pixel_pitch = 1.25e-6;
  s.mode = Mode::cpmm;
  s.bias_field = Vec3(1e-4, -2e-5, 3.3e-3);
  s.polarization = PolarizationDrive{Handedness::sigma_minus, Vec3(0, 0.6, 0.8)};
  s.averages = 7;
  s.seed = 123456789012345ull;
  s.metadata = {{"pmm_orientation", "2"}, {"note", "x\"y"}};
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.9f, 1.0f);
  for (int k = 0; k < 36; ++k) s.data.push_back(u(rng));
  return s;
}

FieldMap sample_map() {
  FieldMap f = FieldMap::zeros(3, 2, 3, 2e-6);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = 1e-6 * std::sin(1.0 + i);
  f.zfs.assign(4 * f.pixels(), 2.87);
  f.zfs[5] = 2.8700001;
  f.residuals.assign(f.pixels(), 1e-4);
  f.set_masked(1, 1);
  return f;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string bytes_of_stack(const OdmrStack& s) {
  std::ostringstream os;
  write_stack(os, s);
  return os.str();
}

std::string bytes_of_map(const FieldMap& f) {
  std::ostringstream os;
  write_field_map(os, f);
  return os.str();
}

}  // namespace

TEST_CASE("stack round trip is byte exact", "[io]") {
  const OdmrStack s = sample_stack();
  const std::string bytes = bytes_of_stack(s);
  CHECK(bytes.rfind("QDMSTACK", 0) == 0);
  std::istringstream is(bytes);
  const OdmrStack back = read_stack(is);
  CHECK(back.data == s.data);
  CHECK(back.freqs == s.freqs);
  CHECK(back.m == s.m);
  CHECK(back.n == s.n);
  CHECK(back.mode == s.mode);
  CHECK(back.bias_field == s.bias_field);
  CHECK(back.polarization.handedness == s.polarization.handedness);
  CHECK(back.polarization.axis == s.polarization.axis);
  CHECK(back.seed == s.seed);
  CHECK(back.averages == s.averages);
  CHECK(back.metadata == s.metadata);
  CHECK(bytes_of_stack(back) == bytes);
}

TEST_CASE("field map round trip is byte exact", "[io]") {
  const FieldMap f = sample_map();
  const std::string bytes = bytes_of_map(f);
  std::istringstream is(bytes);
  const FieldMap back = read_field_map(is);
  CHECK(back.mask == f.mask);
  CHECK(same_bits(back.zfs, f.zfs));
  CHECK(same_bits(back.residuals, f.residuals));
  CHECK(same_bits(back.data, f.data));
  CHECK(std::isnan(back.at(2, 1, 1)));
  CHECK(bytes_of_map(back) == bytes);
  FieldMap plain = FieldMap::zeros(2, 2, 1, 1e-6);
  std::istringstream is2(bytes_of_map(plain));
  const FieldMap p2 = read_field_map(is2);
  CHECK(p2.zfs.empty());
  CHECK(p2.residuals.empty());
  CHECK(p2.components == 1);
}

TEST_CASE("corrupt files raise format errors", "[io]") {
  const std::string stack = bytes_of_stack(sample_stack());
  for (std::size_t cut : {std::size_t{4}, std::size_t{12}, std::size_t{40}, stack.size() - 1}) {
    std::istringstream is(stack.substr(0, cut));
    CHECK_THROWS_AS(read_stack(is), FormatError);
  }
  std::string magic = stack;
  magic[0] = 'X';
  std::istringstream bad(magic);
  CHECK_THROWS_AS(read_stack(bad), FormatError);
  std::istringstream extra(stack + "z");
  CHECK_THROWS_AS(read_stack(extra), FormatError);
  std::istringstream wrong_kind(bytes_of_map(sample_map()));
  CHECK_THROWS_AS(read_stack(wrong_kind), FormatError);
  const std::string map = bytes_of_map(sample_map());
  std::istringstream short_map(map.substr(0, map.size() - 3));
  CHECK_THROWS_AS(read_field_map(short_map), FormatError);
}

TEST_CASE("file helpers map missing paths to io errors", "[io]") {
  CHECK_THROWS_AS(read_stack_file("/nonexistent/dir/x.qdms"), IoError);
  CHECK_THROWS_AS(write_field_map_file("/nonexistent/dir/x.qdmf", sample_map()), IoError);
  const auto path = std::filesystem::temp_directory_path() / "qdm_io_test.qdmf";
  write_field_map_file(path.string(), sample_map());
  CHECK(read_field_map_file(path.string()).mask == sample_map().mask);
  std::filesystem::remove(path);
}

TEST_CASE("CSV export", "[io]") {
  const FieldMap f = sample_map();
  std::ostringstream os;
  export_csv(os, f, 2);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "row,col,value");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.rfind("1,1,", 0) == 0) CHECK(line == "1,1,");
  }
  CHECK(rows == 6);
  CHECK_THROWS_AS(export_csv(os, f, 3), std::invalid_argument);
}

TEST_CASE("PGM export scales and saturates", "[io]") {
  FieldMap f = FieldMap::zeros(1, 5, 1, 1e-6);
  f.data = {-1.0, 0.0, 0.5, 1.0, 2.0};
  std::ostringstream os;
  export_pgm(os, f, 0, std::make_pair(0.0, 1.0));
  const std::string s = os.str();
  const std::string header = "P5\n5 1\n255\n";
  REQUIRE(s.size() == header.size() + 5);
  CHECK(s.substr(0, header.size()) == header);
  const auto px = [&](int k) { return static_cast<unsigned char>(s[header.size() + k]); };
  CHECK(px(0) == 0);
  CHECK(px(1) == 0);
  CHECK(px(2) == 128);
  CHECK(px(3) == 255);
  CHECK(px(4) == 255);
  std::ostringstream auto_range;
  f.set_masked(0, 4);
  export_pgm(auto_range, f, 0);
  const std::string a = auto_range.str();
  CHECK(static_cast<unsigned char>(a[header.size() + 3]) == 255);
  CHECK(static_cast<unsigned char>(a[header.size() + 4]) == 0);
  CHECK_THROWS_AS(export_pgm(os, f, 0, std::make_pair(1.0, 1.0)), std::invalid_argument);
}
