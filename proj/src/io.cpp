#include "qdm/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "qdm/error.hpp"

namespace qdm {

namespace {

using nlohmann::json;

constexpr char kStackMagic[8] = {'Q', 'D', 'M', 'S', 'T', 'A', 'C', 'K'};
constexpr char kFieldMagic[8] = {'Q', 'D', 'M', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint64_t kMaxHeader = 64ull << 20;

template <typename U>
U to_le(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  }
}

template <typename U>
void put(std::ostream& os, U v) {
  v = to_le(v);
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  os.write(buf, sizeof(U));
}

template <typename U>
U get(std::istream& is, const char* what) {
  char buf[sizeof(U)];
  if (!is.read(buf, sizeof(U))) throw FormatError(std::string("truncated file: ") + what);
  U v;
  std::memcpy(&v, buf, sizeof(U));
  return to_le(v);
}

void write_header(std::ostream& os, const char (&magic)[8], const json& header) {
  const std::string text = header.dump();
  os.write(magic, 8);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json read_header(std::istream& is, const char (&magic)[8], const char* kind) {
  char m[8];
  if (!is.read(m, 8)) throw FormatError(std::string("truncated file: missing ") + kind + " magic");
  if (std::memcmp(m, magic, 8) != 0) {
    throw FormatError(std::string("bad magic: expected \"") + std::string(magic, 8) + "\"");
  }
  const auto len = get<std::uint64_t>(is, "header length");
  if (len == 0 || len > kMaxHeader) {
    throw FormatError("header length " + std::to_string(len) + " out of range");
  }
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) {
    throw FormatError("truncated file: header shorter than header length");
  }
  try {
    json h = json::parse(text);
    if (!h.is_object()) throw FormatError("header is not a JSON object");
    return h;
  } catch (const json::exception& e) {
    throw FormatError(std::string("header is not valid JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& h, const char* key) {
  if (!h.contains(key)) throw FormatError(std::string("header is missing \"") + key + "\"");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("header field \"") + key + "\" has the wrong type");
  }
}

void check_schema(const json& h) {
  const int v = field<int>(h, "schema_version");
  if (v != kSchemaVersion) {
    throw FormatError("unsupported schema_version " + std::to_string(v));
  }
}

void expect_end(std::istream& is) {
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("payload longer than the header declares");
  }
}

void write_f64(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(x));
}

void read_f64(std::istream& is, std::vector<double>& v, const char* what) {
  for (double& x : v) x = std::bit_cast<double>(get<std::uint64_t>(is, what));
}

Vec3 vec3_from(const json& j, const char* key) {
  const auto a = field<std::vector<double>>(j, key);
  if (a.size() != 3) throw FormatError(std::string("header field \"") + key + "\" needs 3 values");
  return {a[0], a[1], a[2]};
}

}  // namespace

void write_stack(std::ostream& os, const OdmrStack& stack) {
  json h;
  h["schema_version"] = kSchemaVersion;
  h["m"] = stack.m;
  h["n"] = stack.n;
  h["q"] = stack.q();
  h["freqs_ghz"] = stack.freqs;
  h["pixel_pitch_m"] = stack.pixel_pitch;
  h["mode"] = std::string(to_string(stack.mode));
  h["bias_field_t"] = {stack.bias_field.x(), stack.bias_field.y(), stack.bias_field.z()};
  h["polarization"] = {
      {"handedness", std::string(to_string(stack.polarization.handedness))},
      {"axis",
       {stack.polarization.axis.x(), stack.polarization.axis.y(), stack.polarization.axis.z()}}};
  h["averages"] = stack.averages;
  h["seed"] = stack.seed;
  h["metadata"] = stack.metadata;
  write_header(os, kStackMagic, h);
  for (float v : stack.data) put<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

OdmrStack read_stack(std::istream& is) {
  const json h = read_header(is, kStackMagic, "QDMS");
  check_schema(h);
  OdmrStack st;
  st.m = field<int>(h, "m");
  st.n = field<int>(h, "n");
  const int q = field<int>(h, "q");
  st.freqs = field<std::vector<double>>(h, "freqs_ghz");
  if (st.m <= 0 || st.n <= 0 || q <= 0) throw FormatError("dimensions m, n, q must be positive");
  if (static_cast<int>(st.freqs.size()) != q) {
    throw FormatError("freqs_ghz has " + std::to_string(st.freqs.size()) + " entries, q = " +
                      std::to_string(q));
  }
  st.pixel_pitch = field<double>(h, "pixel_pitch_m");
  try {
    st.mode = parse_mode(field<std::string>(h, "mode"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  st.bias_field = vec3_from(h, "bias_field_t");
  const json pol = field<json>(h, "polarization");
  try {
    st.polarization.handedness = parse_handedness(field<std::string>(pol, "handedness"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  st.polarization.axis = vec3_from(pol, "axis");
  st.averages = field<int>(h, "averages");
  st.seed = field<std::uint64_t>(h, "seed");
  if (h.contains("metadata")) st.metadata = field<std::map<std::string, std::string>>(h, "metadata");

  st.data.resize(static_cast<std::size_t>(q) * st.m * st.n);
  for (float& v : st.data) {
    v = std::bit_cast<float>(get<std::uint32_t>(is, "payload shorter than 4*q*m*n bytes"));
  }
  expect_end(is);
  try {
    st.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return st;
}

void write_field_map(std::ostream& os, const FieldMap& map) {
  map.validate();
  json h;
  h["schema_version"] = kSchemaVersion;
  h["m"] = map.m;
  h["n"] = map.n;
  h["components"] = map.components;
  h["pixel_pitch_m"] = map.pixel_pitch;
  h["zfs_maps"] = !map.zfs.empty();
  h["residuals"] = !map.residuals.empty();
  h["mask_encoding"] = "u8";
  write_header(os, kFieldMagic, h);
  write_f64(os, map.data);
  if (!map.zfs.empty()) write_f64(os, map.zfs);
  if (!map.residuals.empty()) write_f64(os, map.residuals);
  os.write(reinterpret_cast<const char*>(map.mask.data()),
           static_cast<std::streamsize>(map.mask.size()));
}

FieldMap read_field_map(std::istream& is) {
  const json h = read_header(is, kFieldMagic, "QDMF");
  check_schema(h);
  const int m = field<int>(h, "m");
  const int n = field<int>(h, "n");
  const int c = field<int>(h, "components");
  if (m <= 0 || n <= 0) throw FormatError("dimensions m, n must be positive");
  if (c != 1 && c != 3) throw FormatError("components must be 1 or 3");
  if (field<std::string>(h, "mask_encoding") != "u8") throw FormatError("mask_encoding must be u8");
  FieldMap map = FieldMap::zeros(m, n, c, field<double>(h, "pixel_pitch_m"));
  read_f64(is, map.data, "field payload shorter than 8*components*m*n bytes");
  if (field<bool>(h, "zfs_maps")) {
    map.zfs.resize(4 * map.pixels());
    read_f64(is, map.zfs, "zfs payload shorter than 32*m*n bytes");
  }
  if (h.contains("residuals") && field<bool>(h, "residuals")) {
    map.residuals.resize(map.pixels());
    read_f64(is, map.residuals, "residual payload shorter than 8*m*n bytes");
  }
  if (!is.read(reinterpret_cast<char*>(map.mask.data()),
               static_cast<std::streamsize>(map.mask.size()))) {
    throw FormatError("truncated file: mask shorter than m*n bytes");
  }
  for (std::uint8_t b : map.mask) {
    if (b > 1) throw FormatError("mask bytes must be 0 or 1");
  }
  expect_end(is);
  if (!(map.pixel_pitch > 0.0)) throw FormatError("pixel_pitch_m must be > 0");
  return map;
}

void write_stack_file(const std::string& path, const OdmrStack& stack) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_stack(os, stack);
  if (!os.flush()) throw IoError("write to '" + path + "' failed");
}

OdmrStack read_stack_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return read_stack(is);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_field_map_file(const std::string& path, const FieldMap& map) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_field_map(os, map);
  if (!os.flush()) throw IoError("write to '" + path + "' failed");
}

FieldMap read_field_map_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return read_field_map(is);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void export_csv(std::ostream& os, const FieldMap& map, int component) {
  if (component < 0 || component >= map.components) {
    throw std::invalid_argument("field component out of range");
  }
  os << "row,col,value\n" << std::setprecision(17);
  for (int i = 0; i < map.m; ++i) {
    for (int j = 0; j < map.n; ++j) {
      os << i << ',' << j << ',';
      if (!map.masked(i, j)) os << map.at(component, i, j);
      os << '\n';
    }
  }
}

void export_pgm(std::ostream& os, const FieldMap& map, int component,
                std::optional<std::pair<double, double>> range) {
  if (component < 0 || component >= map.components) {
    throw std::invalid_argument("field component out of range");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  if (range) {
    lo = range->first;
    hi = range->second;
    if (!(hi > lo)) throw std::invalid_argument("PGM range must satisfy low < high");
  } else {
    for (int i = 0; i < map.m; ++i) {
      for (int j = 0; j < map.n; ++j) {
        if (map.masked(i, j)) continue;
        lo = std::min(lo, map.at(component, i, j));
        hi = std::max(hi, map.at(component, i, j));
      }
    }
  }
  os << "P5\n" << map.n << ' ' << map.m << "\n255\n";
  for (int i = 0; i < map.m; ++i) {
    for (int j = 0; j < map.n; ++j) {
      unsigned char px = 0;
      if (!map.masked(i, j)) {
        const double v = map.at(component, i, j);
        double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
        px = static_cast<unsigned char>(std::lround(t * 255.0));
      }
      os.put(static_cast<char>(px));
    }
  }
}

}  // namespace qdm
