#include "qdm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qdm/error.hpp"

namespace qdm {

namespace {

using json = nlohmann::json;

constexpr double kMicro = 1e-6;

// Wraps a JSON object and remembers which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where(key) + " must be finite");
    return x;
  }

  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  double positive(const std::string& key, double fallback) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ConfigError(where(key) + " must be > 0");
    return x;
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    return v.get<long long>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
      if (!std::isfinite(out.back())) throw ConfigError(where(key) + " must be finite");
    }
    return out;
  }

  Vec3 vec3(const std::string& key, double unit) {
    const std::vector<double> v = numbers(key);
    if (v.size() != 3) throw ConfigError(where(key) + " must have 3 entries");
    return Vec3(v[0], v[1], v[2]) * unit;
  }

  Section child(const std::string& key) { return Section(raw(key), where(key)); }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "configuration" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  // Rejects keys outside `allowed` before any value is read.
  void allow(std::initializer_list<const char*> allowed) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
        throw ConfigError("unknown key '" + where(it.key()) + "'");
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

SensorGeometry parse_geometry(Section s) {
  SensorGeometry g;
  g.m = static_cast<int>(s.integer("rows", g.m));
  g.n = static_cast<int>(s.integer("cols", g.n));
  g.pixel_pitch = s.positive("pixel_pitch_um", g.pixel_pitch / kMicro) * kMicro;
  g.standoff = s.positive("standoff_um", g.standoff / kMicro) * kMicro;
  g.nv_layer_thickness = s.number("nv_layer_thickness_um", 0.0) * kMicro;
  g.nv_layer_depth = s.number("nv_layer_depth_um", 0.0) * kMicro;
  s.finish();
  guarded("geometry", [&] { g.validate(); return 0; });
  return g;
}

std::vector<double> parse_frequencies(Section s) {
  std::vector<double> f;
  if (s.has("values_ghz")) {
    f = s.numbers("values_ghz");
  } else {
    const double a = s.number("start_ghz");
    const double b = s.number("stop_ghz");
    const long long q = s.integer("count", 0);
    if (q < 2) throw ConfigError(s.where("count") + " must be >= 2");
    if (!(b > a)) throw ConfigError(s.where("stop_ghz") + " must exceed start_ghz");
    f.resize(static_cast<std::size_t>(q));
    for (long long i = 0; i < q; ++i) f[static_cast<std::size_t>(i)] = a + (b - a) * i / (q - 1);
  }
  s.finish();
  if (f.size() < 2) throw ConfigError("frequencies need at least 2 points");
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (!(f[i] > f[i - 1])) throw ConfigError("frequencies must be strictly increasing");
  }
  return f;
}

}  // namespace

SynthesisOptions RunConfig::synthesis() const {
  SynthesisOptions o;
  o.mode = mode;
  o.lineshape = lineshape;
  o.freqs = freqs;
  o.photons_per_pixel = photons_per_pixel;
  o.seed = seed;
  o.bias = bias;
  o.zfs = zfs;
  o.pmm_orientation = pmm_orientation;
  o.pmm_model = pmm_model;
  o.drive = polarization;
  return o;
}

FitStackOptions RunConfig::fit_options() const {
  FitStackOptions o;
  o.lm = lm;
  o.zfs = zfs;
  o.threads = threads;
  if (!lineshape.linewidths.empty()) o.linewidth_mhz = lineshape.linewidths.front();
  return o;
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
  Section s(root, "");
  s.allow({"mode", "geometry", "sources", "bias_ut", "zfs_ghz", "frequencies", "lineshape", "pmm",
           "polarization", "photons_per_pixel", "seed", "threads", "max_masked_fraction", "lm",
           "filter"});
  RunConfig c;
  c.mode = guarded("mode", [&] { return parse_mode(s.text("mode", "vmm")); });
  if (s.has("geometry")) c.geometry = parse_geometry(s.child("geometry"));

  if (s.has("sources")) {
    const json& arr = s.raw("sources");
    if (!arr.is_array()) throw ConfigError("sources must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section src(arr[i], "sources[" + std::to_string(i) + "]");
      DipoleSource d;
      d.position = src.vec3("position_um", kMicro);
      d.moment = src.vec3("moment_am2", 1.0);
      src.finish();
      c.sources.push_back(d);
    }
  }
  if (s.has("bias_ut")) c.bias = s.vec3("bias_ut", kMicro);

  if (s.has("zfs_ghz")) {
    const json& z = s.raw("zfs_ghz");
    if (z.is_number()) {
      c.zfs = ZfsVector::uniform(s.number("zfs_ghz"));
    } else {
      const std::vector<double> v = s.numbers("zfs_ghz");
      if (v.size() != kOrientationCount) throw ConfigError("zfs_ghz must have 4 entries");
      std::copy(v.begin(), v.end(), c.zfs.d.begin());
    }
    if (!c.zfs.in_sanity_window()) throw ConfigError("zfs_ghz outside [2.6, 3.1] GHz");
  }

  if (s.has("frequencies")) {
    c.freqs = parse_frequencies(s.child("frequencies"));
  } else {
    throw ConfigError("missing key 'frequencies'");
  }

  double center = 0.0;
  for (double d : c.zfs.d) center += d / kOrientationCount;
  {
    const bool present = s.has("lineshape");
    const json empty = json::object();
    Section l(present ? s.raw("lineshape") : empty, "lineshape");
    const double baseline = l.positive("baseline", 1.0);
    const double gamma = l.positive("linewidth_mhz", 0.5);
    const double contrast = l.positive("contrast", 0.01);
    if (contrast >= 1.0) throw ConfigError("lineshape.contrast must be < 1");
    c.lineshape =
        SpectrumParams::uniform(c.mode, center, contrast * baseline * gamma * gamma, gamma, baseline);
    c.lineshape.hyperfine = l.positive("hyperfine_mhz", default_hyperfine_mhz(c.mode));
    if (l.has("amplitudes")) {
      c.lineshape.amplitudes = l.numbers("amplitudes");
      guarded("lineshape.amplitudes", [&] { c.lineshape.check_shape(); return 0; });
    }
    l.finish();
  }

  if (s.has("pmm")) {
    Section p = s.child("pmm");
    c.pmm_orientation = static_cast<int>(p.integer("orientation", 1));
    if (c.pmm_orientation < 1 || c.pmm_orientation > kOrientationCount) {
      throw ConfigError("pmm.orientation must be in 1..4");
    }
    const std::string model = p.text("model", "projection");
    if (model == "projection") {
      c.pmm_model = PmmModel::projection;
    } else if (model == "hamiltonian") {
      c.pmm_model = PmmModel::hamiltonian;
    } else {
      throw ConfigError("pmm.model must be 'projection' or 'hamiltonian'");
    }
    p.finish();
  }

  if (s.has("polarization")) {
    Section p = s.child("polarization");
    c.polarization.handedness = guarded(
        "polarization.handedness", [&] { return parse_handedness(p.text("handedness", "linear")); });
    if (p.has("axis")) {
      const Vec3 a = p.vec3("axis", 1.0);
      if (!(a.norm() > 0.0)) throw ConfigError("polarization.axis must be non-zero");
      c.polarization.axis = a.normalized();
    }
    p.finish();
  }

  if (s.has("photons_per_pixel")) c.photons_per_pixel = s.positive("photons_per_pixel", 1.0);
  const long long seed = s.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.threads = static_cast<int>(s.integer("threads", 0));
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  c.max_masked_fraction = s.number("max_masked_fraction", c.max_masked_fraction);
  if (!(c.max_masked_fraction >= 0.0 && c.max_masked_fraction <= 1.0)) {
    throw ConfigError("max_masked_fraction must be in [0, 1]");
  }

  if (s.has("lm")) {
    Section l = s.child("lm");
    c.lm.max_iterations = static_cast<int>(l.integer("max_iterations", c.lm.max_iterations));
    c.lm.cost_tolerance = l.number("cost_tolerance", c.lm.cost_tolerance);
    c.lm.param_tolerance = l.number("param_tolerance", c.lm.param_tolerance);
    c.lm.initial_damping = l.number("initial_damping", c.lm.initial_damping);
    c.lm.damping_up = l.number("damping_up", c.lm.damping_up);
    c.lm.damping_down = l.number("damping_down", c.lm.damping_down);
    l.finish();
    guarded("lm", [&] { c.lm.validate(); return 0; });
  }

  if (s.has("filter")) {
    Section f = s.child("filter");
    if (f.has("lowpass_fwhm_um")) c.filter.lowpass_fwhm = f.number("lowpass_fwhm_um") * kMicro;
    if (f.has("highpass_cutoff_um")) {
      c.filter.highpass_cutoff = f.number("highpass_cutoff_um") * kMicro;
    }
    c.filter.highpass_order = static_cast<int>(f.integer("highpass_order", 3));
    f.finish();
    c.filter.validate();
  }
  s.finish();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace qdm
