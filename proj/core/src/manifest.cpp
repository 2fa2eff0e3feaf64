#include "epower/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "epower/error.hpp"
#include "epower/text.hpp"

namespace epower::manifest {

namespace pt = boost::property_tree;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (text::trim(s).empty()) return out;
  for (auto item : text::split(s, ',')) {
    const auto t = text::trim(item);
    if (t.empty()) fail(ErrorKind::config, "empty entry in list '" + std::string(s) + "'");
    out.emplace_back(t);
  }
  return out;
}

bool parse_bool(std::string_view s, std::string_view what) {
  if (s == "true") return true;
  if (s == "false") return false;
  fail(ErrorKind::config, std::string(what) + ": expected true or false, got '" + std::string(s) + "'");
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

/// Reads one section, rejecting keys it does not consume.
class SectionReader {
 public:
  SectionReader(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> get(const std::string& key) {
    seen_.insert(key);
    if (!tree_) return std::nullopt;
    auto child = tree_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    return child->data();
  }

  template <typename T, typename Parse>
  void read(const std::string& key, T& out, Parse parse) {
    if (auto v = get(key)) {
      try {
        out = parse(*v);
      } catch (const Error& e) {
        fail(ErrorKind::config, "[" + name_ + "] " + key + ": " + e.what());
      }
    }
  }

  void finish() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!seen_.count(key)) fail(ErrorKind::config, "unknown key '" + key + "' in [" + name_ + "]");
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

double as_double(const std::string& s) { return text::parse_double(s, "value"); }
std::uint64_t as_u64(const std::string& s) { return text::parse_u64(s, "value"); }
std::size_t as_size(const std::string& s) { return static_cast<std::size_t>(as_u64(s)); }
unsigned as_unsigned(const std::string& s) {
  const auto v = as_u64(s);
  if (v > 64) fail(ErrorKind::config, "value " + s + " out of range");
  return static_cast<unsigned>(v);
}
std::string as_string(const std::string& s) { return s; }

}  // namespace

model::Schedule ModelSection::schedule() const {
  model::Schedule s;
  s.lanes = lanes;
  s.tile_m = tile_m;
  s.tile_n = tile_n;
  return s;
}

void ExperimentManifest::validate() const {
  if (schema_version != kManifestSchemaVersion) {
    fail(ErrorKind::schema, "unsupported manifest schema_version " + std::to_string(schema_version));
  }
  gemm_config().validate();
  if (!std::isfinite(alpha) || !std::isfinite(beta)) fail(ErrorKind::config, "alpha and beta must be finite");
  if (!(telemetry.interval_ms >= 1.0)) fail(ErrorKind::config, "interval_ms must be >= 1");
  for (const auto& s : telemetry.sources) {
    if (std::find(std::begin(kSourceKinds), std::end(kSourceKinds), s) == std::end(kSourceKinds)) {
      fail(ErrorKind::config, "unknown telemetry source '" + s + "'");
    }
    if (std::count(telemetry.sources.begin(), telemetry.sources.end(), s) > 1) {
      fail(ErrorKind::config, "telemetry source '" + s + "' listed twice");
    }
  }
  const bool wants_replay = std::find(telemetry.sources.begin(), telemetry.sources.end(), "replay") !=
                            telemetry.sources.end();
  if (wants_replay && telemetry.replay_path.empty()) {
    fail(ErrorKind::config, "replay source needs [telemetry] replay_path");
  }
  if (!(telemetry.rapl_joules_per_unit > 0.0)) fail(ErrorKind::config, "rapl_joules_per_unit must be > 0");
  if (sweep) {
    const unsigned top = patterns::log2_exact(pattern.n_dim);
    const unsigned hi = sweep->level_max.value_or(top);
    if (sweep->level_min > hi || hi > top) {
      fail(ErrorKind::config, "sweep levels " + std::to_string(sweep->level_min) + ".." +
                                  std::to_string(hi) + " outside 0.." + std::to_string(top));
    }
    if (sweep->value_modes.empty()) fail(ErrorKind::config, "sweep needs at least one value mode");
  }
  if (model.lanes < 1) fail(ErrorKind::config, "model lanes must be >= 1");
  if (model.tile_m < 1 || model.tile_n < 1) fail(ErrorKind::config, "model tile must be >= 1");
  if (!(model.w_mul >= 0.0) || !(model.w_acc >= 0.0)) fail(ErrorKind::config, "model weights must be >= 0");
  for (const auto& entry : model.specs) parse_spec_entry(entry, pattern.n_dim, pattern.seed);
  if (run.repetitions < 1) fail(ErrorKind::config, "repetitions must be >= 1");
  if (!(run.tdp_w > 0.0) || !std::isfinite(run.tdp_w)) fail(ErrorKind::config, "tdp_w must be > 0");
  if (run.node.empty() || run.node.find_first_of("/\\ ,") != std::string::npos) {
    fail(ErrorKind::config, "node label '" + run.node + "' must be nonempty without '/', ',' or spaces");
  }
}

gemm::GemmConfig ExperimentManifest::gemm_config() const {
  gemm::GemmConfig c;
  c.n_dim = pattern.n_dim;
  c.reps = reps;
  c.alpha = alpha;
  c.beta = beta;
  c.backend_id = backend;
  c.warmup_seconds = warmup_seconds;
  c.pattern = pattern;
  return c;
}

std::filesystem::path ExperimentManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

bool ExperimentManifest::operator==(const ExperimentManifest& o) const {
  return schema_version == o.schema_version && pattern == o.pattern && reps == o.reps &&
         alpha == o.alpha && beta == o.beta && backend == o.backend &&
         backend_command == o.backend_command && backend_gpu == o.backend_gpu &&
         warmup_seconds == o.warmup_seconds && telemetry == o.telemetry && sweep == o.sweep &&
         model == o.model && run == o.run;
}

std::string format_manifest(const ExperimentManifest& m) {
  std::string out;
  auto kv = [&out](std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  auto section = [&out](std::string_view name) {
    out += "\n[";
    out += name;
    out += "]\n";
  };
  kv("schema_version", std::to_string(m.schema_version));

  section("pattern");
  kv("family", std::string(patterns::to_string(m.pattern.family)));
  kv("n", std::to_string(m.pattern.n_dim));
  kv("level", std::to_string(m.pattern.level));
  kv("value_mode", std::string(patterns::to_string(m.pattern.value_mode)));
  kv("seed", std::to_string(m.pattern.seed));

  section("gemm");
  kv("reps", std::to_string(m.reps));
  kv("alpha", text::format_double(m.alpha));
  kv("beta", text::format_double(m.beta));
  kv("backend", m.backend);
  kv("backend_command", m.backend_command);
  kv("backend_gpu", bool_text(m.backend_gpu));
  kv("warmup_seconds", text::format_double(m.warmup_seconds));

  const auto& t = m.telemetry;
  section("telemetry");
  kv("interval_ms", text::format_double(t.interval_ms));
  kv("sources", join(t.sources));
  kv("replay_path", t.replay_path);
  kv("gpu_command", t.gpu_command);
  kv("pm_counters_path", t.pm_counters_path);
  kv("pm_counters_memory_path", t.pm_counters_memory_path);
  kv("rapl_path", t.rapl_path);
  kv("rapl_joules_per_unit", text::format_double(t.rapl_joules_per_unit));

  if (m.sweep) {
    const auto& s = *m.sweep;
    section("sweep");
    kv("level_min", std::to_string(s.level_min));
    kv("level_max", s.level_max ? std::to_string(*s.level_max) : std::string{});
    std::vector<std::string> modes;
    for (auto v : s.value_modes) modes.emplace_back(patterns::to_string(v));
    kv("value_modes", join(modes));
    kv("baselines", bool_text(s.baselines));
  }

  section("model");
  kv("lanes", std::to_string(m.model.lanes));
  kv("tile_m", std::to_string(m.model.tile_m));
  kv("tile_n", std::to_string(m.model.tile_n));
  kv("w_mul", text::format_double(m.model.w_mul));
  kv("w_acc", text::format_double(m.model.w_acc));
  kv("max_n", std::to_string(m.model.max_n));
  kv("specs", join(m.model.specs));

  section("run");
  kv("node", m.run.node);
  kv("repetitions", std::to_string(m.run.repetitions));
  kv("tdp_w", text::format_double(m.run.tdp_w));
  kv("output_dir", m.run.output_dir);
  return out;
}

ExperimentManifest parse_manifest(std::string_view body) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(body)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::config, std::string("manifest: ") + e.what());
  }

  static const std::set<std::string> kSections = {"pattern", "gemm", "telemetry", "sweep", "model", "run"};
  ExperimentManifest m;
  bool has_version = false;
  for (const auto& [key, child] : tree) {
    if (kSections.count(key)) continue;
    if (key != "schema_version") fail(ErrorKind::config, "manifest: unknown top-level key '" + key + "'");
    has_version = true;
    try {
      m.schema_version = static_cast<int>(text::parse_i64(child.data(), "schema_version"));
    } catch (const Error& e) {
      fail(ErrorKind::schema, e.what());
    }
  }
  if (!has_version) fail(ErrorKind::schema, "manifest: missing schema_version");
  if (m.schema_version != kManifestSchemaVersion) {
    fail(ErrorKind::schema, "manifest: unsupported schema_version " + std::to_string(m.schema_version));
  }
  auto section = [&tree](const char* name) {
    auto c = tree.get_child_optional(name);
    return c ? &*c : nullptr;
  };

  {
    SectionReader r(section("pattern"), "pattern");
    r.read("family", m.pattern.family, [](const std::string& s) { return patterns::parse_family(s); });
    r.read("n", m.pattern.n_dim, as_size);
    r.read("level", m.pattern.level, as_unsigned);
    r.read("value_mode", m.pattern.value_mode,
           [](const std::string& s) { return patterns::parse_value_mode(s); });
    r.read("seed", m.pattern.seed, as_u64);
    r.finish();
  }
  {
    SectionReader r(section("gemm"), "gemm");
    r.read("reps", m.reps, as_u64);
    r.read("alpha", m.alpha, as_double);
    r.read("beta", m.beta, as_double);
    r.read("backend", m.backend, as_string);
    r.read("backend_command", m.backend_command, as_string);
    r.read("backend_gpu", m.backend_gpu, [](const std::string& s) { return parse_bool(s, "backend_gpu"); });
    r.read("warmup_seconds", m.warmup_seconds, as_double);
    r.finish();
  }
  {
    auto& t = m.telemetry;
    SectionReader r(section("telemetry"), "telemetry");
    r.read("interval_ms", t.interval_ms, as_double);
    r.read("sources", t.sources, [](const std::string& s) { return split_list(s); });
    r.read("replay_path", t.replay_path, as_string);
    r.read("gpu_command", t.gpu_command, as_string);
    r.read("pm_counters_path", t.pm_counters_path, as_string);
    r.read("pm_counters_memory_path", t.pm_counters_memory_path, as_string);
    r.read("rapl_path", t.rapl_path, as_string);
    r.read("rapl_joules_per_unit", t.rapl_joules_per_unit, as_double);
    r.finish();
  }
  if (const auto* node = section("sweep")) {
    SweepSection s;
    SectionReader r(node, "sweep");
    r.read("level_min", s.level_min, as_unsigned);
    r.read("level_max", s.level_max, [](const std::string& v) -> std::optional<unsigned> {
      if (v.empty()) return std::nullopt;
      return as_unsigned(v);
    });
    r.read("value_modes", s.value_modes, [](const std::string& v) {
      std::vector<patterns::ValueMode> modes;
      for (const auto& item : split_list(v)) modes.push_back(patterns::parse_value_mode(item));
      return modes;
    });
    r.read("baselines", s.baselines, [](const std::string& v) { return parse_bool(v, "baselines"); });
    r.finish();
    m.sweep = s;
  }
  {
    SectionReader r(section("model"), "model");
    r.read("lanes", m.model.lanes, as_size);
    r.read("tile_m", m.model.tile_m, as_size);
    r.read("tile_n", m.model.tile_n, as_size);
    r.read("w_mul", m.model.w_mul, as_double);
    r.read("w_acc", m.model.w_acc, as_double);
    r.read("max_n", m.model.max_n, as_size);
    r.read("specs", m.model.specs, [](const std::string& s) { return split_list(s); });
    r.finish();
  }
  {
    SectionReader r(section("run"), "run");
    r.read("node", m.run.node, as_string);
    r.read("repetitions", m.run.repetitions, [](const std::string& s) {
      const auto v = as_u64(s);
      if (v > 1'000'000) fail(ErrorKind::config, "repetitions out of range");
      return static_cast<std::uint32_t>(v);
    });
    r.read("tdp_w", m.run.tdp_w, as_double);
    r.read("output_dir", m.run.output_dir, as_string);
    r.finish();
  }
  return m;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  const auto body = text::read_file(path);
  ExperimentManifest m;
  try {
    m = parse_manifest(body);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
  m.base_dir = path.parent_path();
  return m;
}

std::string digest(const ExperimentManifest& m) { return text::hex64(text::fnv1a64(format_manifest(m))); }

patterns::PatternSpec parse_spec_entry(std::string_view entry, std::size_t n_dim, std::uint64_t seed) {
  const auto parts = text::split(entry, '/');
  if (parts.empty() || parts.size() > 3) {
    fail(ErrorKind::config, "model spec '" + std::string(entry) + "' must be family[/value_mode[/level]]");
  }
  patterns::PatternSpec s;
  s.family = patterns::parse_family(parts[0]);
  s.n_dim = n_dim;
  s.seed = seed;
  if (parts.size() > 1) s.value_mode = patterns::parse_value_mode(parts[1]);
  if (parts.size() > 2) s.level = static_cast<unsigned>(text::parse_u64(parts[2], "level"));
  s.validate();
  return s;
}

}  // namespace epower::manifest
