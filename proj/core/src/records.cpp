#include "epower/records.hpp"

#include <algorithm>
#include <map>

#include "epower/error.hpp"
#include "epower/text.hpp"

namespace epower::records {

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string format_record(const gemm::RunRecord& r) {
  const auto& c = r.config;
  const auto& p = c.pattern;
  std::string out = "key,value\n";
  auto put = [&out](std::string_view key, const std::string& value) {
    out += key;
    out += ',';
    out += value;
    out += '\n';
  };
  put("schema_version", std::to_string(kRecordSchemaVersion));
  put("family", std::string(patterns::to_string(p.family)));
  put("n", std::to_string(p.n_dim));
  put("level", std::to_string(p.level));
  put("value_mode", std::string(patterns::to_string(p.value_mode)));
  put("seed", std::to_string(p.seed));
  put("prng", std::string(patterns::kPrngId));
  put("reps", std::to_string(c.reps));
  put("alpha", text::format_double(c.alpha));
  put("beta", text::format_double(c.beta));
  put("backend", c.backend_id);
  put("warmup_seconds_target", text::format_double(c.warmup_seconds));
  put("warmup_wall_seconds", text::format_double(r.warmup.wall_seconds));
  put("warmup_iterations", std::to_string(r.warmup.iterations));
  put("measured_wall_seconds", text::format_double(r.measured.wall_seconds));
  put("measured_iterations", std::to_string(r.measured.iterations));
  put("total_flops", std::to_string(r.total_flops));
  put("flop_rate", text::format_double(r.flop_rate));
  put("checksum", text::format_double(r.c_checksum.sum));
  put("checksum_bits", text::hex64(r.c_checksum.bits));
  put("timeline_ids", join(r.timeline_ids, ';'));
  put("node_id", r.node_id);
  put("run_index", std::to_string(r.run_index));
  put("telemetry_warning", r.telemetry_warning ? "1" : "0");
  for (const auto& w : r.warnings) put("warning", one_line(w));
  put("measured_start_ms", text::format_double(r.measured_start_ms));
  put("measured_end_ms", text::format_double(r.measured_end_ms));
  put("epoch_unix_ms", std::to_string(r.epoch_unix_ms));
  put("tdp_w", text::format_double(r.tdp_w));
  put("manifest_digest", r.manifest_digest);
  return out;
}

gemm::RunRecord parse_record(std::string_view body) {
  const auto rows = text::lines(body);
  if (rows.empty() || rows[0] != "key,value") {
    fail(ErrorKind::format, "record: line 1 must be 'key,value'");
  }
  std::map<std::string, std::string, std::less<>> kv;
  gemm::RunRecord r;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto comma = rows[i].find(',');
    if (comma == std::string_view::npos) {
      fail(ErrorKind::format, "record: line " + std::to_string(i + 1) + " has no comma");
    }
    const std::string key(rows[i].substr(0, comma));
    std::string value(rows[i].substr(comma + 1));
    if (key == "warning") {
      r.warnings.push_back(std::move(value));
    } else if (!kv.emplace(key, std::move(value)).second) {
      fail(ErrorKind::ambiguity, "record: duplicate key '" + key + "'");
    }
  }
  auto get = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorKind::format, "record: missing key '" + std::string(key) + "'");
    return it->second;
  };
  if (text::parse_i64(get("schema_version"), "schema_version") != kRecordSchemaVersion) {
    fail(ErrorKind::schema, "record: unsupported schema_version " + get("schema_version"));
  }
  auto& p = r.config.pattern;
  p.family = patterns::parse_family(get("family"));
  p.n_dim = text::parse_u64(get("n"), "n");
  p.level = static_cast<unsigned>(text::parse_u64(get("level"), "level"));
  p.value_mode = patterns::parse_value_mode(get("value_mode"));
  p.seed = text::parse_u64(get("seed"), "seed");
  r.config.n_dim = p.n_dim;
  r.config.reps = text::parse_u64(get("reps"), "reps");
  r.config.alpha = text::parse_double(get("alpha"), "alpha");
  r.config.beta = text::parse_double(get("beta"), "beta");
  r.config.backend_id = get("backend");
  r.config.warmup_seconds = text::parse_double(get("warmup_seconds_target"), "warmup_seconds_target");
  r.warmup.wall_seconds = text::parse_double(get("warmup_wall_seconds"), "warmup_wall_seconds");
  r.warmup.iterations = text::parse_u64(get("warmup_iterations"), "warmup_iterations");
  r.measured.wall_seconds = text::parse_double(get("measured_wall_seconds"), "measured_wall_seconds");
  r.measured.iterations = text::parse_u64(get("measured_iterations"), "measured_iterations");
  r.total_flops = text::parse_u64(get("total_flops"), "total_flops");
  r.flop_rate = text::parse_double(get("flop_rate"), "flop_rate");
  r.c_checksum.sum = text::parse_double(get("checksum"), "checksum");
  r.c_checksum.bits = text::parse_hex64(get("checksum_bits"), "checksum_bits");
  const auto& ids = get("timeline_ids");
  if (!ids.empty()) {
    for (auto id : text::split(ids, ';')) r.timeline_ids.emplace_back(id);
  }
  r.node_id = get("node_id");
  r.run_index = static_cast<std::uint32_t>(text::parse_u64(get("run_index"), "run_index"));
  r.telemetry_warning = get("telemetry_warning") == "1";
  r.measured_start_ms = text::parse_double(get("measured_start_ms"), "measured_start_ms");
  r.measured_end_ms = text::parse_double(get("measured_end_ms"), "measured_end_ms");
  r.epoch_unix_ms = text::parse_i64(get("epoch_unix_ms"), "epoch_unix_ms");
  r.tdp_w = text::parse_double(get("tdp_w"), "tdp_w");
  r.manifest_digest = get("manifest_digest");
  return r;
}

std::string timeline_file_name(std::string_view timeline_id) {
  return "timeline-" + std::string(timeline_id) + ".csv";
}

void write_run_dir(const std::filesystem::path& dir, const gemm::Experiment& experiment) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::resource, "cannot create " + dir.string() + ": " + ec.message());
  const auto& rec = experiment.record;
  if (rec.timeline_ids.size() != experiment.timelines.size()) {
    fail(ErrorKind::config, "record lists " + std::to_string(rec.timeline_ids.size()) +
                                " timelines but " + std::to_string(experiment.timelines.size()) +
                                " were given");
  }
  for (std::size_t i = 0; i < experiment.timelines.size(); ++i) {
    telemetry::write_timeline(dir / timeline_file_name(rec.timeline_ids[i]),
                              experiment.timelines[i]);
  }
  text::write_file(dir / kRecordFile, format_record(rec));
}

LoadedRun read_run_dir(const std::filesystem::path& dir) {
  LoadedRun run;
  run.dir = dir;
  try {
    run.record = parse_record(text::read_file(dir / kRecordFile));
  } catch (const Error& e) {
    fail(e.kind(), (dir / kRecordFile).string() + ": " + e.what());
  }
  for (const auto& id : run.record.timeline_ids) {
    run.timelines.push_back(telemetry::read_timeline(dir / timeline_file_name(id)));
  }
  return run;
}

std::vector<std::filesystem::path> find_run_dirs(std::span<const std::filesystem::path> roots) {
  namespace fs = std::filesystem;
  std::vector<fs::path> out;
  auto consider = [&out](const fs::path& d) {
    if (fs::exists(d / kRecordFile) && !fs::exists(d / kFailedMarker)) out.push_back(d);
  };
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) {
      fail(ErrorKind::no_input, "input '" + root.string() + "' is not a directory");
    }
    consider(root);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_directory()) consider(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string run_dir_name(const patterns::PatternSpec& spec, std::string_view node_id,
                         std::uint32_t run_index) {
  std::string name = "run-" + std::string(patterns::to_string(spec.family));
  if (!patterns::is_baseline(spec.family)) {
    name += "-" + std::string(patterns::to_string(spec.value_mode));
    name += "-l" + std::to_string(spec.level);
  }
  name += "-" + std::string(node_id) + "-r" + std::to_string(run_index);
  return name;
}

}  // namespace epower::records
