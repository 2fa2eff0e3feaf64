#include "epower/telemetry.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "epower/error.hpp"
#include "epower/text.hpp"

namespace epower::telemetry {

namespace {

void check_label(const std::string& label) {
  if (label.empty()) fail(ErrorKind::format, "empty telemetry source label");
  for (char c : label) {
    if (c == ',' || c == '\n' || c == '\r' || c == ' ' || c == '\t') {
      fail(ErrorKind::format, "source label '" + label + "' contains a separator");
    }
  }
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

Timeline::Timeline(std::string source, double interval_ms, std::int64_t epoch_unix_ms)
    : source_(std::move(source)), interval_ms_(interval_ms), epoch_unix_ms_(epoch_unix_ms) {
  check_label(source_);
  if (!(interval_ms_ > 0.0) || !std::isfinite(interval_ms_)) {
    fail(ErrorKind::config, "timeline interval must be positive");
  }
}

void Timeline::append(PowerSample sample) {
  if (!std::isfinite(sample.t_ms) || sample.t_ms < 0.0) {
    fail(ErrorKind::format, "sample time must be finite and nonnegative");
  }
  if (!std::isfinite(sample.watts) || sample.watts < 0.0) {
    fail(ErrorKind::format, "sample power must be finite and nonnegative");
  }
  check_label(sample.source);
  if (!samples_.empty()) {
    const double last = samples_.back().t_ms;
    if (sample.t_ms == last) {
      fail(ErrorKind::ordering, "duplicate t_ms " + text::format_double(sample.t_ms));
    }
    if (sample.t_ms < last) {
      fail(ErrorKind::ordering, "t_ms " + text::format_double(sample.t_ms) +
                                    " precedes previous sample at " + text::format_double(last));
    }
  }
  samples_.push_back(std::move(sample));
}

double mean_watts(const Timeline& timeline) {
  if (timeline.empty()) fail(ErrorKind::insufficient_data, "empty timeline");
  double sum = 0.0;
  for (const auto& s : timeline.samples()) sum += s.watts;
  return sum / static_cast<double>(timeline.size());
}

double parse_tool_timestamp(std::string_view s) {
  s = text::trim(s);
  // YYYY/MM/DD HH:MM:SS[.fff]
  const auto space = s.find(' ');
  if (space == std::string_view::npos) {
    fail(ErrorKind::format, "timestamp '" + std::string(s) + "' lacks a time part");
  }
  const auto date = text::split(s.substr(0, space), '/');
  const auto time = text::split(text::trim(s.substr(space + 1)), ':');
  if (date.size() != 3 || time.size() != 3) {
    fail(ErrorKind::format, "timestamp '" + std::string(s) + "' is not YYYY/MM/DD HH:MM:SS");
  }
  using namespace std::chrono;
  const auto y = static_cast<int>(text::parse_i64(date[0], "year"));
  const auto mo = static_cast<unsigned>(text::parse_u64(date[1], "month"));
  const auto d = static_cast<unsigned>(text::parse_u64(date[2], "day"));
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) fail(ErrorKind::format, "invalid date in '" + std::string(s) + "'");
  const auto hh = text::parse_u64(time[0], "hour");
  const auto mm = text::parse_u64(time[1], "minute");
  const double ss = text::parse_double(time[2], "second");
  if (hh > 23 || mm > 59 || ss < 0.0 || ss >= 61.0) {
    fail(ErrorKind::format, "invalid time of day in '" + std::string(s) + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86'400'000.0 +
         static_cast<double>(hh * 3'600'000 + mm * 60'000) + ss * 1000.0;
}

ParsedCsv parse_power_csv(std::string_view text_in, double interval_ms, std::string source) {
  const auto rows = text::lines(text_in);
  std::size_t header_line = 0;
  while (header_line < rows.size() && text::trim(rows[header_line]).empty()) ++header_line;
  if (header_line == rows.size()) {
    fail(ErrorKind::insufficient_data, "power CSV is empty");
  }
  const auto header = text::split(rows[header_line], ',');
  if (header.size() != 2 || text::trim(header[0]) != "timestamp" ||
      !text::trim(header[1]).starts_with("power.draw")) {
    fail(ErrorKind::format, at_line(header_line + 1) +
                                "expected header 'timestamp, power.draw [W]', got '" +
                                std::string(rows[header_line]) + "'");
  }

  ParsedCsv out{Timeline(source, interval_ms), 0};
  std::optional<double> first_ms;
  for (std::size_t li = header_line + 1; li < rows.size(); ++li) {
    const auto row = text::trim(rows[li]);
    if (row.empty()) continue;
    const auto fields = text::split(row, ',');
    if (fields.size() != 2) {
      fail(ErrorKind::format, at_line(li + 1) + "expected 2 fields, got " +
                                  std::to_string(fields.size()));
    }
    auto power = text::trim(fields[1]);
    if (power == "N/A" || power == "[N/A]" || power == "[Not Supported]") {
      ++out.skipped;
      continue;
    }
    if (power.ends_with('W')) {
      power.remove_suffix(1);
      power = text::trim(power);
    } else if (const auto sp = power.find(' '); sp != std::string_view::npos) {
      fail(ErrorKind::unit, at_line(li + 1) + "unexpected power unit '" +
                                std::string(power.substr(sp + 1)) + "'");
    }
    double watts = 0.0;
    double stamp = 0.0;
    try {
      watts = text::parse_double(power, "power.draw");
      stamp = parse_tool_timestamp(fields[0]);
    } catch (const Error& e) {
      fail(e.kind(), at_line(li + 1) + e.what());
    }
    if (!first_ms) first_ms = stamp;
    try {
      out.timeline.append({stamp - *first_ms, watts, source});
    } catch (const Error& e) {
      fail(e.kind(), at_line(li + 1) + e.what());
    }
  }
  if (out.timeline.empty()) {
    fail(ErrorKind::insufficient_data, "power CSV has no valid rows");
  }
  Timeline rebased(source, interval_ms, static_cast<std::int64_t>(std::llround(*first_ms)));
  for (auto s : out.timeline.samples()) rebased.append(std::move(s));
  out.timeline = std::move(rebased);
  return out;
}

PowerSample parse_pm_counters(std::string_view line, std::string source) {
  std::vector<std::string_view> tokens;
  for (auto tok : text::split(text::trim(line), ' ')) {
    if (!text::trim(tok).empty()) tokens.push_back(text::trim(tok));
  }
  if (tokens.size() != 3) {
    fail(ErrorKind::format, "pm_counters line must be '<value> W <timestamp_us>', got '" +
                                std::string(line) + "'");
  }
  if (tokens[1] != "W") {
    fail(ErrorKind::unit, "pm_counters unit '" + std::string(tokens[1]) +
                              "' is not W; energy counters go through the counter source");
  }
  const double watts = text::parse_double(tokens[0], "pm_counters value");
  const auto stamp_us = text::parse_u64(tokens[2], "pm_counters timestamp");
  if (!(watts >= 0.0)) fail(ErrorKind::format, "negative pm_counters power");
  return {static_cast<double>(stamp_us) / 1000.0, watts, std::move(source)};
}

std::string format_timeline(const Timeline& timeline) {
  std::string out;
  out.reserve(64 + timeline.size() * 40);
  out += "#timeline schema_version=" + std::to_string(kTimelineSchemaVersion);
  out += " epoch_unix_ms=" + std::to_string(timeline.epoch_unix_ms());
  out += " interval_ms=" + text::format_double(timeline.interval_ms());
  out += " source=" + timeline.source();
  out += " gaps=" + std::to_string(timeline.gaps());
  out += '\n';
  out += kTimelineHeader;
  out += '\n';
  for (const auto& s : timeline.samples()) {
    out += text::format_double(s.t_ms);
    out += ',';
    out += text::format_double(s.watts);
    out += ',';
    out += s.source;
    out += '\n';
  }
  return out;
}

Timeline parse_timeline(std::string_view text_in) {
  const auto rows = text::lines(text_in);
  if (rows.size() < 2 || !rows[0].starts_with("#timeline ")) {
    fail(ErrorKind::format, "line 1: missing '#timeline' metadata line");
  }
  std::optional<int> version;
  std::optional<std::int64_t> epoch;
  std::optional<double> interval;
  std::optional<std::string> source;
  std::size_t gaps = 0;
  for (auto kv : text::split(rows[0].substr(10), ' ')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::format, "line 1: bad field '" + std::string(kv) + "'");
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    if (key == "schema_version") version = static_cast<int>(text::parse_i64(val, "schema_version"));
    else if (key == "epoch_unix_ms") epoch = text::parse_i64(val, "epoch_unix_ms");
    else if (key == "interval_ms") interval = text::parse_double(val, "interval_ms");
    else if (key == "source") source = std::string(val);
    else if (key == "gaps") gaps = text::parse_u64(val, "gaps");
  }
  if (!version) fail(ErrorKind::format, "line 1: missing schema_version");
  if (*version != kTimelineSchemaVersion) {
    fail(ErrorKind::schema, "timeline schema_version " + std::to_string(*version) +
                                " is not supported (expected " +
                                std::to_string(kTimelineSchemaVersion) + ")");
  }
  if (!epoch || !interval || !source) {
    fail(ErrorKind::format, "line 1: timeline metadata incomplete");
  }
  if (rows[1] != kTimelineHeader) {
    fail(ErrorKind::format, "line 2: expected header '" + std::string(kTimelineHeader) + "'");
  }
  Timeline timeline(*source, *interval, *epoch);
  for (std::size_t li = 2; li < rows.size(); ++li) {
    const auto fields = text::split(rows[li], ',');
    if (fields.size() != 3) {
      fail(ErrorKind::format, at_line(li + 1) + "expected 3 fields");
    }
    try {
      timeline.append({text::parse_double(fields[0], "t_ms"),
                       text::parse_double(fields[1], "watts"), std::string(fields[2])});
    } catch (const Error& e) {
      fail(e.kind(), at_line(li + 1) + e.what());
    }
  }
  for (std::size_t g = 0; g < gaps; ++g) timeline.note_gap();
  return timeline;
}

void write_timeline(const std::filesystem::path& path, const Timeline& timeline) {
  text::write_file(path, format_timeline(timeline));
}

Timeline read_timeline(const std::filesystem::path& path) {
  try {
    return parse_timeline(text::read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::resource) throw;
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

std::int64_t unix_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace epower::telemetry
