#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epower/gemm.hpp"
#include "epower/telemetry.hpp"

namespace epower::records {

inline constexpr int kRecordSchemaVersion = 1;
inline constexpr std::string_view kRecordFile = "record.csv";
inline constexpr std::string_view kManifestFile = "manifest";
inline constexpr std::string_view kSummaryFile = "summary.csv";
inline constexpr std::string_view kFailedMarker = "failed";

/// `key,value` rows; the value is everything after the first comma.
std::string format_record(const gemm::RunRecord& record);
gemm::RunRecord parse_record(std::string_view text);

std::string timeline_file_name(std::string_view timeline_id);

struct LoadedRun {
  std::filesystem::path dir;
  gemm::RunRecord record;
  /// Parallel to record.timeline_ids.
  std::vector<telemetry::Timeline> timelines;
};

/// Writes record.csv plus one timeline-<id>.csv per timeline into `dir`.
void write_run_dir(const std::filesystem::path& dir, const gemm::Experiment& experiment);

LoadedRun read_run_dir(const std::filesystem::path& dir);

/// Every directory under the given roots (roots included) holding a
/// record.csv and no `failed` marker, in sorted path order.
std::vector<std::filesystem::path> find_run_dirs(std::span<const std::filesystem::path> roots);

std::string run_dir_name(const patterns::PatternSpec& spec, std::string_view node_id,
                         std::uint32_t run_index);

}  // namespace epower::records
