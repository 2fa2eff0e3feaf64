#include <gtest/gtest.h>

#include "epower/error.hpp"
#include "epower/manifest.hpp"
#include "epower/records.hpp"
#include "epower/text.hpp"
#include "test_support.hpp"

using namespace epower;
using namespace epower::manifest;
using patterns::Family;
using patterns::ValueMode;

namespace {

constexpr std::string_view kMinimal =
    "schema_version = 1\n"
    "[pattern]\n"
    "family = block_rowcol\n"
    "n = 64\n"
    "[telemetry]\n"
    "sources = replay\n"
    "replay_path = trace.csv\n";

ErrorKind parse_error_kind(std::string_view body) {
  try {
    parse_manifest(body).validate();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::format;
}

}  // namespace

TEST(Manifest, MinimalManifestTakesDefaults) {
  const auto m = parse_manifest(kMinimal);
  EXPECT_EQ(m.pattern.family, Family::block_rowcol);
  EXPECT_EQ(m.pattern.n_dim, 64u);
  EXPECT_EQ(m.pattern.level, 0u);
  EXPECT_EQ(m.reps, 100u);
  EXPECT_EQ(m.warmup_seconds, 60.0);
  EXPECT_EQ(m.backend, "reference");
  EXPECT_EQ(m.telemetry.interval_ms, 100.0);
  EXPECT_EQ(m.run.repetitions, 3u);
  EXPECT_EQ(m.run.tdp_w, 400.0);
  EXPECT_EQ(m.model.max_n, 1024u);
  EXPECT_FALSE(m.sweep);
}

TEST(Manifest, CanonicalTextRoundTripsByteForByte) {
  auto m = parse_manifest(kMinimal);
  m.sweep = SweepSection{3, 5, {ValueMode::fixed_common}, true};
  m.model.specs = {"baseline_random", "block_rowcol/fixed_common/6"};
  m.alpha = 0.1;
  m.telemetry.sources = {"replay", "rapl"};
  const auto text1 = format_manifest(m);
  const auto back = parse_manifest(text1);
  EXPECT_EQ(back, m);
  EXPECT_EQ(format_manifest(back), text1);
  EXPECT_EQ(digest(back), digest(m));
  m.pattern.seed = 99;
  EXPECT_NE(digest(m), digest(back));
}

TEST(Manifest, UnknownKeysAndSectionsAreConfigErrors) {
  EXPECT_EQ(parse_error_kind(std::string(kMinimal) + "[run]\nnodes = 4\n"), ErrorKind::config);
  EXPECT_EQ(parse_error_kind(std::string(kMinimal) + "[plot]\nstyle = x\n"), ErrorKind::config);
}

TEST(Manifest, SchemaVersionIsChecked) {
  std::string future(kMinimal);
  future.replace(0, 18, "schema_version = 7");
  EXPECT_EQ(parse_error_kind(future), ErrorKind::schema);
  EXPECT_EQ(parse_error_kind(kMinimal.substr(19)), ErrorKind::schema);
}

TEST(Manifest, StructuralValidation) {
  EXPECT_EQ(parse_error_kind(std::string(kMinimal) + "[run]\ntdp_w = 0\n"), ErrorKind::config);
  std::string bad_n(kMinimal);
  bad_n.replace(bad_n.find("n = 64"), 6, "n = 60");
  EXPECT_EQ(parse_error_kind(bad_n), ErrorKind::config);
  std::string no_sources(kMinimal);
  no_sources.replace(no_sources.find("sources = replay"), 16, "sources = thermometer");
  EXPECT_EQ(parse_error_kind(no_sources), ErrorKind::config);
}

TEST(Manifest, LoadResolvesRelativePaths) {
  testutil::TempDir dir("manifest");
  text::write_file(dir / "exp.ini", kMinimal);
  const auto m = load_manifest(dir / "exp.ini");
  EXPECT_EQ(m.resolve(m.telemetry.replay_path), dir / "trace.csv");
  EXPECT_EQ(m.resolve("/abs/x"), std::filesystem::path("/abs/x"));
  EXPECT_THROW(load_manifest(dir / "missing.ini"), Error);
}

TEST(Manifest, GemmConfigCarriesPattern) {
  const auto m = parse_manifest(kMinimal);
  const auto c = m.gemm_config();
  EXPECT_EQ(c.n_dim, 64u);
  EXPECT_EQ(c.pattern, m.pattern);
  EXPECT_EQ(c.reps, m.reps);
}

TEST(Manifest, SpecEntries) {
  const auto s = parse_spec_entry("sparse_diagonal/fixed_common/3", 64, 5);
  EXPECT_EQ(s.family, Family::sparse_diagonal);
  EXPECT_EQ(s.value_mode, ValueMode::fixed_common);
  EXPECT_EQ(s.level, 3u);
  EXPECT_EQ(s.n_dim, 64u);
  EXPECT_EQ(s.seed, 5u);
  EXPECT_EQ(parse_spec_entry("baseline_random", 64, 0).family, Family::baseline_random);
  EXPECT_THROW(parse_spec_entry("block_rowcol/independent/3/9", 64, 0), Error);
  EXPECT_THROW(parse_spec_entry("block_rowcol/sometimes", 64, 0), Error);
}

TEST(Records, RunRecordRoundTrip) {
  gemm::RunRecord r;
  r.config.n_dim = 256;
  r.config.reps = 3;
  r.config.alpha = 0.1;
  r.config.pattern = {Family::sparse_rowcol, 256, 4, ValueMode::fixed_common, 17};
  r.warmup = {60.25, 7};
  r.measured = {1.0 / 3.0, 3};
  r.total_flops = gemm::flop_count(256, 3);
  r.flop_rate = r.total_flops / r.measured.wall_seconds;
  r.c_checksum = {12.5, 0x4029000000000000ULL};
  r.timeline_ids = {"gpu", "rapl"};
  r.node_id = "nid002";
  r.run_index = 2;
  r.telemetry_warning = true;
  r.warnings = {"rapl: device gone"};
  r.measured_start_ms = 60012.5;
  r.measured_end_ms = 60345.75;
  r.epoch_unix_ms = 1662026400000;
  r.tdp_w = 400.0;
  r.manifest_digest = "0x0123456789abcdef";
  const auto text1 = records::format_record(r);
  const auto back = records::parse_record(text1);
  EXPECT_EQ(back, r);
  EXPECT_EQ(records::format_record(back), text1);
}

TEST(Records, FindRunDirsSkipsFailedRuns) {
  testutil::TempDir dir("find");
  std::filesystem::create_directories(dir / "b");
  std::filesystem::create_directories(dir / "a" / "nested");
  std::filesystem::create_directories(dir / "c");
  std::filesystem::create_directories(dir / "empty");
  text::write_file(dir / "b" / "record.csv", "");
  text::write_file(dir / "a" / "nested" / "record.csv", "");
  text::write_file(dir / "c" / "record.csv", "");
  text::write_file(dir / "c" / "failed", "phase=experiment\n");
  const std::vector<std::filesystem::path> roots{dir.path()};
  const auto found = records::find_run_dirs(roots);
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(found[0], dir / "a" / "nested");
  EXPECT_EQ(found[1], dir / "b");
}

TEST(Records, RunDirNames) {
  EXPECT_EQ(records::run_dir_name({Family::baseline_fixed, 8, 0, ValueMode::independent, 0}, "nid001", 2),
            "run-baseline_fixed-nid001-r2");
  EXPECT_EQ(records::run_dir_name({Family::block_rowcol, 8, 3, ValueMode::fixed_common, 0}, "local", 0),
            "run-block_rowcol-fixed_common-l3-local-r0");
}
