#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epower/commands.hpp"
#include "epower/error.hpp"
#include "epower/manifest.hpp"
#include "epower/text.hpp"

namespace fs = std::filesystem;
using namespace epower;

namespace {

struct Globals {
  std::string manifest_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> interval_ms;
  std::optional<std::size_t> max_n;
};

commands::Overrides overrides_from(const Globals& g) {
  commands::Overrides o;
  if (!g.out.empty()) o.out = g.out;
  o.seed = g.seed;
  o.interval_ms = g.interval_ms;
  o.max_n = g.max_n;
  return o;
}

manifest::ExperimentManifest load(const Globals& g) {
  if (g.manifest_path.empty()) fail(ErrorKind::config, "this command needs --manifest <path>");
  return commands::apply_overrides(manifest::load_manifest(g.manifest_path), overrides_from(g));
}

fs::path require_out(const Globals& g, std::string_view command) {
  if (g.out.empty()) fail(ErrorKind::config, std::string(command) + " needs --out <dir>");
  return g.out;
}

void print_lines(const commands::Report& report) {
  for (const auto& line : report.lines) std::cout << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-entropy DGEMM power benchmarking toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--manifest", g.manifest_path, "Experiment manifest (INI)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Override [pattern] seed");
  app.add_option("--interval-ms", g.interval_ms, "Override telemetry sampling interval");
  app.add_option("--max-n", g.max_n, "Override the model simulation budget");

  bool dry_run = false;
  auto* run = app.add_subcommand("run", "Run repetitions of the manifest's pattern");
  run->add_flag("--dry-run", dry_run, "Validate and print the plan without running");

  auto* sweep = app.add_subcommand("sweep", "Run the pattern family across levels and value modes");
  sweep->add_flag("--dry-run", dry_run, "Validate and print the plan without running");

  std::vector<std::string> inputs;
  auto* replay = app.add_subcommand("replay", "Rebuild summaries from recorded run directories");
  replay->add_option("inputs", inputs, "Directories searched for run records")->required();

  auto* score = app.add_subcommand("score", "Score patterns with the bit-toggle model");
  auto* fixtures = app.add_subcommand("fixtures", "Write the embedded published measurements as runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    if (*run || *sweep) {
      const auto m = load(g);
      const auto registry = commands::registry_for(m);
      if (dry_run) {
        auto planned = m;
        if (*sweep && !planned.sweep) planned.sweep = manifest::SweepSection{};
        std::cout << commands::describe_plan(planned, registry);
        return 0;
      }
      if (*run) {
        const auto result = commands::cmd_run(m, registry);
        print_lines(result.report);
        std::cout << "output=" << commands::output_dir(m).string() << '\n';
        return 0;
      }
      const auto result = commands::cmd_sweep(m, registry);
      if (result.report) print_lines(*result.report);
      std::cout << "output=" << commands::output_dir(m).string() << '\n';
      for (const auto& f : result.failed) {
        std::cerr << "epower: level " << f.spec.level << " ("
                  << patterns::to_string(f.spec.value_mode) << ") failed: " << f.message << '\n';
      }
      if (!result.failed.empty()) return exit_code(result.failed.front().kind);
      return 0;
    }
    if (*replay) {
      std::vector<fs::path> roots(inputs.begin(), inputs.end());
      const auto out = require_out(g, "replay");
      print_lines(commands::cmd_replay(roots, out));
      return 0;
    }
    if (*score) {
      const auto m = load(g);
      const fs::path out = g.out.empty() ? commands::output_dir(m) : fs::path(g.out);
      const auto result = commands::cmd_score(m, out);
      std::cout << commands::format_ranking(result);
      return 0;
    }
    if (*fixtures) {
      const auto out = require_out(g, "fixtures");
      const auto n = commands::cmd_fixtures(out);
      std::cout << "fixture_runs=" << n << "\noutput=" << out.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "epower: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "epower: error: " << e.what() << '\n';
    return exit_code(ErrorKind::resource);
  }
  return 0;
}
