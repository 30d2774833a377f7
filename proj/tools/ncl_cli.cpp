#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ncl/errors.hpp"
#include "ncl/pipeline.hpp"

namespace {

enum Exit { ok = 0, failure = 1, validation = 2, data = 3, dependency = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Citation-informed document embeddings: graph training, triple mining, encoder, evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string stage_dir = "work";
  std::optional<std::uint64_t> seed;

  for (const char* name : {"ingest", "graph-train", "mine", "encode-train", "eval", "all"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    sub->add_option("--config", config_path, "pipeline INI file")->required();
    sub->add_option("--stage-dir", stage_dir, "artifact directory");
    sub->add_option("--seed", seed, "overrides [pipeline] seed");
  }
  std::string fixture_out = "fixture";
  std::uint64_t fixture_seed = 7;
  auto* fixture = app.add_subcommand("fixture", "write the synthetic 2-topic corpus and a config");
  fixture->add_option("--out", fixture_out, "output directory");
  fixture->add_option("--seed", fixture_seed, "fixture seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : validation;
  }

  try {
    if (fixture->parsed()) {
      ncl::write_fixture_bundle(fixture_out, fixture_seed);
      std::cout << "fixture written to " << fixture_out << " (run with --config "
                << (std::filesystem::path(fixture_out) / "pipeline.ini").string() << ")\n";
      return ok;
    }
    const auto* sub = app.get_subcommands().front();
    const ncl::Stage stage = ncl::parse_stage(sub->get_name());
    ncl::PipelineConfig cfg = ncl::PipelineConfig::from_ini(config_path);
    if (seed) cfg.seed = *seed;
    for (const auto& r : ncl::run(stage, cfg, stage_dir, &std::cerr)) {
      for (const auto& a : r.artifacts) {
        std::cout << ncl::to_string(r.stage) << '\t'
                  << (std::filesystem::path(stage_dir) / a).string() << '\n';
      }
    }
    return ok;
  } catch (const ncl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return validation;
  } catch (const ncl::ArgumentError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return validation;
  } catch (const ncl::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << '\n';
    return dependency;
  } catch (const ncl::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failure;
  }
}
