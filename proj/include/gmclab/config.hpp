#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace gmclab {

/// Run configuration: one structured file, CLI flags win over file values.
struct ExperimentConfig {
  struct Kernel {
    std::string mollifier = "bump";
    int table_resolution = 4096;
  } kernel;

  struct Field {
    int n = 64;
    int pad_factor = 2;
    double delta = 0.25;
    double t = 2.0;
  } field;

  struct Gmc {
    double alpha = 1.0;
    double gamma = 1.5;
  } gmc;

  std::uint64_t seed = 12345;
  std::size_t replicas = 10000;
  int workers = 1;

  nlohmann::json experiment = nlohmann::json::object();  // subcommand-specific

  static ExperimentConfig from_file(const std::filesystem::path& p);
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Checks every module precondition reachable from the config; throws
  /// ConfigError with a precise message. Returns a human-readable report
  /// (parameter ranges, grid/scale coupling, memory estimate).
  std::string validate() const;
};

}  // namespace gmclab
