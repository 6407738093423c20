#include "gmclab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gmclab/errors.hpp"

namespace gmclab {

namespace {
template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config file: " + p.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("kernel")) {
      maybe(j["kernel"], "mollifier", c.kernel.mollifier);
      maybe(j["kernel"], "table_resolution", c.kernel.table_resolution);
    }
    if (j.contains("field")) {
      maybe(j["field"], "n", c.field.n);
      maybe(j["field"], "pad_factor", c.field.pad_factor);
      maybe(j["field"], "delta", c.field.delta);
      maybe(j["field"], "t", c.field.t);
    }
    if (j.contains("gmc")) {
      maybe(j["gmc"], "alpha", c.gmc.alpha);
      maybe(j["gmc"], "gamma", c.gmc.gamma);
    }
    maybe(j, "seed", c.seed);
    maybe(j, "replicas", c.replicas);
    maybe(j, "workers", c.workers);
    if (j.contains("experiment")) c.experiment = j["experiment"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {
      {"kernel",
       {{"mollifier", kernel.mollifier}, {"table_resolution", kernel.table_resolution}}},
      {"field",
       {{"n", field.n}, {"pad_factor", field.pad_factor}, {"delta", field.delta},
        {"t", field.t}}},
      {"gmc", {{"alpha", gmc.alpha}, {"gamma", gmc.gamma}}},
      {"seed", seed},
      {"replicas", replicas},
      {"workers", workers},
      {"experiment", experiment},
  };
}

std::string ExperimentConfig::validate() const {
  std::ostringstream report;

  if (kernel.mollifier != "bump")
    throw ConfigError("unknown mollifier '" + kernel.mollifier + "' (available: bump)");
  if (kernel.table_resolution < 16) throw ConfigError("kernel.table_resolution must be >= 16");

  const double bound = 2.0;  // sqrt(2d) with d = 2
  if (!(gmc.alpha > 0) || !(gmc.alpha < bound))
    throw ConfigError("alpha = " + std::to_string(gmc.alpha) +
                      " outside (0, sqrt(2d)) = (0, 2) for d = 2");
  if (!(gmc.gamma > 0) || !(gmc.gamma < bound))
    throw ConfigError("gamma = " + std::to_string(gmc.gamma) +
                      " outside (0, sqrt(2d)) = (0, 2) for d = 2");
  if (gmc.alpha == gmc.gamma)
    throw ConfigError("alpha == gamma: the balanced ratio needs distinct parameters "
                      "(gamma - alpha division)");
  report << "parameters: alpha = " << gmc.alpha << ", gamma = " << gmc.gamma
         << " in (0, 2), distinct\n";

  if (field.n < 2 || (field.n & (field.n - 1)) != 0)
    throw ConfigError("field.n must be a power of two >= 2");
  if (field.pad_factor < 2) throw ConfigError("field.pad_factor must be >= 2");
  int padded = field.n * field.pad_factor;
  if ((padded & (padded - 1)) != 0) throw ConfigError("padded grid must be a power of two");
  if (field.delta <= 0) throw ConfigError("field.delta must be > 0");
  if (field.t < 0) throw ConfigError("field.t must be >= 0");

  const double h = 1.0 / field.n;
  const double h_max = std::exp(-field.t) / 4.0;
  if (h > h_max * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "grid too coarse: h = 1/" << field.n << " = " << h
        << " exceeds e^-t/4 = " << h_max << " at t = " << field.t
        << "; need n >= " << static_cast<int>(std::ceil(4.0 * std::exp(field.t)));
    throw ConfigError(msg.str());
  }
  report << "grid: n = " << field.n << " (h = " << h << "), pad = " << field.pad_factor
         << ", resolves t = " << field.t << " (h <= e^-t/4 = " << h_max << ")\n";

  if (replicas < 2) throw ConfigError("replicas must be >= 2");
  if (workers < 1) throw ConfigError("workers must be >= 1");

  // FFT buffers dominate: two complex m^2 arrays per worker
  double mb = 2.0 * padded * padded * 16.0 * workers / (1024.0 * 1024.0);
  double table_mb = 2.0 * padded * padded * 8.0 / (1024.0 * 1024.0);
  report << "memory estimate: " << mb + table_mb << " MiB (" << mb << " workspace + "
         << table_mb << " embedding tables)\n";
  report << "replicas: " << replicas << ", workers: " << workers << ", seed: " << seed
         << "\n";
  return report.str();
}

}  // namespace gmclab
