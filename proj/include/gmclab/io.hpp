#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace gmclab {

/// Shortest round-trip decimal formatting; stable across runs.
std::string format_double(double v);

std::uint64_t fnv1a64_file(const std::filesystem::path& p);

/// Plain CSV writer; all numbers go through format_double.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

/// Reproducibility record: config echo, seed scheme, output digests.
/// Written atomically (tmp + rename) as the last act of a run.
class RunManifest {
 public:
  RunManifest(nlohmann::json config_echo, std::uint64_t master_seed);

  void add_output(const std::filesystem::path& p);
  void set_note(const std::string& key, const nlohmann::json& value);
  void write(const std::filesystem::path& dir);

  const nlohmann::json& json() const { return doc_; }

 private:
  nlohmann::json doc_;
};

}  // namespace gmclab
