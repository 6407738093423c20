#include "gmclab/io.hpp"

#include <chrono>
#include <cstdio>

#include "gmclab/errors.hpp"

namespace gmclab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for digest: " + p.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path), columns_(header.size()) {
  if (!out_) throw ConfigError("cannot open output file: " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ConfigError("csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void CsvWriter::close() {
  if (out_.is_open()) out_.close();
}

namespace {
std::string iso_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}
}  // namespace

RunManifest::RunManifest(nlohmann::json config_echo, std::uint64_t master_seed) {
  doc_["tool"] = "gmclab";
  doc_["version"] = "0.1.0";
  doc_["started_at"] = iso_now();
  doc_["config"] = std::move(config_echo);
  doc_["seed"]["master"] = master_seed;
  doc_["seed"]["scheme"] =
      "stream = fnv1a(experiment tag) xor mix(unit); substream indexes layers; "
      "mt19937_64 seeded from (master, stream, substream); two replicas per "
      "spectral draw (real/imaginary parts)";
  doc_["outputs"] = nlohmann::json::array();
}

void RunManifest::add_output(const std::filesystem::path& p) {
  char digest[20];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(fnv1a64_file(p)));
  doc_["outputs"].push_back({{"file", p.filename().string()},
                             {"fnv1a64", std::string(digest)},
                             {"bytes", std::filesystem::file_size(p)}});
}

void RunManifest::set_note(const std::string& key, const nlohmann::json& value) {
  doc_[key] = value;
}

void RunManifest::write(const std::filesystem::path& dir) {
  doc_["finished_at"] = iso_now();
  std::filesystem::path tmp = dir / "manifest.json.tmp";
  std::filesystem::path final = dir / "manifest.json";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write manifest in " + dir.string());
    out << doc_.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, final);
}

}  // namespace gmclab
