#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace gmclab {

/// Identifier of an independent, reproducible random stream.
///
/// Streams are addressed by (master_seed, stream, substream). Experiments
/// hash their name into `stream`'s high bits and use the unit (replica-pair)
/// index for the low bits; `substream` separates draws within one unit
/// (layers, increments, auxiliary noise). Distinct coordinates give
/// statistically independent engines; equal coordinates give bit-identical
/// draw sequences.
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t substream = 0;

  [[nodiscard]] RngStream sub(std::uint64_t k) const {
    return RngStream{master_seed, stream, substream * 0x10001ULL + k + 1};
  }

  [[nodiscard]] std::mt19937_64 engine() const;

  [[nodiscard]] std::string path() const;
};

/// FNV-1a hash of an experiment name, used as a stream tag.
std::uint64_t stream_tag(std::string_view name);

/// Stream for unit (replica pair) `unit` of the experiment tagged `tag`.
RngStream unit_stream(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t unit);

/// Buffered standard-normal source backed by one RngStream.
///
/// Raw 64-bit words from the engine are transformed in even-sized batches by
/// the active SIMD kernel (Box-Muller, two words per two normals), so the
/// word consumption order is lane-independent and fully deterministic.
class NormalSource {
 public:
  explicit NormalSource(const RngStream& s) : eng_(s.engine()) {}

  /// Fills out[0..n) with iid N(0,1). Consumes 2*ceil(n/2) words.
  void fill(double* out, std::size_t n);

  double next() {
    double v[2];
    fill(v, 1);
    return v[0];
  }

 private:
  std::mt19937_64 eng_;
  std::optional<double> spill_;
};

}  // namespace gmclab
