#include "gmclab/rng.hpp"

#include <algorithm>

#include "gmclab/simd/kernels.hpp"

namespace gmclab {

std::mt19937_64 RngStream::engine() const {
  std::seed_seq seq{
      static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
      static_cast<std::uint32_t>(stream),      static_cast<std::uint32_t>(stream >> 32),
      static_cast<std::uint32_t>(substream),   static_cast<std::uint32_t>(substream >> 32),
  };
  return std::mt19937_64(seq);
}

std::string RngStream::path() const {
  return std::to_string(master_seed) + "/" + std::to_string(stream) + "/" +
         std::to_string(substream);
}

std::uint64_t stream_tag(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream unit_stream(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t unit) {
  return RngStream{master_seed, tag ^ (unit * 0x9e3779b97f4a7c15ULL + unit), 0};
}

void NormalSource::fill(double* out, std::size_t n) {
  if (spill_ && n) {
    *out++ = *spill_;
    spill_.reset();
    --n;
  }
  constexpr std::size_t kChunk = 4096;
  std::uint64_t buf[kChunk];
  const auto& k = simd::active();
  while (n >= 2) {
    std::size_t take = std::min(n & ~std::size_t{1}, kChunk);
    for (std::size_t i = 0; i < take; ++i) buf[i] = eng_();
    k.normals_from_bits(buf, take, out);
    out += take;
    n -= take;
  }
  if (n) {  // odd tail: draw a pair, keep one
    std::uint64_t w[2] = {eng_(), eng_()};
    double v[2];
    k.normals_from_bits(w, 2, v);
    *out = v[0];
    spill_ = v[1];
  }
}

}  // namespace gmclab
