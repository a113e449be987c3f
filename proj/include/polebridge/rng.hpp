#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace polebridge {

// Independent random streams keyed by (master seed, path index, tag). Tags
// separate consumers that must not share draws, e.g. the 1-d Bessel oracle and
// the manifold paths. Free and bridge paths deliberately share tag 0 so paired
// estimators see common random numbers.
enum class StreamTag : std::uint32_t { path = 0, bessel = 1, sampling = 2 };

using PathRng = std::mt19937_64;

// Ziggurat sampler; about twice as fast as std::normal_distribution here.
using StandardNormal = boost::random::normal_distribution<double>;

inline PathRng path_stream(std::uint64_t seed, std::uint64_t path_index, StreamTag tag = StreamTag::path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path_index), static_cast<std::uint32_t>(path_index >> 32),
                    static_cast<std::uint32_t>(tag), 0x9e3779b9u};
  return PathRng(seq);
}

}  // namespace polebridge
