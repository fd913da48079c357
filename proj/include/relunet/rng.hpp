#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace relunet {

// One splitmix64 step; used to derive independent stream seeds from (master, index).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s = h ^ (index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL);
    splitmix64(s);
    return splitmix64(s);
}

// 53-bit uniform on [0, 1); spelled out so the stream does not depend on the standard library.
inline double unit_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

enum class InitSampler { uniform, cauchy };

InitSampler sampler_from_string(const std::string& name);
std::string to_string(InitSampler s);

// Initialization number `index` of the run seeded by `master`: uniform on [-radius, radius]^dim,
// or componentwise Cauchy with scale `radius`. Depends only on (master, index), so any prefix of
// a seeded sequence of inits is the same whatever the total count.
std::vector<double> sample_init(std::uint64_t master, std::uint64_t index, std::size_t dim, InitSampler sampler,
                                double radius);

}  // namespace relunet
