#ifndef MDLM_RNG_HPP
#define MDLM_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mdlm {

using Rng = std::mt19937_64;

/// Independent stream derived from a root seed and a path of stream ids
/// (chain, patient, imputation, ...). Same inputs give the same stream.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto p : path) push(p);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace mdlm

#endif  // MDLM_RNG_HPP
