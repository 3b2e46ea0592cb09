#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fcid {

using Rng = std::mt19937_64;

/// Independent generator for the stream identified by (seed, ids...). Results
/// therefore do not depend on which thread runs which job.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {})
{
    std::vector<std::uint32_t> words;
    words.reserve(2 * (stream.size() + 1));
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto s : stream) push(s);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace fcid
