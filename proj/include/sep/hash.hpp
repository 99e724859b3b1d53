#pragma once

#include <cstdint>
#include <string_view>

namespace sep {

// FNV-1a, fixed across platforms so hashed feature indices are stable.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0) {
    std::uint64_t hash = 14695981039346656037ULL ^ seed;
    for (char c : data) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ULL;
    }
    return hash;
}

} // namespace sep
