#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tstokes {

// Seeds are split per named stream so that adding a consumer never shifts
// the numbers drawn by another one.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t counter) noexcept;

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::string_view stream) {
  return Engine(derive_seed(master, stream));
}

}  // namespace tstokes
