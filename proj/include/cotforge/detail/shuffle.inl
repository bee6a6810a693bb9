#pragma once

#include <limits>
#include <random>
#include <utility>

namespace cotforge {

namespace detail {
inline std::uint64_t bounded_draw(std::mt19937_64& gen, std::uint64_t bound) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - (kMax % bound);
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}
}  // namespace detail

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(detail::bounded_draw(gen, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace cotforge
