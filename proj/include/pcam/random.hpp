#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pcam {

using Rng = std::mt19937_64;

// Independent stream for a (seed, purpose) pair, so that adding a new random
// consumer never shifts the draws of an existing one.
inline Rng make_rng(std::uint64_t seed, std::string_view purpose)
{
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char c : purpose) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	std::seed_seq seq{static_cast<std::uint32_t>(seed),
	                  static_cast<std::uint32_t>(seed >> 32),
	                  static_cast<std::uint32_t>(h),
	                  static_cast<std::uint32_t>(h >> 32)};
	return Rng(seq);
}

}  // namespace pcam
