#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logex {

// Shortest decimal text that parses back to the identical double.
std::string FormatReal(double value);

// Strict decimal parse of the whole of `text`; throws FormatError on garbage,
// trailing characters, or non-finite results.
double ParseReal(std::string_view text);
std::uint64_t ParseUnsigned(std::string_view text);

std::vector<std::string_view> Split(std::string_view text, char separator);
std::string_view Trim(std::string_view text);

// Pairwise (tree) summation with a fixed split rule: ranges of at most
// kPairwiseBlock values are summed left to right, longer ranges are split at
// size/2 and the two halves added. The association order depends only on the
// length of the input, so chunked parallel producers of the same term vector
// always reproduce the sequential result bit for bit.
inline constexpr std::size_t kPairwiseBlock = 8;
double PairwiseSum(std::span<const double> values);

// Worker count from LOGEX_THREADS, defaulting to 1. Values < 1 are treated as 1.
std::size_t DefaultThreadCount();

// Runs body(i) for i in [0, count) split into contiguous chunks over
// `threads` workers. body must only write to slots it owns.
void ParallelFor(std::size_t count, std::size_t threads,
                 const std::function<void(std::size_t)>& body);

std::string ReadFile(const std::string& path);

// Writes to `path`.tmp then renames over `path`.
void WriteFileAtomic(const std::string& path, std::string_view content);

std::string Sha256Hex(std::string_view bytes);

// SplitMix64 finalizer; the mixing primitive used for feature crossing and
// seed derivation.
constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
constexpr double UnitInterval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace logex
