#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "coreguard/matrix.hpp"

namespace coreguard {

// Input/output pairs an adversary observed at one boundary cut. Only tensors
// that cross the trusted boundary (or that the untrusted side computes itself)
// ever end up here.
struct TraceSet {
  std::string cut;  // "encrypt" (m -> m') or "authorization" (y -> z*pi)
  std::vector<std::pair<Matrix, Matrix>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  // Throws SizeError unless every pair has the shape of the first one.
  void check_consistent() const;
};

inline constexpr const char* kEncryptCut = "encrypt";
inline constexpr const char* kAuthorizationCut = "authorization";

}  // namespace coreguard
