#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "yieldest/imaging.hpp"

namespace yieldest {

/// Row-major run-length encoding of a binary mask. `counts` alternates
/// background and foreground runs and always starts with a (possibly empty)
/// background run.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

/// {"size": [height, width], "counts": [...]}
nlohmann::json rle_to_json(const RleMask& rle);
RleMask rle_from_json(const nlohmann::json& j);

}  // namespace yieldest
