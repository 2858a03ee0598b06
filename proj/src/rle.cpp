#include "yieldest/rle.hpp"

#include "yieldest/errors.hpp"

namespace yieldest {

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle;
  rle.width = mask.width();
  rle.height = mask.height();
  bool current = false;
  std::uint32_t run = 0;
  for (const auto bit : mask.bits()) {
    if ((bit != 0) != current) {
      rle.counts.push_back(run);
      run = 0;
      current = !current;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  BinaryMask mask(rle.width, rle.height);
  long pos = 0;
  const long total = static_cast<long>(rle.width) * rle.height;
  bool value = false;
  for (const auto run : rle.counts) {
    if (pos + static_cast<long>(run) > total) throw ValidationError("RLE runs exceed mask size");
    for (std::uint32_t i = 0; i < run; ++i) mask.set(pos++, value);
    value = !value;
  }
  if (pos != total) throw ValidationError("RLE runs do not cover the mask");
  return mask;
}

nlohmann::json rle_to_json(const RleMask& rle) {
  return {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

RleMask rle_from_json(const nlohmann::json& j) {
  try {
    RleMask rle;
    rle.height = j.at("size").at(0).get<int>();
    rle.width = j.at("size").at(1).get<int>();
    rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    return rle;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed RLE: ") + e.what());
  }
}

}  // namespace yieldest
