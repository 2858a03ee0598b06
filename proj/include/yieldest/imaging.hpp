#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace yieldest {

/// Axis-aligned pixel rectangle, top-left origin. `w` and `h` are >= 1.
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  long area() const { return static_cast<long>(w) * h; }
  int right() const { return x + w; }   // exclusive
  int bottom() const { return y + h; }  // exclusive
  bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }

  /// Clip to [0,width) x [0,height). Result keeps w,h >= 1 as long as the
  /// box touches the frame; otherwise a 1x1 box at the nearest corner.
  BoundingBox clamped(int width, int height) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double bbox_iou(const BoundingBox& a, const BoundingBox& b);

/// 8-bit sRGB raster, row-major interleaved RGB.
class RgbImage {
 public:
  RgbImage(int width, int height);
  RgbImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& data() const { return pixels_; }

  std::array<std::uint8_t, 3> at(int x, int y) const;
  void set(int x, int y, std::array<std::uint8_t, 3> rgb);

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// CIELAB raster (D65), row-major interleaved L,a,b.
class LabImage {
 public:
  LabImage(int width, int height);
  LabImage(int width, int height, std::vector<double> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  long pixel_count() const { return static_cast<long>(width_) * height_; }
  const std::vector<double>& data() const { return pixels_; }

  const double* at(int x, int y) const { return &pixels_[3 * (static_cast<std::size_t>(y) * width_ + x)]; }
  const double* at(long index) const { return &pixels_[3 * static_cast<std::size_t>(index)]; }

 private:
  int width_;
  int height_;
  std::vector<double> pixels_;
};

struct Lab {
  double l = 0;
  double a = 0;
  double b = 0;
};

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);
LabImage rgb_to_lab(const RgbImage& img);

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool value = false);

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool get(long index) const { return bits_[static_cast<std::size_t>(index)] != 0; }
  void set(long index, bool v) { bits_[static_cast<std::size_t>(index)] = v ? 1 : 0; }

  long count() const;
  BinaryMask crop(const BoundingBox& box) const;

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Component {
  int id = 0;  // 1-based; 0 is background in the label raster
  long pixel_count = 0;
  BoundingBox bbox;
  double centroid_x = 0;
  double centroid_y = 0;
};

struct ComponentSet {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<Component> components;
};

enum class Connectivity { Four = 4, Eight = 8 };

/// Maximal connected foreground regions. Ids follow raster order of each
/// region's first pixel.
ComponentSet connected_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::Eight);

/// Nearest-neighbour resize, for thumbnails only.
RgbImage resize_nearest(const RgbImage& img, int width, int height);

}  // namespace yieldest
