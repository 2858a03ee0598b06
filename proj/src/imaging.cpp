#include "yieldest/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "yieldest/errors.hpp"

namespace yieldest {

namespace {

// sRGB primaries to XYZ, D65.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
// Row sums of the matrix above, so that white maps to a = b = 0.
constexpr double kWhiteX = 0.4124564 + 0.3575761 + 0.1804375;
constexpr double kWhiteY = 0.2126729 + 0.7151522 + 0.0721750;
constexpr double kWhiteZ = 0.0193339 + 0.1191920 + 0.9503041;

constexpr double kDelta = 6.0 / 29.0;

struct LinearTable {
  std::array<double, 256> v{};
  LinearTable() {
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      v[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
  }
};

const LinearTable& linear_table() {
  static const LinearTable table;
  return table;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3 * kDelta * kDelta) + 4.0 / 29.0;
}

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw ValidationError("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

}  // namespace

BoundingBox BoundingBox::clamped(int width, int height) const {
  const int x0 = std::clamp(x, 0, width - 1);
  const int y0 = std::clamp(y, 0, height - 1);
  const int x1 = std::clamp(right(), x0 + 1, width);
  const int y1 = std::clamp(bottom(), y0 + 1, height);
  return {x0, y0, x1 - x0, y1 - y0};
}

double bbox_iou(const BoundingBox& a, const BoundingBox& b) {
  const long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const long inter = ix * iy;
  if (inter == 0) return 0.0;
  const long uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RgbImage::RgbImage(int width, int height)
    : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ValidationError("RGB buffer length does not match dimensions");
  }
}

std::array<std::uint8_t, 3> RgbImage::at(int x, int y) const {
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width_ + x);
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void RgbImage::set(int x, int y, std::array<std::uint8_t, 3> rgb) {
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width_ + x);
  pixels_[i] = rgb[0];
  pixels_[i + 1] = rgb[1];
  pixels_[i + 2] = rgb[2];
}

LabImage::LabImage(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
}

LabImage::LabImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ValidationError("LAB buffer length does not match dimensions");
  }
}

Lab srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const auto& lin = linear_table().v;
  const double r = lin[r8], g = lin[g8], b = lin[b8];
  const double x = kRgbToXyz[0][0] * r + kRgbToXyz[0][1] * g + kRgbToXyz[0][2] * b;
  const double y = kRgbToXyz[1][0] * r + kRgbToXyz[1][1] * g + kRgbToXyz[1][2] * b;
  const double z = kRgbToXyz[2][0] * r + kRgbToXyz[2][1] * g + kRgbToXyz[2][2] * b;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  Lab out;
  out.l = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
  out.a = std::clamp(500.0 * (fx - fy), -128.0, 127.0);
  out.b = std::clamp(200.0 * (fy - fz), -128.0, 127.0);
  return out;
}

LabImage rgb_to_lab(const RgbImage& img) {
  std::vector<double> out(img.data().size());
  const auto& in = img.data();
  for (std::size_t i = 0; i < in.size(); i += 3) {
    const Lab lab = srgb_to_lab(in[i], in[i + 1], in[i + 2]);
    out[i] = lab.l;
    out[i + 1] = lab.a;
    out[i + 2] = lab.b;
  }
  return LabImage(img.width(), img.height(), std::move(out));
}

BinaryMask::BinaryMask(int width, int height, bool value)
    : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, value ? 1 : 0);
}

long BinaryMask::count() const {
  return static_cast<long>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::crop(const BoundingBox& box) const {
  const BoundingBox b = box.clamped(width_, height_);
  BinaryMask out(b.w, b.h);
  for (int y = 0; y < b.h; ++y) {
    for (int x = 0; x < b.w; ++x) out.set(x, y, get(b.x + x, b.y + y));
  }
  return out;
}

ComponentSet connected_components(const BinaryMask& mask, Connectivity connectivity) {
  ComponentSet out;
  out.width = mask.width();
  out.height = mask.height();
  out.labels.assign(static_cast<std::size_t>(mask.width()) * mask.height(), 0);
  if (mask.width() == 0) return out;

  const int w = mask.width();
  const int h = mask.height();
  const bool eight = connectivity == Connectivity::Eight;
  std::vector<long> stack;

  for (long start = 0; start < static_cast<long>(out.labels.size()); ++start) {
    if (!mask.get(start) || out.labels[start] != 0) continue;
    const int id = static_cast<int>(out.components.size()) + 1;
    Component comp;
    comp.id = id;
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    double sx = 0, sy = 0;

    out.labels[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const long p = stack.back();
      stack.pop_back();
      const int px = static_cast<int>(p % w);
      const int py = static_cast<int>(p / w);
      ++comp.pixel_count;
      sx += px;
      sy += py;
      x0 = std::min(x0, px);
      y0 = std::min(y0, py);
      x1 = std::max(x1, px);
      y1 = std::max(y1, py);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (!eight && dx != 0 && dy != 0) continue;
          const int nx = px + dx, ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const long q = static_cast<long>(ny) * w + nx;
          if (mask.get(q) && out.labels[q] == 0) {
            out.labels[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    comp.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    comp.centroid_x = sx / static_cast<double>(comp.pixel_count);
    comp.centroid_y = sy / static_cast<double>(comp.pixel_count);
    out.components.push_back(comp);
  }
  return out;
}

RgbImage resize_nearest(const RgbImage& img, int width, int height) {
  RgbImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1, static_cast<int>(static_cast<long>(y) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>(static_cast<long>(x) * img.width() / width));
      out.set(x, y, img.at(sx, sy));
    }
  }
  return out;
}

}  // namespace yieldest
