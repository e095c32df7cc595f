#include "advpt/image.hpp"

#include <algorithm>
#include <cmath>

#include "advpt/errors.hpp"

namespace advpt {

void validate_pixels(const Image& img, const std::string& context) {
  if (img.height <= 0 || img.width <= 0 || img.channels <= 0 ||
      img.data.size() != static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.channels)) {
    fail(ErrorKind::Input, context + ": malformed image buffer");
  }
  for (double v : img.data) {
    if (!std::isfinite(v)) fail(ErrorKind::Input, context + ": non-finite pixel value");
    if (v < 0.0 || v > 1.0) fail(ErrorKind::Input, context + ": pixel value outside [0,1]");
  }
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) fail(ErrorKind::Input, "resize: target size must be positive");
  Image out(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c) {
        double top = img.at(y0c, x0c, c) * (1.0 - wx) + img.at(y0c, x1c, c) * wx;
        double bot = img.at(y1c, x0c, c) * (1.0 - wx) + img.at(y1c, x1c, c) * wx;
        out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image smooth3(const Image& img, double amount) {
  if (amount == 0.0) return img;
  static const double k[3] = {0.25, 0.5, 0.25};
  Image tmp(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int dx = -1; dx <= 1; ++dx) {
          int xs = std::clamp(x + dx, 0, img.width - 1);
          acc += k[dx + 1] * img.at(y, xs, c);
        }
        tmp.at(y, x, c) = acc;
      }
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          int ys = std::clamp(y + dy, 0, img.height - 1);
          acc += k[dy + 1] * tmp.at(ys, x, c);
        }
        out.at(y, x, c) = (1.0 - amount) * img.at(y, x, c) + amount * acc;
      }
  return out;
}

Image clamp01(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail(ErrorKind::Input, "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace advpt
