#pragma once

#include <string>
#include <vector>

namespace advpt {

// Dense H x W x C raster, row-major, pixel values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;  // size height*width*channels

  Image() = default;
  Image(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), 0.0) {}

  double& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(ch)];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(ch)];
  }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

// Throws ErrorKind::Input unless all pixels are finite and within [0, 1].
void validate_pixels(const Image& img, const std::string& context);

// Bilinear resample to (out_h, out_w); pixel centers are aligned so that an
// identity-size resample reproduces the input exactly.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// 3x3 binomial smoothing blended with the identity: amount 0 leaves the
// image unchanged, amount 1 applies the full kernel. Borders are clamped.
Image smooth3(const Image& img, double amount);

Image clamp01(const Image& img);

// Element-wise max abs difference; images must share a shape.
double max_abs_diff(const Image& a, const Image& b);

}  // namespace advpt
