#include "advpt/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "advpt/errors.hpp"
#include "advpt/rng.hpp"

namespace advpt {

void LabeledImageDataset::validate() const {
  if (images.size() != labels.size())
    fail(ErrorKind::Input, "dataset: image/label count mismatch");
  if (class_names.empty()) fail(ErrorKind::Input, "dataset: no class names");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes())
      fail(ErrorKind::Input, "dataset: label out of range at index " + std::to_string(i));
    if (!images[i].same_shape(images[0]))
      fail(ErrorKind::Input, "dataset: inconsistent image shapes");
    validate_pixels(images[i], "dataset image " + std::to_string(i));
  }
}

const char* synth_style_name(SynthStyle s) {
  switch (s) {
    case SynthStyle::Standard: return "standard";
    case SynthStyle::Jitter: return "jitter";
    case SynthStyle::Sketch: return "sketch";
  }
  return "standard";
}

SynthStyle synth_style_from_name(const std::string& name) {
  if (name == "standard") return SynthStyle::Standard;
  if (name == "jitter") return SynthStyle::Jitter;
  if (name == "sketch") return SynthStyle::Sketch;
  fail(ErrorKind::Config, "unknown synthetic style: " + name);
}

namespace {

struct Palette {
  const char* name;
  double r, g, b;
};

constexpr std::array<Palette, 4> kColors = {{
    {"red", 0.85, 0.15, 0.15},
    {"green", 0.12, 0.78, 0.20},
    {"blue", 0.15, 0.28, 0.85},
    {"yellow", 0.88, 0.82, 0.12},
}};

constexpr std::array<const char*, 4> kShapes = {"circle", "square", "triangle", "cross"};

// Signed distance from the shape boundary, negative inside. Coordinates are
// relative to the shape center in pixels.
double shape_distance(int shape, double dx, double dy, double radius) {
  switch (shape) {
    case 0:  // circle
      return std::sqrt(dx * dx + dy * dy) - radius;
    case 1:  // square
      return std::max(std::abs(dx), std::abs(dy)) - radius * 0.85;
    case 2: {  // upward triangle
      double r = radius * 1.05;
      double d = dy - r * 0.55;                          // bottom edge
      d = std::max(d, 0.5 * (-dy - r * 0.55) + 0.866 * dx);   // right edge
      d = std::max(d, 0.5 * (-dy - r * 0.55) - 0.866 * dx);   // left edge
      return d;
    }
    case 3: {  // plus sign
      double bar = radius * 0.34;
      double dh = std::max(std::abs(dx) - radius, std::abs(dy) - bar);
      double dv = std::max(std::abs(dy) - radius, std::abs(dx) - bar);
      return std::min(dh, dv);
    }
    default:
      return 1e9;
  }
}

Image render_sample(int label, const SynthConfig& cfg, Rng& rng) {
  const int n = cfg.image_size;
  const int color_idx = label % static_cast<int>(kColors.size());
  const int shape_idx = label / static_cast<int>(kColors.size());
  const Palette& base = kColors[static_cast<std::size_t>(color_idx)];

  const bool sketch = cfg.style == SynthStyle::Sketch;
  double bg = sketch ? 0.88 : 0.16;
  double bg_noise = sketch ? 0.03 : 0.05;

  double cx = n / 2.0 + rng.uniform(-0.14, 0.14) * n;
  double cy = n / 2.0 + rng.uniform(-0.14, 0.14) * n;
  double radius = n * rng.uniform(0.24, 0.34);

  double cr = base.r + rng.uniform(-0.07, 0.07);
  double cg = base.g + rng.uniform(-0.07, 0.07);
  double cb = base.b + rng.uniform(-0.07, 0.07);
  if (sketch) {
    // desaturate toward the light background but keep the hue readable
    cr = 0.55 * cr + 0.35;
    cg = 0.55 * cg + 0.35;
    cb = 0.55 * cb + 0.35;
  }

  double brightness = 1.0, tint_r = 1.0, tint_g = 1.0, tint_b = 1.0;
  if (cfg.style == SynthStyle::Jitter) {
    brightness = rng.uniform(0.65, 1.05);
    tint_r = rng.uniform(0.85, 1.15);
    tint_g = rng.uniform(0.85, 1.15);
    tint_b = rng.uniform(0.85, 1.15);
  }

  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double noise = rng.uniform(-bg_noise, bg_noise);
      double d = shape_distance(shape_idx, x + 0.5 - cx, y + 0.5 - cy, radius);
      // soft edge over one pixel for stable gradients and resampling
      double cover;
      if (sketch) {
        double band = 1.1;
        cover = std::clamp(1.0 - (std::abs(d) - band * 0.5) / 0.9, 0.0, 1.0);
      } else {
        cover = std::clamp(0.5 - d / 1.2, 0.0, 1.0);
      }
      double pr = (bg + noise) * (1.0 - cover) + cr * cover;
      double pg = (bg + noise) * (1.0 - cover) + cg * cover;
      double pb = (bg + noise) * (1.0 - cover) + cb * cover;
      img.at(y, x, 0) = std::clamp(pr * brightness * tint_r, 0.0, 1.0);
      img.at(y, x, 1) = std::clamp(pg * brightness * tint_g, 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(pb * brightness * tint_b, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

std::vector<std::string> synthetic_class_names(int num_classes) {
  const int max_k = static_cast<int>(kColors.size() * kShapes.size());
  if (num_classes < 2 || num_classes > max_k)
    fail(ErrorKind::Config, "synthetic dataset: num_classes must be in [2, " + std::to_string(max_k) + "]");
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    int color_idx = k % static_cast<int>(kColors.size());
    int shape_idx = k / static_cast<int>(kColors.size());
    names.push_back(std::string(kColors[static_cast<std::size_t>(color_idx)].name) + " " + kShapes[static_cast<std::size_t>(shape_idx)]);
  }
  return names;
}

LabeledImageDataset make_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.image_size < 8) fail(ErrorKind::Config, "synthetic dataset: image_size must be >= 8");
  if (cfg.per_class < 1) fail(ErrorKind::Config, "synthetic dataset: per_class must be >= 1");
  LabeledImageDataset ds;
  ds.class_names = synthetic_class_names(cfg.num_classes);
  ds.images.reserve(static_cast<std::size_t>(cfg.num_classes) * static_cast<std::size_t>(cfg.per_class));
  for (int k = 0; k < cfg.num_classes; ++k) {
    for (int i = 0; i < cfg.per_class; ++i) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k) * 131071ULL + static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(cfg.style)));
      ds.images.push_back(render_sample(k, cfg, rng));
      ds.labels.push_back(k);
    }
  }
  return ds;
}

}  // namespace advpt
