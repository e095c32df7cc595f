#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advpt/image.hpp"

namespace advpt {

struct LabeledImageDataset {
  std::vector<Image> images;
  std::vector<int> labels;               // indices into class_names
  std::vector<std::string> class_names;  // size K

  std::size_t size() const { return images.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  void validate() const;  // label range, shape consistency, pixel range
};

// Rendering style for the synthetic shapes-and-colors source. `Jitter`
// shifts brightness and channel balance per image; `Sketch` draws outlines
// in desaturated color on a light background.
enum class SynthStyle { Standard, Jitter, Sketch };

const char* synth_style_name(SynthStyle s);
SynthStyle synth_style_from_name(const std::string& name);

struct SynthConfig {
  int image_size = 16;
  int num_classes = 16;  // drawn from a 4-shape x 4-color palette, 2..16
  int per_class = 16;
  SynthStyle style = SynthStyle::Standard;
  std::uint64_t seed = 0;
};

// Deterministic renderer: class k is a (color, shape) pair and its name is
// "<color> <shape>".
LabeledImageDataset make_synthetic_dataset(const SynthConfig& config);

// Class names available from the synthetic palette, in label order.
std::vector<std::string> synthetic_class_names(int num_classes);

// Class-per-directory ingestion of raster images (png/jpeg/bmp/ppm),
// resized to (size x size x 3) and normalized to [0, 1]. Directory names
// (underscores read as spaces) become class names, sorted lexically.
LabeledImageDataset load_image_folder(const std::string& root, int image_size);

}  // namespace advpt
