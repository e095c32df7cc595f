#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "advpt/attack.hpp"
#include "advpt/dataset.hpp"
#include "advpt/encoder.hpp"
#include "advpt/image.hpp"

namespace advpt {

enum class DefenseKind { Identity, Rescale, SuperResolution };

const char* defense_kind_name(DefenseKind k);
DefenseKind defense_kind_from_name(const std::string& name);

// Inference-time input denoising h(x). Outputs keep the input shape and the
// [0, 1] range.
struct DefenseTransform {
  DefenseKind kind = DefenseKind::Identity;
  // rescale: resample to a random size in [scale_low, scale_high] x input
  // and back (seeded)
  double scale_low = 0.9;
  double scale_high = 1.1;
  // super_resolution: bilinear upscale by `upscale_factor`, smoothing of
  // strength `sigma`, downsample back
  int upscale_factor = 2;
  double sigma = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
};

Image apply_defense(const DefenseTransform& d, const Image& x);

// Per-item variant for batches: the random draw is keyed by (seed, item_id)
// so results are order-independent.
Image apply_defense_indexed(const DefenseTransform& d, const Image& x, std::uint64_t item_id);

// Accuracy of argmax cosine classification after optionally attacking each
// image (attack == nullptr evaluates clean inputs) and then applying the
// defense. The attack runs on the undefended encoder; the transform is
// applied only at evaluation time.
double evaluate_defended(const DualEncoder& encoder, const Eigen::MatrixXd& text_embeddings,
                         double tau, const LabeledImageDataset& dataset,
                         const AttackConfig* attack, const DefenseTransform& d, int workers = 0);

}  // namespace advpt
