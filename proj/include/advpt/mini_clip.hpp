#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "advpt/dataset.hpp"
#include "advpt/encoder.hpp"

namespace advpt {

// Desk-scale stand-in for a pretrained dual encoder: a pair of small tanh
// MLPs trained once, deterministically, with a symmetric contrastive
// objective on the synthetic shapes/colors source.
struct MiniClipConfig {
  int embed_dim = 32;   // L
  int token_dim = 16;   // d
  int image_size = 16;  // inputs are image_size x image_size x 3
  std::vector<int> image_hidden = {96, 48};
  std::vector<int> text_hidden = {48};
  int num_classes = 16;
  int train_per_class = 40;
  int test_per_class = 16;
  int train_steps = 900;
  double train_lr = 0.003;
  double initial_logit_scale = 10.0;
  // training-time input jitter: uniform pixel noise and through-resampling
  double aug_noise = 0.03;
  double aug_noise_prob = 0.3;
  double aug_rescale_prob = 0.3;
  SynthStyle style = SynthStyle::Standard;
};

struct MiniClip {
  std::shared_ptr<const MlpDualEncoder> encoder;
  TokenEmbeddingTable table;
  LabeledImageDataset train;
  LabeledImageDataset test;
  MiniClipConfig config;
  std::uint64_t seed = 0;
};

// The 64-word closed vocabulary: shape and color words, prompt words, and
// neutral filler.
const std::vector<std::string>& mini_clip_vocab();

// Deterministic build: synthesize data, train the pair, freeze it. The same
// (seed, config) always yields byte-identical parameters.
MiniClip build_mini_clip(std::uint64_t seed, const MiniClipConfig& config = {});

// Versioned checkpoint container holding the frozen parameters, vocabulary,
// dimensions and build seed. The loader validates the format version, a
// whole-file checksum and the parameter checksum, and regenerates the
// train/test splits from the stored configuration.
void save_checkpoint(const MiniClip& clip, const std::string& path);
MiniClip load_checkpoint(const std::string& path);

}  // namespace advpt
