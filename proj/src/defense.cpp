#include "advpt/defense.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "advpt/errors.hpp"
#include "advpt/parallel.hpp"
#include "advpt/prompt.hpp"
#include "advpt/rng.hpp"

namespace advpt {

const char* defense_kind_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::Identity: return "identity";
    case DefenseKind::Rescale: return "rescale";
    case DefenseKind::SuperResolution: return "super_resolution";
  }
  return "identity";
}

DefenseKind defense_kind_from_name(const std::string& name) {
  if (name == "identity" || name == "none") return DefenseKind::Identity;
  if (name == "rescale") return DefenseKind::Rescale;
  if (name == "super_resolution" || name == "super") return DefenseKind::SuperResolution;
  fail(ErrorKind::Config, "unknown defense: " + name);
}

void DefenseTransform::validate() const {
  if (kind == DefenseKind::Rescale) {
    if (!(scale_low > 0.0) || !(scale_high > 0.0) || scale_low > scale_high)
      fail(ErrorKind::Config, "rescale defense: invalid scale range");
  }
  if (kind == DefenseKind::SuperResolution) {
    if (upscale_factor < 1) fail(ErrorKind::Config, "super_resolution defense: factor must be >= 1");
    if (sigma < 0.0 || sigma > 1.0)
      fail(ErrorKind::Config, "super_resolution defense: sigma must be in [0, 1]");
  }
}

std::string DefenseTransform::describe() const {
  std::ostringstream os;
  os << defense_kind_name(kind);
  if (kind == DefenseKind::Rescale) os << "[" << scale_low << "," << scale_high << "]";
  if (kind == DefenseKind::SuperResolution) os << "[x" << upscale_factor << ",sigma=" << sigma << "]";
  return os.str();
}

namespace {

Image apply_with_rng(const DefenseTransform& d, const Image& x, Rng& rng) {
  switch (d.kind) {
    case DefenseKind::Identity:
      return x;
    case DefenseKind::Rescale: {
      double s = rng.uniform(d.scale_low, d.scale_high);
      int h = std::max(1, static_cast<int>(std::lround(x.height * s)));
      int w = std::max(1, static_cast<int>(std::lround(x.width * s)));
      return clamp01(resize_bilinear(resize_bilinear(x, h, w), x.height, x.width));
    }
    case DefenseKind::SuperResolution: {
      Image up = resize_bilinear(x, x.height * d.upscale_factor, x.width * d.upscale_factor);
      Image smoothed = smooth3(up, d.sigma);
      return clamp01(resize_bilinear(smoothed, x.height, x.width));
    }
  }
  return x;
}

}  // namespace

Image apply_defense(const DefenseTransform& d, const Image& x) {
  d.validate();
  validate_pixels(x, "apply_defense");
  Rng rng(d.seed);
  return apply_with_rng(d, x, rng);
}

Image apply_defense_indexed(const DefenseTransform& d, const Image& x, std::uint64_t item_id) {
  d.validate();
  validate_pixels(x, "apply_defense");
  Rng rng(derive_seed(d.seed, item_id));
  return apply_with_rng(d, x, rng);
}

double evaluate_defended(const DualEncoder& encoder, const Eigen::MatrixXd& text_embeddings,
                         double tau, const LabeledImageDataset& dataset,
                         const AttackConfig* attack, const DefenseTransform& d, int workers) {
  d.validate();
  if (dataset.size() == 0) fail(ErrorKind::Input, "evaluate_defended: empty dataset");
  const int n = static_cast<int>(dataset.size());

  std::vector<Image> inputs(static_cast<std::size_t>(n));
  if (attack != nullptr) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    AdversarialBatch batch = pgd_attack_batch(encoder, dataset, idx, *attack,
                                              &text_embeddings, workers);
    inputs = std::move(batch.adversarials);
  } else {
    inputs = dataset.images;
  }

  Eigen::MatrixXd emb(n, encoder.embed_dim());
  parallel_for(n, [&](int i) {
    Image defended = apply_defense_indexed(d, inputs[static_cast<std::size_t>(i)],
                                           static_cast<std::uint64_t>(i));
    emb.row(i) = encoder.encode_image(defended).transpose();
  }, workers);

  return classification_accuracy(emb, dataset.labels, text_embeddings, tau);
}

}  // namespace advpt
