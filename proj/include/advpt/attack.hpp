#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advpt/dataset.hpp"
#include "advpt/encoder.hpp"
#include "advpt/image.hpp"

namespace advpt {

// Attack objective: push the adversarial embedding away from the clean
// embedding (KL over coordinate softmaxes), or away from the ground-truth
// text embedding (cross-entropy over class scores).
enum class AttackObjective { KlEmbedding, Contrastive };

const char* attack_objective_name(AttackObjective o);
AttackObjective attack_objective_from_name(const std::string& name);

struct AttackConfig {
  double epsilon = 8.0 / 255.0;  // max l-inf perturbation, in [0,1] pixel units
  double alpha = 2.0 / 255.0;    // per-step size, same units
  int iterations = 10;
  AttackObjective objective = AttackObjective::KlEmbedding;
  double temperature_kl = 1.0;
  std::uint64_t seed = 0;
  bool random_start = false;

  void validate() const;  // ErrorKind::Config on violation
};

// Shipped defaults. The KL objective has a flat start (the divergence and
// its gradient vanish at delta = 0), so both default configs enable the
// uniform random start inside the ball.
AttackConfig default_bank_attack();  // 10 iterations at eps 8/255, alpha = eps/4
AttackConfig default_eval_attack();  // 40 iterations at eps 16/255, alpha = eps/10

// KL(softmax(e_clean / temp) || softmax(e_adv / temp)).
double kl_embedding_loss(const Eigen::VectorXd& e_adv, const Eigen::VectorXd& e_clean,
                         double temperature);
// Gradient with respect to e_adv.
Eigen::VectorXd kl_embedding_loss_grad(const Eigen::VectorXd& e_adv,
                                       const Eigen::VectorXd& e_clean, double temperature);

// Cross-entropy of the cosine/temperature class distribution at `label`
// (the attack ascends this). text_embeddings: L x K, one column per class.
double contrastive_attack_loss(const Eigen::VectorXd& e_adv,
                               const Eigen::MatrixXd& text_embeddings, int label, double tau);
Eigen::VectorXd contrastive_attack_loss_grad(const Eigen::VectorXd& e_adv,
                                             const Eigen::MatrixXd& text_embeddings, int label,
                                             double tau);

struct AdversarialBatch {
  std::vector<Image> originals;
  std::vector<Image> adversarials;
  std::vector<int> labels;
  AttackConfig config;

  // l-inf bound and pixel range on every element.
  void validate_bounds() const;
};

// Start point of the iteration: x itself, or a seeded uniform draw from the
// ball around x projected into the pixel range. Equals pgd_attack with
// iterations = 0.
Image pgd_start_point(const Image& x, const AttackConfig& cfg);

// Projected gradient descent with signed steps; the perturbation is clipped
// to [-eps, eps] and the iterate to [0, 1] every step. text_embeddings is
// required for the contrastive objective and ignored otherwise.
Image pgd_attack(const DualEncoder& encoder, const Image& x, int label, const AttackConfig& cfg,
                 const Eigen::MatrixXd* text_embeddings = nullptr);

// Element-wise identical to per-image calls where image i uses the seed
// derive_seed(cfg.seed, indices[i]); the per-item seed travels with the
// dataset index, so permuting `indices` permutes the outputs.
AdversarialBatch pgd_attack_batch(const DualEncoder& encoder, const LabeledImageDataset& dataset,
                                  std::span<const int> indices, const AttackConfig& cfg,
                                  const Eigen::MatrixXd* text_embeddings = nullptr,
                                  int workers = 0);

// Parses "8/255" fractions or plain decimals.
double parse_magnitude(const std::string& text);

}  // namespace advpt
