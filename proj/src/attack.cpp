#include "advpt/attack.hpp"

#include <algorithm>
#include <cmath>

#include "advpt/errors.hpp"
#include "advpt/parallel.hpp"
#include "advpt/rng.hpp"

namespace advpt {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd p = (v.array() - v.maxCoeff()).exp();
  return p / p.sum();
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

const char* attack_objective_name(AttackObjective o) {
  return o == AttackObjective::KlEmbedding ? "kl_embedding" : "contrastive";
}

AttackObjective attack_objective_from_name(const std::string& name) {
  if (name == "kl_embedding") return AttackObjective::KlEmbedding;
  if (name == "contrastive") return AttackObjective::Contrastive;
  fail(ErrorKind::Config, "unknown attack objective: " + name);
}

void AttackConfig::validate() const {
  if (epsilon < 0.0 || epsilon > 1.0)
    fail(ErrorKind::Config, "attack: epsilon must be in [0, 1]");
  if (alpha < 0.0) fail(ErrorKind::Config, "attack: alpha must be >= 0");
  if (iterations < 0) fail(ErrorKind::Config, "attack: iterations must be >= 0");
  if (!(temperature_kl > 0.0)) fail(ErrorKind::Config, "attack: temperature_kl must be positive");
}

AttackConfig default_bank_attack() {
  AttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  cfg.alpha = cfg.epsilon / 4.0;
  cfg.iterations = 10;
  cfg.objective = AttackObjective::KlEmbedding;
  cfg.random_start = true;
  return cfg;
}

AttackConfig default_eval_attack() {
  AttackConfig cfg;
  cfg.epsilon = 16.0 / 255.0;
  cfg.alpha = cfg.epsilon / 10.0;
  cfg.iterations = 40;
  cfg.objective = AttackObjective::KlEmbedding;
  cfg.random_start = true;
  return cfg;
}

double kl_embedding_loss(const Eigen::VectorXd& e_adv, const Eigen::VectorXd& e_clean,
                         double temperature) {
  if (e_adv.size() != e_clean.size())
    fail(ErrorKind::Dimension, "kl loss: embedding sizes differ");
  if (!(temperature > 0.0)) fail(ErrorKind::Input, "kl loss: temperature must be positive");
  if (!e_adv.allFinite() || !e_clean.allFinite())
    fail(ErrorKind::Numeric, "kl loss: non-finite embedding");
  Eigen::VectorXd p = softmax(e_clean / temperature);
  Eigen::VectorXd q = softmax(e_adv / temperature);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) kl += p(i) * (std::log(p(i)) - std::log(q(i)));
  return std::max(kl, 0.0);
}

Eigen::VectorXd kl_embedding_loss_grad(const Eigen::VectorXd& e_adv,
                                       const Eigen::VectorXd& e_clean, double temperature) {
  if (e_adv.size() != e_clean.size())
    fail(ErrorKind::Dimension, "kl loss: embedding sizes differ");
  if (!(temperature > 0.0)) fail(ErrorKind::Input, "kl loss: temperature must be positive");
  if (!e_adv.allFinite() || !e_clean.allFinite())
    fail(ErrorKind::Numeric, "kl loss: non-finite embedding");
  Eigen::VectorXd p = softmax(e_clean / temperature);
  Eigen::VectorXd q = softmax(e_adv / temperature);
  return (q - p) / temperature;
}

double contrastive_attack_loss(const Eigen::VectorXd& e_adv,
                               const Eigen::MatrixXd& text_embeddings, int label, double tau) {
  const Eigen::Index K = text_embeddings.cols();
  if (K == 0) fail(ErrorKind::Input, "contrastive loss: no classes");
  if (label < 0 || label >= K) fail(ErrorKind::Input, "contrastive loss: label out of range");
  if (text_embeddings.rows() != e_adv.size())
    fail(ErrorKind::Dimension, "contrastive loss: embedding dims differ");
  if (!(tau > 0.0)) fail(ErrorKind::Input, "contrastive loss: tau must be positive");
  double e_norm = e_adv.norm();
  if (!(e_norm > 0.0)) fail(ErrorKind::Numeric, "contrastive loss: zero-norm embedding");
  Eigen::VectorXd scores(K);
  for (Eigen::Index j = 0; j < K; ++j) {
    double w_norm = text_embeddings.col(j).norm();
    if (!(w_norm > 0.0)) fail(ErrorKind::Numeric, "contrastive loss: zero-norm text embedding");
    scores(j) = e_adv.dot(text_embeddings.col(j)) / (e_norm * w_norm * tau);
  }
  double mx = scores.maxCoeff();
  double lse = mx + std::log((scores.array() - mx).exp().sum());
  return lse - scores(label);
}

Eigen::VectorXd contrastive_attack_loss_grad(const Eigen::VectorXd& e_adv,
                                             const Eigen::MatrixXd& text_embeddings, int label,
                                             double tau) {
  const Eigen::Index K = text_embeddings.cols();
  if (K == 0) fail(ErrorKind::Input, "contrastive loss: no classes");
  if (label < 0 || label >= K) fail(ErrorKind::Input, "contrastive loss: label out of range");
  if (!(tau > 0.0)) fail(ErrorKind::Input, "contrastive loss: tau must be positive");
  double e_norm = e_adv.norm();
  if (!(e_norm > 0.0)) fail(ErrorKind::Numeric, "contrastive loss: zero-norm embedding");
  Eigen::VectorXd e_hat = e_adv / e_norm;
  Eigen::MatrixXd w_hat(text_embeddings.rows(), K);
  Eigen::VectorXd scores(K);
  for (Eigen::Index j = 0; j < K; ++j) {
    double w_norm = text_embeddings.col(j).norm();
    if (!(w_norm > 0.0)) fail(ErrorKind::Numeric, "contrastive loss: zero-norm text embedding");
    w_hat.col(j) = text_embeddings.col(j) / w_norm;
    scores(j) = e_hat.dot(w_hat.col(j)) / tau;
  }
  Eigen::VectorXd p = softmax(scores);
  p(label) -= 1.0;
  Eigen::VectorXd d_ehat = (w_hat * p) / tau;
  return (d_ehat - e_hat * e_hat.dot(d_ehat)) / e_norm;
}

Image pgd_start_point(const Image& x, const AttackConfig& cfg) {
  cfg.validate();
  if (!cfg.random_start || cfg.epsilon == 0.0) return x;
  Rng rng(cfg.seed);
  Image out = x;
  for (double& v : out.data) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
  return clamp01(out);
}

Image pgd_attack(const DualEncoder& encoder, const Image& x, int label, const AttackConfig& cfg,
                 const Eigen::MatrixXd* text_embeddings) {
  cfg.validate();
  if (cfg.objective == AttackObjective::Contrastive && text_embeddings == nullptr)
    fail(ErrorKind::Config, "pgd: contrastive objective requires text embeddings");

  Eigen::VectorXd e_clean;
  if (cfg.objective == AttackObjective::KlEmbedding && cfg.iterations > 0)
    e_clean = encoder.encode_image(x);

  Image adv = pgd_start_point(x, cfg);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    auto [e_adv, pullback] = encoder.encode_image_vjp(adv);
    Eigen::VectorXd grad_e =
        cfg.objective == AttackObjective::KlEmbedding
            ? kl_embedding_loss_grad(e_adv, e_clean, cfg.temperature_kl)
            : contrastive_attack_loss_grad(e_adv, *text_embeddings, label, encoder.temperature());
    Eigen::VectorXd grad_x = pullback(grad_e);
    for (std::size_t i = 0; i < adv.data.size(); ++i) {
      double stepped = adv.data[i] + cfg.alpha * sign_of(grad_x(static_cast<Eigen::Index>(i)));
      double delta = std::clamp(stepped - x.data[i], -cfg.epsilon, cfg.epsilon);
      adv.data[i] = std::clamp(x.data[i] + delta, 0.0, 1.0);
    }
  }

  for (std::size_t i = 0; i < adv.data.size(); ++i) {
    double delta = std::abs(adv.data[i] - x.data[i]);
    if (!(delta <= cfg.epsilon + 1e-6) || adv.data[i] < 0.0 || adv.data[i] > 1.0)
      fail(ErrorKind::Numeric, "pgd: projection invariant violated");
  }
  return adv;
}

void AdversarialBatch::validate_bounds() const {
  if (originals.size() != adversarials.size() || originals.size() != labels.size())
    fail(ErrorKind::Input, "adversarial batch: size mismatch");
  for (std::size_t i = 0; i < originals.size(); ++i) {
    if (max_abs_diff(originals[i], adversarials[i]) > config.epsilon + 1e-6)
      fail(ErrorKind::Numeric, "adversarial batch: l-inf bound violated at index " + std::to_string(i));
    for (double v : adversarials[i].data)
      if (v < 0.0 || v > 1.0)
        fail(ErrorKind::Numeric, "adversarial batch: pixel range violated at index " + std::to_string(i));
  }
}

AdversarialBatch pgd_attack_batch(const DualEncoder& encoder, const LabeledImageDataset& dataset,
                                  std::span<const int> indices, const AttackConfig& cfg,
                                  const Eigen::MatrixXd* text_embeddings, int workers) {
  cfg.validate();
  AdversarialBatch batch;
  batch.config = cfg;
  batch.originals.resize(indices.size());
  batch.adversarials.resize(indices.size());
  batch.labels.resize(indices.size());
  parallel_for(static_cast<int>(indices.size()), [&](int i) {
    int idx = indices[static_cast<std::size_t>(i)];
    if (idx < 0 || static_cast<std::size_t>(idx) >= dataset.size())
      fail(ErrorKind::Input, "attack batch: dataset index out of range at position " + std::to_string(i));
    AttackConfig per_item = cfg;
    per_item.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(idx));
    try {
      const Image& x = dataset.images[static_cast<std::size_t>(idx)];
      Image adv = pgd_attack(encoder, x, dataset.labels[static_cast<std::size_t>(idx)], per_item,
                             text_embeddings);
      batch.originals[static_cast<std::size_t>(i)] = x;
      batch.adversarials[static_cast<std::size_t>(i)] = std::move(adv);
      batch.labels[static_cast<std::size_t>(i)] = dataset.labels[static_cast<std::size_t>(idx)];
    } catch (const Error& e) {
      fail(e.kind(), "attack batch: image index " + std::to_string(idx) + ": " + e.what());
    }
  }, workers);
  return batch;
}

double parse_magnitude(const std::string& text) {
  auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      double num = std::stod(text.substr(0, slash));
      double den = std::stod(text.substr(slash + 1));
      if (den == 0.0) fail(ErrorKind::Config, "magnitude denominator is zero: " + text);
      return num / den;
    }
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) fail(ErrorKind::Config, "not a number: " + text);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "cannot parse magnitude: " + text);
  }
}

}  // namespace advpt
