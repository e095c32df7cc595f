#include "advpt/prompt.hpp"

#include <cmath>
#include <cstring>

#include "advpt/errors.hpp"
#include "advpt/rng.hpp"
#include "advpt/serial.hpp"

namespace advpt {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'T', 'C'};
constexpr std::uint32_t kContextVersion = 1;

// Normalized rows of an n x L matrix; ErrorKind::Numeric on zero norms.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) fail(ErrorKind::Numeric, std::string(what) + ": non-finite embedding");
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double n = m.row(i).norm();
    if (!(n > 0.0)) fail(ErrorKind::Numeric, std::string(what) + ": zero-norm embedding");
    out.row(i) = m.row(i) / n;
  }
  return out;
}

}  // namespace

PromptContext init_prompt_context(int context_length, const TokenEmbeddingTable& table,
                                  const std::vector<std::string>& class_names,
                                  const InitSpec& init) {
  if (context_length < 1) fail(ErrorKind::Input, "prompt context: context length must be >= 1");
  if (class_names.empty()) fail(ErrorKind::Input, "prompt context: no classes");
  if (!(init.stddev >= 0.0)) fail(ErrorKind::Input, "prompt context: stddev must be >= 0");
  PromptContext ctx;
  ctx.init = init;
  ctx.class_names = class_names;
  ctx.V.resize(context_length, table.dim());
  Rng rng(init.seed);
  for (Eigen::Index i = 0; i < ctx.V.rows(); ++i)
    for (Eigen::Index j = 0; j < ctx.V.cols(); ++j) ctx.V(i, j) = rng.normal(0.0, init.stddev);
  ctx.class_tokens.reserve(class_names.size());
  for (const auto& name : class_names) ctx.class_tokens.push_back(table.embed_name(name));
  return ctx;
}

Eigen::MatrixXd encode_prompts(const PromptContext& ctx, const DualEncoder& encoder) {
  if (ctx.token_dim() != encoder.token_dim())
    fail(ErrorKind::Dimension, "encode_prompts: context dim does not match encoder token dim");
  if (!ctx.V.allFinite()) fail(ErrorKind::Numeric, "encode_prompts: non-finite context");
  const int K = ctx.num_classes();
  Eigen::MatrixXd T(encoder.embed_dim(), K);
  for (int j = 0; j < K; ++j) {
    const Eigen::MatrixXd& c = ctx.class_tokens[static_cast<std::size_t>(j)];
    if (c.rows() == 0) fail(ErrorKind::Input, "encode_prompts: empty class token sequence");
    Eigen::MatrixXd seq(ctx.V.rows() + c.rows(), ctx.V.cols());
    seq.topRows(ctx.V.rows()) = ctx.V;
    seq.bottomRows(c.rows()) = c;
    T.col(j) = encoder.encode_text(seq);
  }
  return T;
}

Eigen::MatrixXd fixed_prompt_matrix(const DualEncoder& encoder, const TokenEmbeddingTable& table,
                                    const std::vector<std::string>& class_names,
                                    const std::string& prefix, const std::string& suffix) {
  if (class_names.empty()) fail(ErrorKind::Input, "fixed prompt: no classes");
  Eigen::MatrixXd T(encoder.embed_dim(), static_cast<Eigen::Index>(class_names.size()));
  for (std::size_t j = 0; j < class_names.size(); ++j) {
    std::string text = prefix + " " + class_names[j] + " " + suffix;
    T.col(static_cast<Eigen::Index>(j)) = encoder.encode_text(table.embed_name(text));
  }
  return T;
}

Eigen::MatrixXd predict_prob(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& text,
                             double tau) {
  if (embeddings.cols() != text.rows())
    fail(ErrorKind::Dimension, "predict_prob: embedding dim does not match text matrix");
  if (!(tau > 0.0)) fail(ErrorKind::Input, "predict_prob: tau must be positive");
  Eigen::MatrixXd e_hat = normalize_rows(embeddings, "predict_prob");
  Eigen::MatrixXd w_hat = normalize_rows(text.transpose(), "predict_prob").transpose();
  Eigen::MatrixXd scores = (e_hat * w_hat) / tau;
  Eigen::MatrixXd p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::VectorXd row = scores.row(i);
    Eigen::VectorXd ex = (row.array() - row.maxCoeff()).exp();
    p.row(i) = (ex / ex.sum()).transpose();
  }
  return p;
}

double classification_accuracy(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                               const Eigen::MatrixXd& text, double tau) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    fail(ErrorKind::Input, "accuracy: row/label count mismatch");
  if (labels.empty()) fail(ErrorKind::Input, "accuracy: empty batch");
  Eigen::MatrixXd p = predict_prob(embeddings, text, tau);
  int correct = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    if (static_cast<int>(best) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void TuneConfig::validate() const {
  if (epochs < 0) fail(ErrorKind::Config, "tune: epochs must be >= 0");
  if (batch_size < 1) fail(ErrorKind::Config, "tune: batch size must be >= 1");
  if (lr < 0.0) fail(ErrorKind::Config, "tune: learning rate must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) fail(ErrorKind::Config, "tune: momentum must be in [0, 1)");
  if (tau < 0.0) fail(ErrorKind::Config, "tune: tau must be >= 0");
}

TuneResult tune(const PromptContext& ctx, const AdversarialEmbeddingBank& bank,
                const DualEncoder& encoder, const TuneConfig& cfg) {
  cfg.validate();
  bank.validate();
  if (bank.class_names != ctx.class_names)
    fail(ErrorKind::Input, "tune: bank class set does not match context class set");
  if (ctx.token_dim() != encoder.token_dim())
    fail(ErrorKind::Dimension, "tune: context dim does not match encoder token dim");

  const double tau = cfg.tau > 0.0 ? cfg.tau : encoder.temperature();
  const std::uint64_t text_theta = encoder.text_theta_hash();
  const std::uint64_t image_theta = encoder.image_theta_hash();
  const std::uint64_t image_calls_before =
      encoder.image_forward_count() + encoder.image_backward_count();

  TuneResult result;
  result.context = ctx;
  Eigen::MatrixXd& V = result.context.V;
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(V.rows(), V.cols());
  const int K = ctx.num_classes();
  const Eigen::Index M = V.rows();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr_epoch = 0.5 * cfg.lr * (1.0 + std::cos(M_PI * epoch / cfg.epochs));
    double loss_sum = 0.0;
    std::size_t batch_count = 0;

    for (const MiniBatch& batch : epoch_minibatches(bank, cfg.batch_size, cfg.seed, epoch)) {
      // T = G([V, c_j]) with pullbacks for the context gradient
      Eigen::MatrixXd T(encoder.embed_dim(), K);
      std::vector<TextPullback> pullbacks;
      pullbacks.reserve(static_cast<std::size_t>(K));
      for (int j = 0; j < K; ++j) {
        const Eigen::MatrixXd& c = result.context.class_tokens[static_cast<std::size_t>(j)];
        Eigen::MatrixXd seq(M + c.rows(), V.cols());
        seq.topRows(M) = V;
        seq.bottomRows(c.rows()) = c;
        auto [w, pb] = encoder.encode_text_vjp(seq);
        T.col(j) = w;
        pullbacks.push_back(std::move(pb));
      }

      const Eigen::Index b = batch.embeddings.rows();
      Eigen::MatrixXd e_hat = normalize_rows(batch.embeddings, "tune");
      Eigen::MatrixXd w_raw = T.transpose();  // K x L
      Eigen::MatrixXd w_hat = normalize_rows(w_raw, "tune");
      Eigen::MatrixXd scores = (e_hat * w_hat.transpose()) / tau;  // b x K

      // mean cross-entropy and softmax probabilities
      double loss = 0.0;
      Eigen::MatrixXd p(b, K);
      for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd row = scores.row(i);
        double mx = row.maxCoeff();
        Eigen::VectorXd ex = (row.array() - mx).exp();
        double denom = ex.sum();
        p.row(i) = (ex / denom).transpose();
        loss -= row(batch.labels[static_cast<std::size_t>(i)]) - (mx + std::log(denom));
      }
      loss /= static_cast<double>(b);
      if (!std::isfinite(loss))
        fail(ErrorKind::Divergence, "tune: non-finite loss at epoch " + std::to_string(epoch) +
                                        " batch " + std::to_string(batch_count));
      loss_sum += loss;
      ++batch_count;

      // dL/dscores = (p - onehot)/b, pulled back through cosine and G into V
      Eigen::MatrixXd dscores = p;
      for (Eigen::Index i = 0; i < b; ++i)
        dscores(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
      dscores /= static_cast<double>(b);

      Eigen::MatrixXd d_what = dscores.transpose() * e_hat / tau;  // K x L
      Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(V.rows(), V.cols());
      for (int j = 0; j < K; ++j) {
        double norm = w_raw.row(j).norm();
        Eigen::VectorXd u = w_hat.row(j).transpose();
        Eigen::VectorXd g = d_what.row(j).transpose();
        Eigen::VectorXd dw = (g - u * u.dot(g)) / norm;
        Eigen::MatrixXd dtokens = pullbacks[static_cast<std::size_t>(j)](dw);
        dV += dtokens.topRows(M);
      }

      velocity = cfg.momentum * velocity - lr_epoch * dV;
      V += velocity;
      if (!V.allFinite())
        fail(ErrorKind::Divergence, "tune: non-finite context at epoch " + std::to_string(epoch) +
                                        " batch " + std::to_string(batch_count - 1));
    }
    result.epoch_loss.push_back(batch_count == 0 ? 0.0 : loss_sum / static_cast<double>(batch_count));
  }

  if (encoder.text_theta_hash() != text_theta || encoder.image_theta_hash() != image_theta)
    fail(ErrorKind::Integrity, "tune: encoder parameters changed during tuning");
  if (encoder.image_forward_count() + encoder.image_backward_count() != image_calls_before)
    fail(ErrorKind::Integrity, "tune: image encoder was invoked during prompt tuning");
  return result;
}

void save_context(const PromptContext& ctx, const std::string& path) {
  if (!ctx.V.allFinite()) fail(ErrorKind::Numeric, "save_context: non-finite context");
  serial::Writer w;
  w.raw(kMagic, 4);
  w.u32(kContextVersion);
  w.u32(static_cast<std::uint32_t>(ctx.V.rows()));
  w.u32(static_cast<std::uint32_t>(ctx.V.cols()));
  w.u32(static_cast<std::uint32_t>(ctx.class_names.size()));
  for (Eigen::Index i = 0; i < ctx.V.rows(); ++i)
    for (Eigen::Index j = 0; j < ctx.V.cols(); ++j) w.f64(ctx.V(i, j));
  for (const auto& name : ctx.class_names) w.str(name);
  w.f64(ctx.init.stddev);
  w.u64(ctx.init.seed);
  w.finish_with_checksum();
  serial::write_file(path, w.bytes());
}

PromptContext load_context(const std::string& path, const TokenEmbeddingTable& table) {
  serial::Reader r(serial::read_file(path));
  r.verify_trailing_checksum("context " + path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Format, "not a context file: " + path);
  std::uint32_t version = r.u32();
  if (version != kContextVersion)
    fail(ErrorKind::Format, "unsupported context version " + std::to_string(version));
  std::uint32_t m = r.u32();
  std::uint32_t d = r.u32();
  std::uint32_t k = r.u32();
  if (m == 0 || d == 0 || k == 0) fail(ErrorKind::Corruption, "context: implausible header");
  if (static_cast<int>(d) != table.dim())
    fail(ErrorKind::Dimension, "context token dim " + std::to_string(d) +
                                   " does not match table dim " + std::to_string(table.dim()));
  PromptContext ctx;
  ctx.V.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < ctx.V.rows(); ++i)
    for (Eigen::Index j = 0; j < ctx.V.cols(); ++j) ctx.V(i, j) = r.f64();
  ctx.class_names.resize(k);
  for (auto& name : ctx.class_names) name = r.str();
  ctx.init.stddev = r.f64();
  ctx.init.seed = r.u64();
  if (r.remaining() != 0) fail(ErrorKind::Corruption, "context: trailing bytes after payload");
  ctx.class_tokens.reserve(k);
  for (const auto& name : ctx.class_names) ctx.class_tokens.push_back(table.embed_name(name));
  return ctx;
}

}  // namespace advpt
