#include "advpt/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "advpt/errors.hpp"
#include "advpt/hash.hpp"

namespace advpt {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

TokenEmbeddingTable::TokenEmbeddingTable(std::vector<std::string> vocab, Eigen::MatrixXd embeddings)
    : vocab_(std::move(vocab)), embeddings_(std::move(embeddings)) {
  if (vocab_.empty()) fail(ErrorKind::Input, "token table: empty vocabulary");
  if (embeddings_.rows() != static_cast<Eigen::Index>(vocab_.size()))
    fail(ErrorKind::Input, "token table: row count does not match vocabulary size");
  if (embeddings_.cols() <= 0) fail(ErrorKind::Input, "token table: embedding dim must be positive");
  if (!embeddings_.allFinite()) fail(ErrorKind::Input, "token table: non-finite embedding");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    index_.emplace_back(vocab_[i], static_cast<int>(i));
  std::sort(index_.begin(), index_.end());
  for (std::size_t i = 1; i < index_.size(); ++i)
    if (index_[i].first == index_[i - 1].first)
      fail(ErrorKind::Input, "token table: duplicate vocabulary entry '" + index_[i].first + "'");
}

int TokenEmbeddingTable::index_of(const std::string& token) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), token,
                             [](const auto& p, const std::string& t) { return p.first < t; });
  if (it == index_.end() || it->first != token)
    fail(ErrorKind::Vocabulary, "token not in vocabulary: '" + token + "'");
  return it->second;
}

bool TokenEmbeddingTable::contains(const std::string& token) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), token,
                             [](const auto& p, const std::string& t) { return p.first < t; });
  return it != index_.end() && it->first == token;
}

Eigen::MatrixXd TokenEmbeddingTable::embed_name(const std::string& name) const {
  std::vector<std::string> tokens = tokenize(name);
  if (tokens.empty()) fail(ErrorKind::Input, "cannot embed empty name");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(tokens.size()), embeddings_.cols());
  for (std::size_t t = 0; t < tokens.size(); ++t)
    rows.row(static_cast<Eigen::Index>(t)) = embeddings_.row(index_of(tokens[t]));
  return rows;
}

std::uint64_t TokenEmbeddingTable::content_hash() const {
  serial::Writer w;
  serialize(w);
  return fnv1a64(w.bytes());
}

void TokenEmbeddingTable::serialize(serial::Writer& w) const {
  w.u32(static_cast<std::uint32_t>(vocab_.size()));
  w.u32(static_cast<std::uint32_t>(embeddings_.cols()));
  for (const auto& word : vocab_) w.str(word);
  for (Eigen::Index i = 0; i < embeddings_.rows(); ++i)
    for (Eigen::Index j = 0; j < embeddings_.cols(); ++j) w.f64(embeddings_(i, j));
}

TokenEmbeddingTable TokenEmbeddingTable::deserialize(serial::Reader& r) {
  std::uint32_t n = r.u32();
  std::uint32_t d = r.u32();
  if (n == 0 || n > (1u << 20) || d == 0 || d > (1u << 16))
    fail(ErrorKind::Format, "token table: implausible dimensions");
  std::vector<std::string> vocab(n);
  for (auto& word : vocab) word = r.str();
  Eigen::MatrixXd emb(n, d);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) emb(i, j) = r.f64();
  return TokenEmbeddingTable(std::move(vocab), std::move(emb));
}

std::uint64_t DualEncoder::theta_hash() const {
  std::uint64_t pair[2] = {image_theta_hash(), text_theta_hash()};
  return fnv1a64(pair, sizeof(pair));
}

void DualEncoder::check_image(const Image& x) const {
  ImageShape s = image_shape();
  if (x.height != s.height || x.width != s.width || x.channels != s.channels)
    fail(ErrorKind::Input, "encode_image: image shape mismatch");
  validate_pixels(x, "encode_image");
}

void DualEncoder::check_tokens(const Eigen::MatrixXd& tokens) const {
  if (tokens.rows() < 1) fail(ErrorKind::Input, "encode_text: empty token sequence");
  if (tokens.cols() != token_dim())
    fail(ErrorKind::Dimension, "encode_text: token dim mismatch");
  if (!tokens.allFinite()) fail(ErrorKind::Input, "encode_text: non-finite token embedding");
}

Eigen::VectorXd DualEncoder::encode_image(const Image& x) const {
  check_image(x);
  ++image_forward_;
  return do_encode_image(x);
}

std::pair<Eigen::VectorXd, ImagePullback> DualEncoder::encode_image_vjp(const Image& x) const {
  check_image(x);
  ++image_forward_;
  auto [e, pullback] = do_encode_image_vjp(x);
  ImagePullback counted = [this, pb = std::move(pullback)](const Eigen::VectorXd& g) {
    ++image_backward_;
    return pb(g);
  };
  return {std::move(e), std::move(counted)};
}

Eigen::VectorXd DualEncoder::encode_text(const Eigen::MatrixXd& tokens) const {
  check_tokens(tokens);
  ++text_forward_;
  return do_encode_text(tokens);
}

std::pair<Eigen::VectorXd, TextPullback> DualEncoder::encode_text_vjp(const Eigen::MatrixXd& tokens) const {
  check_tokens(tokens);
  ++text_forward_;
  auto [e, pullback] = do_encode_text_vjp(tokens);
  TextPullback counted = [this, pb = std::move(pullback)](const Eigen::VectorXd& g) {
    ++text_backward_;
    return pb(g);
  };
  return {std::move(e), std::move(counted)};
}

MlpDualEncoder::MlpDualEncoder(Mlp image_net, Mlp text_net, Eigen::VectorXd text_query,
                               ImageShape shape, int token_dim, double tau)
    : image_net_(std::move(image_net)),
      text_net_(std::move(text_net)),
      text_query_(std::move(text_query)),
      shape_(shape),
      token_dim_(token_dim),
      tau_(tau) {
  if (shape_.height <= 0 || shape_.width <= 0 || shape_.channels <= 0)
    fail(ErrorKind::Config, "encoder: image shape must be positive");
  if (image_net_.input_dim() != shape_.height * shape_.width * shape_.channels)
    fail(ErrorKind::Config, "encoder: image net input does not match image shape");
  if (text_net_.input_dim() != token_dim_)
    fail(ErrorKind::Config, "encoder: text net input does not match token dim");
  if (text_query_.size() != token_dim_)
    fail(ErrorKind::Config, "encoder: text query does not match token dim");
  if (image_net_.output_dim() != text_net_.output_dim())
    fail(ErrorKind::Config, "encoder: image and text embedding dims differ");
  if (!(tau_ > 0.0)) fail(ErrorKind::Config, "encoder: temperature must be positive");
  serial::Writer wi;
  image_net_.serialize(wi);
  image_hash_ = fnv1a64(wi.bytes());
  serial::Writer wt;
  text_net_.serialize(wt);
  for (Eigen::Index i = 0; i < text_query_.size(); ++i) wt.f64(text_query_(i));
  wt.f64(tau_);
  text_hash_ = fnv1a64(wt.bytes());
}

Eigen::VectorXd MlpDualEncoder::attention_weights(const Eigen::MatrixXd& tokens) const {
  Eigen::VectorXd scores = tokens * text_query_ / std::sqrt(static_cast<double>(token_dim_));
  Eigen::VectorXd a = (scores.array() - scores.maxCoeff()).exp();
  return a / a.sum();
}

Eigen::VectorXd MlpDualEncoder::flatten(const Image& x) const {
  return Eigen::Map<const Eigen::VectorXd>(x.data.data(), static_cast<Eigen::Index>(x.data.size()));
}

Eigen::VectorXd MlpDualEncoder::do_encode_image(const Image& x) const {
  return image_net_.forward(flatten(x));
}

std::pair<Eigen::VectorXd, ImagePullback> MlpDualEncoder::do_encode_image_vjp(const Image& x) const {
  auto trace = std::make_shared<Mlp::Trace>();
  Eigen::VectorXd e = image_net_.forward(flatten(x), *trace);
  ImagePullback pb = [this, trace](const Eigen::VectorXd& g) {
    return image_net_.backward_input(*trace, g);
  };
  return {std::move(e), std::move(pb)};
}

Eigen::VectorXd MlpDualEncoder::do_encode_text(const Eigen::MatrixXd& tokens) const {
  Eigen::VectorXd a = attention_weights(tokens);
  Eigen::VectorXd pooled = tokens.transpose() * a;
  return text_net_.forward(pooled);
}

std::pair<Eigen::VectorXd, TextPullback> MlpDualEncoder::do_encode_text_vjp(const Eigen::MatrixXd& tokens) const {
  auto trace = std::make_shared<Mlp::Trace>();
  auto toks = std::make_shared<Eigen::MatrixXd>(tokens);
  Eigen::VectorXd a = attention_weights(tokens);
  Eigen::VectorXd pooled = tokens.transpose() * a;
  Eigen::VectorXd e = text_net_.forward(pooled, *trace);
  TextPullback pb = [this, trace, toks, a](const Eigen::VectorXd& g) {
    Eigen::VectorXd dpooled = text_net_.backward_input(*trace, g);
    // pooled = X^T a with a = softmax(X q / sqrt(d)):
    //   dX = a dpooled^T + (softmax jacobian applied to X dpooled) q^T / sqrt(d)
    Eigen::VectorXd q_scaled = text_query_ / std::sqrt(static_cast<double>(token_dim_));
    Eigen::VectorXd dscore_in = *toks * dpooled;                       // per-token value grads
    Eigen::VectorXd dscores = a.array() * (dscore_in.array() - a.dot(dscore_in));
    Eigen::MatrixXd dtokens = a * dpooled.transpose();
    dtokens.noalias() += dscores * q_scaled.transpose();
    return dtokens;
  };
  return {std::move(e), std::move(pb)};
}

}  // namespace advpt
