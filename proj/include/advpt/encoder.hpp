#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "advpt/image.hpp"
#include "advpt/mlp.hpp"

namespace advpt {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;
  bool operator==(const ImageShape&) const = default;
};

// Lowercase whitespace tokenization over a closed vocabulary.
std::vector<std::string> tokenize(const std::string& text);

// Immutable word -> d-dim embedding row table. Rows are frozen once built.
class TokenEmbeddingTable {
 public:
  TokenEmbeddingTable(std::vector<std::string> vocab, Eigen::MatrixXd embeddings);

  int index_of(const std::string& token) const;  // ErrorKind::Vocabulary when absent
  bool contains(const std::string& token) const;

  // Concatenated embedding rows for the tokens of `name`, in order.
  Eigen::MatrixXd embed_name(const std::string& name) const;

  const std::vector<std::string>& vocab() const { return vocab_; }
  const Eigen::MatrixXd& embeddings() const { return embeddings_; }
  int dim() const { return static_cast<int>(embeddings_.cols()); }
  int size() const { return static_cast<int>(vocab_.size()); }

  std::uint64_t content_hash() const;

  void serialize(serial::Writer& w) const;
  static TokenEmbeddingTable deserialize(serial::Reader& r);

 private:
  std::vector<std::string> vocab_;
  Eigen::MatrixXd embeddings_;  // |vocab| x d
  std::vector<std::pair<std::string, int>> index_;  // sorted for lookup
};

// Gradient of a downstream scalar with respect to the encoder input, given
// the gradient with respect to the embedding. Image gradients use the
// Image::data layout.
using ImagePullback = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using TextPullback = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Frozen image/text encoder pair sharing an embedding space. Adapters wrap
// a concrete model behind the do_* hooks; the public surface validates
// inputs and counts invocations so freeze/one-pass properties can be
// asserted by callers.
class DualEncoder {
 public:
  virtual ~DualEncoder() = default;

  virtual int embed_dim() const = 0;
  virtual int token_dim() const = 0;
  virtual ImageShape image_shape() const = 0;
  // Similarity temperature the pair was calibrated with.
  virtual double temperature() const = 0;

  virtual std::uint64_t image_theta_hash() const = 0;
  virtual std::uint64_t text_theta_hash() const = 0;
  std::uint64_t theta_hash() const;

  Eigen::VectorXd encode_image(const Image& x) const;
  std::pair<Eigen::VectorXd, ImagePullback> encode_image_vjp(const Image& x) const;

  // tokens: sequence_length x token_dim
  Eigen::VectorXd encode_text(const Eigen::MatrixXd& tokens) const;
  std::pair<Eigen::VectorXd, TextPullback> encode_text_vjp(const Eigen::MatrixXd& tokens) const;

  std::uint64_t image_forward_count() const { return image_forward_.load(); }
  std::uint64_t image_backward_count() const { return image_backward_.load(); }
  std::uint64_t text_forward_count() const { return text_forward_.load(); }
  std::uint64_t text_backward_count() const { return text_backward_.load(); }

 protected:
  virtual Eigen::VectorXd do_encode_image(const Image& x) const = 0;
  virtual std::pair<Eigen::VectorXd, ImagePullback> do_encode_image_vjp(const Image& x) const = 0;
  virtual Eigen::VectorXd do_encode_text(const Eigen::MatrixXd& tokens) const = 0;
  virtual std::pair<Eigen::VectorXd, TextPullback> do_encode_text_vjp(const Eigen::MatrixXd& tokens) const = 0;

 private:
  void check_image(const Image& x) const;
  void check_tokens(const Eigen::MatrixXd& tokens) const;

  mutable std::atomic<std::uint64_t> image_forward_{0};
  mutable std::atomic<std::uint64_t> image_backward_{0};
  mutable std::atomic<std::uint64_t> text_forward_{0};
  mutable std::atomic<std::uint64_t> text_backward_{0};
};

// Concrete pair used throughout the toolkit: a tanh MLP over flattened
// pixels on the image side; on the text side, token embeddings are pooled
// by a softmax attention over a learned query vector (query zero = plain
// mean pooling) and passed through a tanh MLP. Parameters are fixed at
// construction.
class MlpDualEncoder final : public DualEncoder {
 public:
  MlpDualEncoder(Mlp image_net, Mlp text_net, Eigen::VectorXd text_query, ImageShape shape,
                 int token_dim, double tau);

  int embed_dim() const override { return image_net_.output_dim(); }
  int token_dim() const override { return token_dim_; }
  ImageShape image_shape() const override { return shape_; }
  double temperature() const override { return tau_; }

  std::uint64_t image_theta_hash() const override { return image_hash_; }
  std::uint64_t text_theta_hash() const override { return text_hash_; }

  const Mlp& image_net() const { return image_net_; }
  const Mlp& text_net() const { return text_net_; }
  const Eigen::VectorXd& text_query() const { return text_query_; }

  // Pooling weights for a token sequence (softmax over query scores).
  Eigen::VectorXd attention_weights(const Eigen::MatrixXd& tokens) const;

 protected:
  Eigen::VectorXd do_encode_image(const Image& x) const override;
  std::pair<Eigen::VectorXd, ImagePullback> do_encode_image_vjp(const Image& x) const override;
  Eigen::VectorXd do_encode_text(const Eigen::MatrixXd& tokens) const override;
  std::pair<Eigen::VectorXd, TextPullback> do_encode_text_vjp(const Eigen::MatrixXd& tokens) const override;

 private:
  Eigen::VectorXd flatten(const Image& x) const;

  Mlp image_net_;
  Mlp text_net_;
  Eigen::VectorXd text_query_;
  ImageShape shape_;
  int token_dim_;
  double tau_;
  std::uint64_t image_hash_;
  std::uint64_t text_hash_;
};

}  // namespace advpt
