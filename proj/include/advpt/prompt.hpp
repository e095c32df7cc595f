#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "advpt/bank.hpp"
#include "advpt/encoder.hpp"

namespace advpt {

struct InitSpec {
  double stddev = 0.02;
  std::uint64_t seed = 0;
  bool operator==(const InitSpec&) const = default;
};

// Learnable context vectors prefixed to each class-name token sequence:
// the prompt for class j is [v_1 .. v_M, c_j]. V is the only trainable
// state in the toolkit.
struct PromptContext {
  Eigen::MatrixXd V;  // M x d
  std::vector<std::string> class_names;
  std::vector<Eigen::MatrixXd> class_tokens;  // c_j, one (len_j x d) block per class
  InitSpec init;

  int context_length() const { return static_cast<int>(V.rows()); }
  int token_dim() const { return static_cast<int>(V.cols()); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

PromptContext init_prompt_context(int context_length, const TokenEmbeddingTable& table,
                                  const std::vector<std::string>& class_names,
                                  const InitSpec& init);

// T: L x K with column j = G([V, c_j]).
Eigen::MatrixXd encode_prompts(const PromptContext& ctx, const DualEncoder& encoder);

// Text embedding matrix for a fixed prompt string around each class name.
Eigen::MatrixXd fixed_prompt_matrix(const DualEncoder& encoder, const TokenEmbeddingTable& table,
                                    const std::vector<std::string>& class_names,
                                    const std::string& prefix = "a photo of a",
                                    const std::string& suffix = "");

// Row-stochastic class probabilities p(i,j) = softmax_j(cos(e_i, w_j)/tau).
// embeddings: b x L rows; text: L x K columns.
Eigen::MatrixXd predict_prob(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& text,
                             double tau);

// Fraction of rows whose argmax probability matches the label.
double classification_accuracy(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                               const Eigen::MatrixXd& text, double tau);

struct TuneConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 0.005;
  double momentum = 0.9;  // CoOp-style SGD
  double tau = 0.0;       // 0: use the encoder's calibrated temperature
  std::uint64_t seed = 0;

  void validate() const;
};

struct TuneResult {
  PromptContext context;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Cross-entropy prompt optimization over bank minibatches with
// cosine-annealed SGD. Only V changes; gradients flow through the frozen
// text encoder and stop at the token inputs. Never touches the image
// encoder (asserted via the pair's invocation counters).
TuneResult tune(const PromptContext& ctx, const AdversarialEmbeddingBank& bank,
                const DualEncoder& encoder, const TuneConfig& cfg);

void save_context(const PromptContext& ctx, const std::string& path);
PromptContext load_context(const std::string& path, const TokenEmbeddingTable& table);

}  // namespace advpt
