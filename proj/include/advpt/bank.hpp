#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "advpt/attack.hpp"
#include "advpt/dataset.hpp"
#include "advpt/encoder.hpp"

namespace advpt {

struct BankProvenance {
  AttackConfig attack;
  std::uint64_t encoder_theta = 0;  // pair hash at build time
  std::uint64_t build_seed = 0;
};

// N x L matrix of adversarial image embeddings with their ground-truth
// labels. Built in a single pass over the dataset; embeddings are stored
// raw (un-normalized) as 32-bit floats, matching the on-disk block.
struct AdversarialEmbeddingBank {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> embeddings;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  BankProvenance provenance;

  int size() const { return static_cast<int>(embeddings.rows()); }
  int embed_dim() const { return static_cast<int>(embeddings.cols()); }
  void validate() const;
};

struct MiniBatch {
  Eigen::MatrixXd embeddings;  // b x L, rows copied from the bank
  std::vector<int> labels;
};

// One attack + encode pass per image. Throws ErrorKind::Integrity if the
// encoder parameters change underneath the build.
AdversarialEmbeddingBank build_bank(const DualEncoder& encoder, const LabeledImageDataset& dataset,
                                    const AttackConfig& cfg,
                                    const Eigen::MatrixXd* text_embeddings = nullptr,
                                    int workers = 0);

void save_bank(const AdversarialEmbeddingBank& bank, const std::string& path);
AdversarialEmbeddingBank load_bank(const std::string& path);

// Serialized image, exposed so callers can hash or compare bank content.
std::string bank_bytes(const AdversarialEmbeddingBank& bank);

// ErrorKind::Integrity when the bank was built against different encoder
// parameters.
void verify_bank_provenance(const AdversarialEmbeddingBank& bank, const DualEncoder& encoder);

// One epoch: a seeded permutation of all rows partitioned into batches of
// `batch_size` (final batch may be short). The permutation depends on
// (seed, epoch).
std::vector<MiniBatch> epoch_minibatches(const AdversarialEmbeddingBank& bank, int batch_size,
                                         std::uint64_t seed, int epoch);

}  // namespace advpt
