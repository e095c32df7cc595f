#include "advpt/bank.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "advpt/errors.hpp"
#include "advpt/hash.hpp"
#include "advpt/parallel.hpp"
#include "advpt/rng.hpp"
#include "advpt/serial.hpp"

namespace advpt {

namespace {
constexpr char kMagic[4] = {'A', 'P', 'T', 'B'};
constexpr std::uint32_t kBankVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
}  // namespace

void AdversarialEmbeddingBank::validate() const {
  if (embeddings.rows() != static_cast<Eigen::Index>(labels.size()))
    fail(ErrorKind::Input, "bank: row/label count mismatch");
  if (class_names.empty()) fail(ErrorKind::Input, "bank: no class names");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= static_cast<int>(class_names.size()))
      fail(ErrorKind::Input, "bank: label out of range at row " + std::to_string(i));
  if (!embeddings.allFinite()) fail(ErrorKind::Numeric, "bank: non-finite embedding");
}

AdversarialEmbeddingBank build_bank(const DualEncoder& encoder, const LabeledImageDataset& dataset,
                                    const AttackConfig& cfg,
                                    const Eigen::MatrixXd* text_embeddings, int workers) {
  cfg.validate();
  if (dataset.size() == 0) fail(ErrorKind::Input, "build_bank: empty dataset");
  const std::uint64_t theta_before = encoder.theta_hash();

  AdversarialEmbeddingBank bank;
  const int n = static_cast<int>(dataset.size());
  bank.embeddings.resize(n, encoder.embed_dim());
  bank.labels = dataset.labels;
  bank.class_names = dataset.class_names;

  parallel_for(n, [&](int i) {
    AttackConfig per_item = cfg;
    per_item.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    Image adv = pgd_attack(encoder, dataset.images[static_cast<std::size_t>(i)],
                           dataset.labels[static_cast<std::size_t>(i)], per_item, text_embeddings);
    Eigen::VectorXd e = encoder.encode_image(adv);
    for (Eigen::Index j = 0; j < e.size(); ++j)
      bank.embeddings(i, j) = static_cast<float>(e(j));
  }, workers);

  if (encoder.theta_hash() != theta_before)
    fail(ErrorKind::Integrity, "build_bank: encoder parameters changed during build");

  bank.provenance = BankProvenance{cfg, theta_before, cfg.seed};
  bank.validate();
  return bank;
}

std::string bank_bytes(const AdversarialEmbeddingBank& bank) {
  serial::Writer w;
  w.raw(kMagic, 4);
  w.u32(kBankVersion);
  w.u64(static_cast<std::uint64_t>(bank.size()));
  w.u32(static_cast<std::uint32_t>(bank.embed_dim()));
  w.u32(static_cast<std::uint32_t>(bank.class_names.size()));
  w.u8(kDtypeF32);
  for (Eigen::Index i = 0; i < bank.embeddings.rows(); ++i)
    for (Eigen::Index j = 0; j < bank.embeddings.cols(); ++j) w.f32(bank.embeddings(i, j));
  for (int label : bank.labels) w.i32(label);
  for (const auto& name : bank.class_names) w.str(name);
  const AttackConfig& a = bank.provenance.attack;
  w.f64(a.epsilon);
  w.f64(a.alpha);
  w.u32(static_cast<std::uint32_t>(a.iterations));
  w.u8(static_cast<std::uint8_t>(a.objective));
  w.f64(a.temperature_kl);
  w.u64(a.seed);
  w.u8(a.random_start ? 1 : 0);
  w.u64(bank.provenance.encoder_theta);
  w.u64(bank.provenance.build_seed);
  w.finish_with_checksum();
  return w.bytes();
}

void save_bank(const AdversarialEmbeddingBank& bank, const std::string& path) {
  bank.validate();
  serial::write_file(path, bank_bytes(bank));
}

AdversarialEmbeddingBank load_bank(const std::string& path) {
  serial::Reader r(serial::read_file(path));
  r.verify_trailing_checksum("bank " + path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Format, "not a bank file: " + path);
  std::uint32_t version = r.u32();
  if (version != kBankVersion)
    fail(ErrorKind::Format, "unsupported bank version " + std::to_string(version));

  std::uint64_t n = r.u64();
  std::uint32_t dim = r.u32();
  std::uint32_t k = r.u32();
  std::uint8_t dtype = r.u8();
  if (dtype != kDtypeF32) fail(ErrorKind::Format, "unsupported bank dtype tag");
  if (n == 0 || n > (1ull << 32) || dim == 0 || dim > (1u << 20) || k == 0)
    fail(ErrorKind::Corruption, "bank: implausible header");

  AdversarialEmbeddingBank bank;
  bank.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < bank.embeddings.rows(); ++i)
    for (Eigen::Index j = 0; j < bank.embeddings.cols(); ++j) bank.embeddings(i, j) = r.f32();
  bank.labels.resize(n);
  for (auto& label : bank.labels) label = r.i32();
  bank.class_names.resize(k);
  for (auto& name : bank.class_names) name = r.str();
  AttackConfig a;
  a.epsilon = r.f64();
  a.alpha = r.f64();
  a.iterations = static_cast<int>(r.u32());
  a.objective = static_cast<AttackObjective>(r.u8());
  a.temperature_kl = r.f64();
  a.seed = r.u64();
  a.random_start = r.u8() != 0;
  bank.provenance.attack = a;
  bank.provenance.encoder_theta = r.u64();
  bank.provenance.build_seed = r.u64();
  if (r.remaining() != 0) fail(ErrorKind::Corruption, "bank: trailing bytes after payload");
  bank.validate();
  return bank;
}

void verify_bank_provenance(const AdversarialEmbeddingBank& bank, const DualEncoder& encoder) {
  if (bank.provenance.encoder_theta != encoder.theta_hash())
    fail(ErrorKind::Integrity,
         "bank was built against different encoder parameters (theta " +
             hash_hex(bank.provenance.encoder_theta) + " vs " + hash_hex(encoder.theta_hash()) + ")");
}

std::vector<MiniBatch> epoch_minibatches(const AdversarialEmbeddingBank& bank, int batch_size,
                                         std::uint64_t seed, int epoch) {
  const int n = bank.size();
  if (batch_size < 1 || batch_size > n)
    fail(ErrorKind::Input, "minibatches: batch size must be in [1, " + std::to_string(n) + "]");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);

  std::vector<MiniBatch> batches;
  for (int start = 0; start < n; start += batch_size) {
    int b = std::min(batch_size, n - start);
    MiniBatch mb;
    mb.embeddings.resize(b, bank.embed_dim());
    mb.labels.resize(static_cast<std::size_t>(b));
    for (int r = 0; r < b; ++r) {
      int src = order[static_cast<std::size_t>(start + r)];
      mb.embeddings.row(r) = bank.embeddings.row(src).cast<double>();
      mb.labels[static_cast<std::size_t>(r)] = bank.labels[static_cast<std::size_t>(src)];
    }
    batches.push_back(std::move(mb));
  }
  return batches;
}

}  // namespace advpt
