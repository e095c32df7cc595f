#include "advpt/mini_clip.hpp"

#include <Eigen/Core>
#include <cmath>
#include <unordered_map>

#include "advpt/errors.hpp"
#include "advpt/hash.hpp"
#include "advpt/rng.hpp"
#include "advpt/serial.hpp"

namespace advpt {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'L', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

const std::vector<std::string>& vocab_words() {
  static const std::vector<std::string> words = {
      // shape and color words
      "circle", "square", "triangle", "cross",
      "red", "green", "blue", "yellow",
      // prompt words
      "a", "photo", "of", "the", "an", "image", "picture", "bright",
      "small", "drawing", "this", "shows",
      // neutral filler
      "apple", "bird", "cloud", "dawn", "ember", "fern", "grove", "harbor",
      "ivory", "jade", "kite", "lantern", "maple", "north", "ocean", "pearl",
      "quartz", "river", "stone", "thunder", "umber", "violet", "wind",
      "xylem", "yarrow", "zephyr", "ash", "birch", "cedar", "dune", "elm",
      "flint", "gale", "hazel", "iris", "juniper", "kelp", "loam", "mesa",
      "nectar", "onyx", "pine", "reef", "slate"};
  return words;
}

// First filler index in vocab_words(); training pads captions with random
// filler so the pooling query learns to favor content tokens.
constexpr int kFillerStart = 20;

const std::vector<std::string>& caption_templates() {
  static const std::vector<std::string> templates = {
      "{}",
      "a {}",
      "a photo of a {}",
      "the bright {}",
      "an image of the {}",
      "this photo shows a {}",
      "a small {} drawing",
      "a {} picture"};
  return templates;
}

std::string expand_template(const std::string& tpl, const std::string& name) {
  auto pos = tpl.find("{}");
  return tpl.substr(0, pos) + name + tpl.substr(pos + 2);
}

SynthConfig train_synth_config(std::uint64_t seed, const MiniClipConfig& cfg) {
  return SynthConfig{cfg.image_size, cfg.num_classes, cfg.train_per_class, cfg.style,
                     derive_seed(seed, 10)};
}

SynthConfig test_synth_config(std::uint64_t seed, const MiniClipConfig& cfg) {
  return SynthConfig{cfg.image_size, cfg.num_classes, cfg.test_per_class, cfg.style,
                     derive_seed(seed, 11)};
}

std::uint64_t params_hash(const TokenEmbeddingTable& table, const Mlp& image_net,
                          const Mlp& text_net, const Eigen::VectorXd& text_query, double tau) {
  serial::Writer w;
  table.serialize(w);
  image_net.serialize(w);
  text_net.serialize(w);
  for (Eigen::Index i = 0; i < text_query.size(); ++i) w.f64(text_query(i));
  w.f64(tau);
  return fnv1a64(w.bytes());
}

// Adam over a fixed set of parameter blocks, registered in a fixed order.
class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  int add(Eigen::Index rows, Eigen::Index cols) {
    m_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
    v_.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
    return static_cast<int>(m_.size()) - 1;
  }

  void begin_step(double lr_scale) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    step_size_ = lr_ * lr_scale * std::sqrt(bc2) / bc1;
  }

  template <typename Param, typename Grad>
  void update(int id, Param& p, const Grad& g) {
    auto& m = m_[static_cast<std::size_t>(id)];
    auto& v = v_[static_cast<std::size_t>(id)];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = (beta2_ * v.array() + (1.0 - beta2_) * g.array().square()).matrix();
    p -= (step_size_ * m.array() / (v.array().sqrt() + eps_)).matrix();
  }

  void update_scalar(int id, double& p, double g) {
    auto& m = m_[static_cast<std::size_t>(id)];
    auto& v = v_[static_cast<std::size_t>(id)];
    m(0, 0) = beta1_ * m(0, 0) + (1.0 - beta1_) * g;
    v(0, 0) = beta2_ * v(0, 0) + (1.0 - beta2_) * g * g;
    p -= step_size_ * m(0, 0) / (std::sqrt(v(0, 0)) + eps_);
  }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  double step_size_ = 0.0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

Eigen::VectorXd normalized(const Eigen::VectorXd& v) { return v / v.norm(); }

// Pullback through u = v / |v|.
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& v, const Eigen::VectorXd& du) {
  Eigen::VectorXd u = v / v.norm();
  return (du - u * u.dot(du)) / v.norm();
}

struct TrainableState {
  Mlp image_net;
  Mlp text_net;
  Eigen::VectorXd text_query;  // attention pooling query
  Eigen::MatrixXd token_emb;   // |vocab| x d
  double logit_s = 0.0;        // similarity scale = exp(logit_s)
};

Image augment(const Image& img, const MiniClipConfig& cfg, Rng& rng) {
  Image out = img;
  if (rng.uniform() < cfg.aug_rescale_prob) {
    int n = img.height;
    int m = n + static_cast<int>(rng.below(5)) - 2;  // n-2 .. n+2
    if (m != n && m >= 4) out = resize_bilinear(resize_bilinear(out, m, m), n, n);
  }
  if (rng.uniform() < cfg.aug_noise_prob) {
    for (double& v : out.data) v += rng.uniform(-cfg.aug_noise, cfg.aug_noise);
  }
  return clamp01(out);
}

void train_contrastive(TrainableState& state, const LabeledImageDataset& train,
                       const std::vector<std::string>& vocab,
                       const MiniClipConfig& cfg, std::uint64_t seed) {
  const int K = train.num_classes();
  std::unordered_map<std::string, int> vocab_index;
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab_index[vocab[i]] = static_cast<int>(i);

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < train.size(); ++i)
    by_class[static_cast<std::size_t>(train.labels[i])].push_back(static_cast<int>(i));

  Adam opt(cfg.train_lr);
  std::vector<int> img_w_ids, img_b_ids, txt_w_ids, txt_b_ids;
  for (const auto& W : state.image_net.weights()) img_w_ids.push_back(opt.add(W.rows(), W.cols()));
  for (const auto& b : state.image_net.biases()) img_b_ids.push_back(opt.add(b.size(), 1));
  for (const auto& W : state.text_net.weights()) txt_w_ids.push_back(opt.add(W.rows(), W.cols()));
  for (const auto& b : state.text_net.biases()) txt_b_ids.push_back(opt.add(b.size(), 1));
  int query_id = opt.add(state.text_query.size(), 1);
  int tok_id = opt.add(state.token_emb.rows(), state.token_emb.cols());
  int scale_id = opt.add(1, 1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.token_dim));

  const int L = state.image_net.output_dim();
  const auto& templates = caption_templates();

  for (int step = 0; step < cfg.train_steps; ++step) {
    Rng rng(derive_seed(seed, 20, static_cast<std::uint64_t>(step)));

    // one image per class: no false negatives inside a batch
    std::vector<Image> images;
    std::vector<std::vector<int>> captions;  // token indices
    images.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      const auto& pool = by_class[static_cast<std::size_t>(k)];
      const Image& src = train.images[static_cast<std::size_t>(pool[rng.below(pool.size())])];
      images.push_back(augment(src, cfg, rng));
      const std::string caption = expand_template(
          templates[rng.below(templates.size())], train.class_names[static_cast<std::size_t>(k)]);
      std::vector<int> ids;
      for (const auto& tok : tokenize(caption)) ids.push_back(vocab_index.at(tok));
      if (rng.uniform() < 0.7) {
        const int n_filler = static_cast<int>(vocab.size()) - kFillerStart;
        int pad = 1 + static_cast<int>(rng.below(12));
        for (int p = 0; p < pad; ++p) {
          int word = kFillerStart + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_filler)));
          if (rng.uniform() < 0.5)
            ids.push_back(word);
          else
            ids.insert(ids.begin(), word);
        }
      }
      captions.push_back(std::move(ids));
    }

    // forward
    std::vector<Mlp::Trace> img_traces(static_cast<std::size_t>(K));
    std::vector<Mlp::Trace> txt_traces(static_cast<std::size_t>(K));
    std::vector<Eigen::MatrixXd> txt_tokens(static_cast<std::size_t>(K));
    std::vector<Eigen::VectorXd> txt_attn(static_cast<std::size_t>(K));
    Eigen::MatrixXd raw_img(K, L), raw_txt(K, L), norm_img(K, L), norm_txt(K, L);
    for (int k = 0; k < K; ++k) {
      const Image& img = images[static_cast<std::size_t>(k)];
      Eigen::Map<const Eigen::VectorXd> flat(img.data.data(), static_cast<Eigen::Index>(img.data.size()));
      Eigen::VectorXd e = state.image_net.forward(flat, img_traces[static_cast<std::size_t>(k)]);
      raw_img.row(k) = e.transpose();
      norm_img.row(k) = normalized(e).transpose();

      const auto& ids = captions[static_cast<std::size_t>(k)];
      Eigen::MatrixXd X(static_cast<Eigen::Index>(ids.size()), state.token_emb.cols());
      for (std::size_t t = 0; t < ids.size(); ++t)
        X.row(static_cast<Eigen::Index>(t)) = state.token_emb.row(ids[t]);
      Eigen::VectorXd scores = X * state.text_query * inv_sqrt_d;
      Eigen::VectorXd a = (scores.array() - scores.maxCoeff()).exp();
      a /= a.sum();
      Eigen::VectorXd pooled = X.transpose() * a;
      Eigen::VectorXd t = state.text_net.forward(pooled, txt_traces[static_cast<std::size_t>(k)]);
      raw_txt.row(k) = t.transpose();
      norm_txt.row(k) = normalized(t).transpose();
      txt_tokens[static_cast<std::size_t>(k)] = std::move(X);
      txt_attn[static_cast<std::size_t>(k)] = std::move(a);
    }

    const double scale = std::exp(state.logit_s);
    Eigen::MatrixXd logits = scale * (norm_img * norm_txt.transpose());

    // symmetric cross-entropy with the diagonal as ground truth
    Eigen::MatrixXd grad_logits = Eigen::MatrixXd::Zero(K, K);
    for (int i = 0; i < K; ++i) {
      Eigen::VectorXd row = logits.row(i);
      Eigen::VectorXd p = (row.array() - row.maxCoeff()).exp();
      p /= p.sum();
      grad_logits.row(i) += (0.5 / K) * p.transpose();
      grad_logits(i, i) -= 0.5 / K;
    }
    for (int j = 0; j < K; ++j) {
      Eigen::VectorXd col = logits.col(j);
      Eigen::VectorXd p = (col.array() - col.maxCoeff()).exp();
      p /= p.sum();
      grad_logits.col(j) += (0.5 / K) * p;
      grad_logits(j, j) -= 0.5 / K;
    }

    const double grad_scale_s = (grad_logits.array() * logits.array()).sum();
    Eigen::MatrixXd grad_cos = scale * grad_logits;
    Eigen::MatrixXd grad_norm_img = grad_cos * norm_txt;             // K x L
    Eigen::MatrixXd grad_norm_txt = grad_cos.transpose() * norm_img; // K x L

    Mlp::Gradients img_grads = state.image_net.zero_gradients();
    Mlp::Gradients txt_grads = state.text_net.zero_gradients();
    Eigen::MatrixXd tok_grads = Eigen::MatrixXd::Zero(state.token_emb.rows(), state.token_emb.cols());
    Eigen::VectorXd query_grads = Eigen::VectorXd::Zero(state.text_query.size());

    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd de = normalize_backward(raw_img.row(k).transpose(), grad_norm_img.row(k).transpose());
      state.image_net.backward(img_traces[static_cast<std::size_t>(k)], de, img_grads);

      Eigen::VectorXd dt = normalize_backward(raw_txt.row(k).transpose(), grad_norm_txt.row(k).transpose());
      Eigen::VectorXd dpooled = state.text_net.backward(txt_traces[static_cast<std::size_t>(k)], dt, txt_grads);
      const auto& ids = captions[static_cast<std::size_t>(k)];
      const Eigen::MatrixXd& X = txt_tokens[static_cast<std::size_t>(k)];
      const Eigen::VectorXd& a = txt_attn[static_cast<std::size_t>(k)];
      Eigen::VectorXd dscore_in = X * dpooled;
      Eigen::VectorXd dscores = (a.array() * (dscore_in.array() - a.dot(dscore_in))).matrix();
      for (std::size_t t = 0; t < ids.size(); ++t) {
        tok_grads.row(ids[t]) += a(static_cast<Eigen::Index>(t)) * dpooled.transpose() +
                                 dscores(static_cast<Eigen::Index>(t)) * inv_sqrt_d *
                                     state.text_query.transpose();
      }
      query_grads += X.transpose() * dscores * inv_sqrt_d;
    }

    double lr_scale = 0.1 + 0.45 * (1.0 + std::cos(M_PI * step / cfg.train_steps));
    opt.begin_step(lr_scale);
    for (std::size_t k = 0; k < img_w_ids.size(); ++k)
      opt.update(img_w_ids[k], state.image_net.weights()[k], img_grads.dW[k]);
    for (std::size_t k = 0; k < img_b_ids.size(); ++k)
      opt.update(img_b_ids[k], state.image_net.biases()[k], img_grads.db[k]);
    for (std::size_t k = 0; k < txt_w_ids.size(); ++k)
      opt.update(txt_w_ids[k], state.text_net.weights()[k], txt_grads.dW[k]);
    for (std::size_t k = 0; k < txt_b_ids.size(); ++k)
      opt.update(txt_b_ids[k], state.text_net.biases()[k], txt_grads.db[k]);
    opt.update(query_id, state.text_query, query_grads);
    opt.update(tok_id, state.token_emb, tok_grads);
    opt.update_scalar(scale_id, state.logit_s, grad_scale_s);
    state.logit_s = std::min(std::max(state.logit_s, 0.0), std::log(100.0));
  }
}

}  // namespace

const std::vector<std::string>& mini_clip_vocab() { return vocab_words(); }

MiniClip build_mini_clip(std::uint64_t seed, const MiniClipConfig& cfg) {
  if (cfg.embed_dim <= 0 || cfg.token_dim <= 0)
    fail(ErrorKind::Config, "mini clip: dims must be positive");
  if (cfg.image_size < 8) fail(ErrorKind::Config, "mini clip: image_size must be >= 8");
  if (cfg.train_per_class < 1 || cfg.test_per_class < 1)
    fail(ErrorKind::Config, "mini clip: per-class counts must be >= 1");
  if (cfg.train_steps < 0) fail(ErrorKind::Config, "mini clip: train_steps must be >= 0");
  if (!(cfg.initial_logit_scale > 0.0))
    fail(ErrorKind::Config, "mini clip: initial_logit_scale must be positive");
  if (cfg.aug_noise < 0.0 || cfg.aug_noise_prob < 0.0 || cfg.aug_noise_prob > 1.0 ||
      cfg.aug_rescale_prob < 0.0 || cfg.aug_rescale_prob > 1.0)
    fail(ErrorKind::Config, "mini clip: invalid augmentation settings");

  LabeledImageDataset train = make_synthetic_dataset(train_synth_config(seed, cfg));
  LabeledImageDataset test = make_synthetic_dataset(test_synth_config(seed, cfg));

  const auto& vocab = vocab_words();
  TrainableState state;
  {
    Rng rng(derive_seed(seed, 1));
    std::vector<int> image_dims = {cfg.image_size * cfg.image_size * 3};
    image_dims.insert(image_dims.end(), cfg.image_hidden.begin(), cfg.image_hidden.end());
    image_dims.push_back(cfg.embed_dim);
    state.image_net = Mlp(image_dims);
    state.image_net.init(rng);

    std::vector<int> text_dims = {cfg.token_dim};
    text_dims.insert(text_dims.end(), cfg.text_hidden.begin(), cfg.text_hidden.end());
    text_dims.push_back(cfg.embed_dim);
    state.text_net = Mlp(text_dims);
    state.text_net.init(rng);

    state.token_emb = Eigen::MatrixXd(static_cast<Eigen::Index>(vocab.size()), cfg.token_dim);
    for (Eigen::Index i = 0; i < state.token_emb.rows(); ++i)
      for (Eigen::Index j = 0; j < state.token_emb.cols(); ++j)
        state.token_emb(i, j) = rng.normal(0.0, 0.5);
    state.text_query = Eigen::VectorXd::Zero(cfg.token_dim);  // uniform pooling at init
    state.logit_s = std::log(cfg.initial_logit_scale);
  }

  train_contrastive(state, train, vocab, cfg, seed);

  double tau = 1.0 / std::exp(state.logit_s);
  ImageShape shape{cfg.image_size, cfg.image_size, 3};
  auto encoder = std::make_shared<MlpDualEncoder>(std::move(state.image_net), std::move(state.text_net),
                                                  std::move(state.text_query), shape, cfg.token_dim, tau);
  TokenEmbeddingTable table(vocab, std::move(state.token_emb));
  return MiniClip{std::move(encoder), std::move(table), std::move(train), std::move(test), cfg, seed};
}

void save_checkpoint(const MiniClip& clip, const std::string& path) {
  const MiniClipConfig& cfg = clip.config;
  serial::Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(clip.seed);
  w.u32(static_cast<std::uint32_t>(cfg.embed_dim));
  w.u32(static_cast<std::uint32_t>(cfg.token_dim));
  w.u32(static_cast<std::uint32_t>(cfg.image_size));
  w.u32(static_cast<std::uint32_t>(cfg.image_hidden.size()));
  for (int h : cfg.image_hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(cfg.text_hidden.size()));
  for (int h : cfg.text_hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(cfg.num_classes));
  w.u32(static_cast<std::uint32_t>(cfg.train_per_class));
  w.u32(static_cast<std::uint32_t>(cfg.test_per_class));
  w.u32(static_cast<std::uint32_t>(cfg.train_steps));
  w.f64(cfg.train_lr);
  w.f64(cfg.initial_logit_scale);
  w.f64(cfg.aug_noise);
  w.f64(cfg.aug_noise_prob);
  w.f64(cfg.aug_rescale_prob);
  w.u8(static_cast<std::uint8_t>(cfg.style));
  w.f64(clip.encoder->temperature());
  clip.table.serialize(w);
  clip.encoder->image_net().serialize(w);
  clip.encoder->text_net().serialize(w);
  const Eigen::VectorXd& query = clip.encoder->text_query();
  w.u32(static_cast<std::uint32_t>(query.size()));
  for (Eigen::Index i = 0; i < query.size(); ++i) w.f64(query(i));
  w.u64(params_hash(clip.table, clip.encoder->image_net(), clip.encoder->text_net(), query,
                    clip.encoder->temperature()));
  w.finish_with_checksum();
  serial::write_file(path, w.bytes());
}

MiniClip load_checkpoint(const std::string& path) {
  serial::Reader r(serial::read_file(path));
  r.verify_trailing_checksum("checkpoint " + path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorKind::Format, "not a checkpoint file: " + path);
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));

  std::uint64_t seed = r.u64();
  MiniClipConfig cfg;
  cfg.embed_dim = static_cast<int>(r.u32());
  cfg.token_dim = static_cast<int>(r.u32());
  cfg.image_size = static_cast<int>(r.u32());
  cfg.image_hidden.resize(r.u32());
  for (auto& h : cfg.image_hidden) h = static_cast<int>(r.u32());
  cfg.text_hidden.resize(r.u32());
  for (auto& h : cfg.text_hidden) h = static_cast<int>(r.u32());
  cfg.num_classes = static_cast<int>(r.u32());
  cfg.train_per_class = static_cast<int>(r.u32());
  cfg.test_per_class = static_cast<int>(r.u32());
  cfg.train_steps = static_cast<int>(r.u32());
  cfg.train_lr = r.f64();
  cfg.initial_logit_scale = r.f64();
  cfg.aug_noise = r.f64();
  cfg.aug_noise_prob = r.f64();
  cfg.aug_rescale_prob = r.f64();
  cfg.style = static_cast<SynthStyle>(r.u8());
  double tau = r.f64();

  TokenEmbeddingTable table = TokenEmbeddingTable::deserialize(r);
  Mlp image_net = Mlp::deserialize(r);
  Mlp text_net = Mlp::deserialize(r);
  std::uint32_t query_size = r.u32();
  Eigen::VectorXd query(static_cast<Eigen::Index>(query_size));
  for (Eigen::Index i = 0; i < query.size(); ++i) query(i) = r.f64();
  std::uint64_t stored_theta = r.u64();
  std::uint64_t actual_theta = params_hash(table, image_net, text_net, query, tau);
  if (stored_theta != actual_theta)
    fail(ErrorKind::Integrity, "checkpoint parameter checksum mismatch: " + path);

  ImageShape shape{cfg.image_size, cfg.image_size, 3};
  auto encoder = std::make_shared<MlpDualEncoder>(std::move(image_net), std::move(text_net),
                                                  std::move(query), shape, cfg.token_dim, tau);
  LabeledImageDataset train = make_synthetic_dataset(train_synth_config(seed, cfg));
  LabeledImageDataset test = make_synthetic_dataset(test_synth_config(seed, cfg));
  return MiniClip{std::move(encoder), std::move(table), std::move(train), std::move(test), cfg, seed};
}

}  // namespace advpt
