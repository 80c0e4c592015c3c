#include "coreguard/locking.hpp"

#include <algorithm>
#include <limits>

#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"

namespace coreguard {

LockKeys LockKeys::identity(std::size_t d_model, std::size_t d_ffn) {
  return {PermutationKey::identity(d_model), PermutationKey::identity(d_ffn)};
}

LockKeys LockKeys::random(std::uint64_t seed, std::size_t d_model, std::size_t d_ffn) {
  Rng rng(seed);
  PermutationKey pi = random_permutation(rng, d_model);
  PermutationKey pi_enc = random_permutation(rng, d_ffn);
  return {std::move(pi), std::move(pi_enc)};
}

LockedModel::LockedModel(ModelConfig config, Matrix embedding,
                         std::vector<LayerWeights> front, LayerWeights auth,
                         std::vector<LayerWeights> rear, Matrix head)
    : config_(config),
      embedding_(std::move(embedding)),
      front_(std::move(front)),
      auth_(std::move(auth)),
      rear_(std::move(rear)),
      head_(std::move(head)) {
  config_.validate_lockable();
  if (config_.auth_position == 0) {
    throw InputError("locked model: auth_position must be explicit");
  }
  if (front_.size() + 1 != config_.auth_position ||
      front_.size() + 1 + rear_.size() != config_.num_layers) {
    throw SizeError("locked model: layer split does not match auth_position");
  }
  if (embedding_.rows() != config_.vocab_size || embedding_.cols() != config_.d_model ||
      head_.rows() != config_.d_model || head_.cols() != config_.vocab_size) {
    throw SizeError("locked model: embedding or head shape mismatch");
  }
  for (const auto& w : front_) w.check_shapes(config_);
  auth_.check_shapes(config_);
  for (const auto& w : rear_) w.check_shapes(config_);
}

bool bitwise_equal(const LockedModel& a, const LockedModel& b) noexcept {
  if (!(a.config() == b.config()) || a.front_layers().size() != b.front_layers().size() ||
      a.rear_layers().size() != b.rear_layers().size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.front_layers().size(); ++i) {
    if (!bitwise_equal(a.front_layers()[i], b.front_layers()[i])) return false;
  }
  for (std::size_t i = 0; i < a.rear_layers().size(); ++i) {
    if (!bitwise_equal(a.rear_layers()[i], b.rear_layers()[i])) return false;
  }
  return bitwise_equal(a.auth_layer(), b.auth_layer()) &&
         bitwise_equal(a.embedding(), b.embedding()) &&
         bitwise_equal(a.output_head(), b.output_head());
}

LayerWeights lock_layer(const LayerWeights& w, const PermutationKey& pi) {
  if (w.wq.rows() != pi.size()) throw SizeError("lock_layer: key size != d_model");
  LayerWeights out;
  // protection
  out.wq = permute_rows(w.wq, pi);
  out.wk = permute_rows(w.wk, pi);
  out.wv = permute_rows(w.wv, pi);
  out.wm = permute_rows(w.wm, pi);
  out.bm = w.bm;
  // propagation
  out.wo = permute_cols(w.wo, pi);
  out.gamma1 = permute(w.gamma1, pi);
  out.beta1 = permute(w.beta1, pi);
  out.wn = permute_cols(w.wn, pi);
  out.bn = permute(w.bn, pi);
  out.gamma2 = permute(w.gamma2, pi);
  out.beta2 = permute(w.beta2, pi);
  return out;
}

LockedModel lock_model(const Model& m, const LockKeys& keys, std::size_t auth_position) {
  ModelConfig cfg = m.config();
  cfg.auth_position = auth_position;
  if (auth_position < 1 || auth_position >= cfg.num_layers) {
    throw InputError("lock_model: auth position " + std::to_string(auth_position) +
                     " outside [1, " + std::to_string(cfg.num_layers - 1) + "]");
  }
  if (keys.pi.size() != cfg.d_model || keys.pi_enc.size() != cfg.d_ffn) {
    throw SizeError("lock_model: key sizes do not match d_model / d_ffn");
  }
  const auto& layers = m.layers();
  std::vector<LayerWeights> front(layers.begin(), layers.begin() + (auth_position - 1));

  LayerWeights auth = layers[auth_position - 1];
  auth.wn = permute_rows(auth.wn, keys.pi_enc);
  auth.gamma2 = permute(auth.gamma2, keys.pi);
  auth.beta2 = permute(auth.beta2, keys.pi);

  std::vector<LayerWeights> rear;
  rear.reserve(cfg.num_layers - auth_position);
  for (std::size_t i = auth_position; i < cfg.num_layers; ++i) {
    rear.push_back(lock_layer(layers[i], keys.pi));
  }
  return LockedModel(cfg, m.embedding(), std::move(front), std::move(auth),
                     std::move(rear), permute_rows(m.output_head(), keys.pi));
}

std::size_t locked_parameter_count(const ModelConfig& cfg, std::size_t auth_position) {
  if (auth_position < 1 || auth_position >= cfg.num_layers) {
    throw InputError("locked_parameter_count: auth position out of range");
  }
  return (cfg.num_layers - auth_position) * layer_parameter_count(cfg) +
         cfg.d_model * cfg.vocab_size;
}

std::size_t total_parameter_count(const ModelConfig& cfg) {
  return 2 * cfg.vocab_size * cfg.d_model + cfg.num_layers * layer_parameter_count(cfg);
}

double locked_fraction(const ModelConfig& cfg, std::size_t auth_position) {
  return static_cast<double>(locked_parameter_count(cfg, auth_position)) /
         static_cast<double>(total_parameter_count(cfg));
}

bool LockVerification::passed() const { return first_failure() == nullptr; }

const LockCheck* LockVerification::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return &c;
  }
  return nullptr;
}

void LockVerification::require() const {
  if (const LockCheck* f = first_failure()) {
    throw VerificationError("lock verification failed at " + f->scope + " line " +
                            f->line + " (max relative error " +
                            std::to_string(f->max_relative_error) + ")");
  }
}

namespace {

void add_check(LockVerification& report, std::string scope, std::string line,
               double err) {
  report.checks.push_back(
      {std::move(scope), std::move(line), err, err <= kLockTolerance});
}

void add_exact(LockVerification& report, std::string scope, std::string line,
               bool equal) {
  report.checks.push_back({std::move(scope), std::move(line),
                           equal ? 0.0 : std::numeric_limits<double>::infinity(),
                           equal});
}

}  // namespace

LockVerification verify_lock(const Model& original, const LockedModel& locked,
                             const LockKeys& keys, std::uint64_t probe_seed,
                             std::size_t probes) {
  const ModelConfig& cfg = original.config();
  if (cfg.d_model != locked.config().d_model || cfg.d_ffn != locked.config().d_ffn ||
      cfg.num_layers != locked.config().num_layers ||
      keys.pi.size() != cfg.d_model || keys.pi_enc.size() != cfg.d_ffn) {
    throw SizeError("verify_lock: original, locked model and keys disagree on shape");
  }
  const std::size_t l0 = locked.auth_position();
  LockVerification report;

  for (std::size_t i = 0; i < locked.front_layers().size(); ++i) {
    add_exact(report, "front[" + std::to_string(i) + "]", "w'=w",
              bitwise_equal(locked.front_layers()[i], original.layers()[i]));
  }

  const LayerWeights& auth_orig = original.layers()[l0 - 1];
  const LayerWeights& auth = locked.auth_layer();
  add_check(report, "auth", "W'_n=pi_enc^T W_n",
            max_relative_error(auth.wn, permute_rows(auth_orig.wn, keys.pi_enc)));
  add_check(report, "auth", "gamma'_2=gamma_2 pi",
            max_relative_error(auth.gamma2, permute(auth_orig.gamma2, keys.pi)));
  add_check(report, "auth", "beta'_2=beta_2 pi",
            max_relative_error(auth.beta2, permute(auth_orig.beta2, keys.pi)));

  Rng rng(probe_seed);
  for (std::size_t r = 0; r < locked.rear_layers().size(); ++r) {
    const std::size_t layer = l0 + r;
    double err[8] = {};
    for (std::size_t p = 0; p < probes; ++p) {
      const Matrix x = random_matrix(rng, cfg.seq_len, cfg.d_model, 1.0f);
      const LayerTrace a = layer_forward_traced(original.layers()[layer], x, cfg, layer);
      const LayerTrace b = layer_forward_traced(locked.rear_layers()[r],
                                                permute_cols(x, keys.pi), cfg, layer);
      const double e[8] = {
          max_relative_error(b.q, a.q),
          max_relative_error(b.k, a.k),
          max_relative_error(b.v, a.v),
          max_relative_error(b.o, permute_cols(a.o, keys.pi)),
          max_relative_error(b.y, permute_cols(a.y, keys.pi)),
          max_relative_error(b.m, a.m),
          max_relative_error(b.n, permute_cols(a.n, keys.pi)),
          max_relative_error(b.z, permute_cols(a.z, keys.pi)),
      };
      for (int i = 0; i < 8; ++i) err[i] = std::max(err[i], e[i]);
    }
    static constexpr const char* kLines[8] = {"Q'=Q",        "K'=K",       "V'=V",
                                              "o'=o*pi",     "y'=y*pi",    "m'=m",
                                              "n'=n*pi",     "z'=z*pi"};
    const std::string scope = "rear[" + std::to_string(layer) + "]";
    for (int i = 0; i < 8; ++i) add_check(report, scope, kLines[i], err[i]);
  }

  add_check(report, "head", "H'=pi^T H",
            max_relative_error(locked.output_head(),
                               permute_rows(original.output_head(), keys.pi)));
  return report;
}

}  // namespace coreguard
