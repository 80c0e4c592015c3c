#include "coreguard/enclave.hpp"

#include <string>

#include "coreguard/error.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/transformer.hpp"

namespace coreguard {

MaskedFeature MaskedFeature::affine(const Matrix& w, std::span<const float> bias) const {
  return MaskedFeature(coreguard::affine(value_, w, bias));
}

Enclave::Enclave(LockKeys keys, std::uint64_t pad_seed, Matrix wn_original,
                 Vector gamma2, Vector beta2, std::size_t seq_len, EnclaveOptions opts)
    : keys_(std::move(keys)),
      pad_source_(pad_seed),
      wn_(std::move(wn_original)),
      gamma2_(std::move(gamma2)),
      beta2_(std::move(beta2)),
      d_model_(keys_.pi.size()),
      d_ffn_(keys_.pi_enc.size()),
      seq_len_(seq_len),
      opts_(opts) {
  if (wn_.rows() != d_ffn_ || wn_.cols() != d_model_ || gamma2_.size() != d_model_ ||
      beta2_.size() != d_model_) {
    throw SizeError("enclave: W_n / norm parameters do not match key sizes");
  }
  if (seq_len_ == 0) throw SizeError("enclave: seq_len must be >= 1");
  if (!(opts_.pad_amplitude >= 0.0f)) throw InputError("enclave: negative pad amplitude");
}

Enclave Enclave::provision(const LockedModel& locked, const LockKeys& keys,
                           std::uint64_t pad_seed, EnclaveOptions opts) {
  const ModelConfig& cfg = locked.config();
  if (keys.pi.size() != cfg.d_model || keys.pi_enc.size() != cfg.d_ffn) {
    throw SizeError("enclave: key sizes (" + std::to_string(keys.pi.size()) + ", " +
                    std::to_string(keys.pi_enc.size()) + ") do not match model (" +
                    std::to_string(cfg.d_model) + ", " + std::to_string(cfg.d_ffn) + ")");
  }
  const LayerWeights& auth = locked.auth_layer();
  const PermutationKey pi_inv = invert(keys.pi);
  Matrix wn = permute_rows(auth.wn, invert(keys.pi_enc));
  Vector gamma2 = permute(auth.gamma2, pi_inv);
  Vector beta2 = permute(auth.beta2, pi_inv);
  return Enclave(keys, pad_seed, std::move(wn), std::move(gamma2), std::move(beta2),
                 cfg.seq_len, opts);
}

void Enclave::precompute_pads(std::size_t count) {
  const float a = opts_.pad_amplitude;
  for (std::size_t i = 0; i < count; ++i) {
    Matrix p(seq_len_, d_ffn_);
    if (a > 0.0f) {
      for (float& v : p.data()) v = pad_source_.uniform(-a, a);
    }
    Matrix pwn = matmul(p, wn_);
    pads_.push_back({std::move(p), std::move(pwn)});
  }
}

MaskedFeature Enclave::encrypt_step(const Matrix& m) {
  if (m.rows() != seq_len_ || m.cols() != d_ffn_) {
    throw SizeError("encrypt_step: feature must be " + std::to_string(seq_len_) + "x" +
                    std::to_string(d_ffn_));
  }
  if (in_flight_) throw ProtocolError("encrypt_step: previous pad still in flight");
  if (pads_.empty()) throw ProtocolError("encrypt_step: no unused pad available");
  ledger_.record(m.size());
  in_flight_ = std::move(pads_.front());
  pads_.pop_front();
  MaskedFeature out(permute_cols(add(m, in_flight_->p), keys_.pi_enc));
  ledger_.record(out.value().size());
  return out;
}

Matrix Enclave::decrypt_authorize(const MaskedFeature& n_prime, const Matrix& y) {
  if (!in_flight_) {
    throw ProtocolError("decrypt_authorize: no pad in flight (call encrypt_step first)");
  }
  const Matrix& np = n_prime.value();
  if (np.rows() != seq_len_ || np.cols() != d_model_ || y.rows() != seq_len_ ||
      y.cols() != d_model_) {
    throw SizeError("decrypt_authorize: inputs must be " + std::to_string(seq_len_) +
                    "x" + std::to_string(d_model_));
  }
  ledger_.record(np.size());
  ledger_.record(y.size());
  const Matrix n = subtract(np, in_flight_->pwn);
  in_flight_.reset();
  Matrix z_pi = permute_cols(add_norm(y, n, gamma2_, beta2_), keys_.pi);
  ledger_.record(z_pi.size());
  return z_pi;
}

}  // namespace coreguard
