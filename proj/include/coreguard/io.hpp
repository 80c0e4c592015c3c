#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coreguard/attacks.hpp"
#include "coreguard/locking.hpp"
#include "coreguard/runtime.hpp"
#include "coreguard/traces.hpp"
#include "coreguard/transformer.hpp"

namespace coreguard::io {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::uint16_t kKeyVersion = 1;
inline constexpr std::uint16_t kTraceVersion = 1;

// --- checkpoints ("CGRD") ---------------------------------------------------

Bytes encode_checkpoint(const Model& m);
Bytes encode_checkpoint(const LockedModel& m);
// Throws FormatError (with the byte offset) on truncation, bad magic,
// version mismatch, an empty or inconsistent tensor directory, missing
// tensors or non-finite values.
std::variant<Model, LockedModel> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& m, const std::filesystem::path& path);
void save_checkpoint(const LockedModel& m, const std::filesystem::path& path);
std::variant<Model, LockedModel> load_checkpoint(const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
LockedModel load_locked_model(const std::filesystem::path& path);

// --- sealed keys ("CGKY") ---------------------------------------------------

struct SealedKey {
  LockKeys keys;
  std::uint64_t pad_seed = 0;

  friend bool operator==(const SealedKey&, const SealedKey&) = default;
};

Bytes encode_key(const SealedKey& key);
// Rejects non-bijective index arrays.
SealedKey decode_key(std::span<const std::uint8_t> bytes);
void save_key(const SealedKey& key, const std::filesystem::path& path);
SealedKey load_key(const std::filesystem::path& path);
// Throws InputError when the key's d / d_ffn differ from the model's.
void check_key_matches(const SealedKey& key, const ModelConfig& cfg);
SealedKey load_key_for(const std::filesystem::path& path, const ModelConfig& cfg);

// --- traces ("CGTR") --------------------------------------------------------

Bytes encode_traces(const TraceSet& traces);
TraceSet decode_traces(std::span<const std::uint8_t> bytes);
void save_traces(const TraceSet& traces, const std::filesystem::path& path);
TraceSet load_traces(const std::filesystem::path& path);

// --- reports ----------------------------------------------------------------

// Columns: model,scheme,tee_flops,fraction,bytes,rounds
std::string bench_csv(const BenchReport& report);
nlohmann::json bench_json(const BenchReport& report, std::span<const NamedConfig> configs);
nlohmann::json attack_json(const AttackReport& report);
nlohmann::json verification_json(const LockVerification& report);
// Columns: auth_position,locked_fraction,simulation_agreement,simulation_residual,unauthorized_agreement
std::string sweep_csv(std::span<const SweepRow> rows);

ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& cfg);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace coreguard::io
