#include "coreguard/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "coreguard/attacks.hpp"
#include "coreguard/enclave.hpp"
#include "coreguard/error.hpp"
#include "coreguard/io.hpp"
#include "coreguard/kernels.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/locking.hpp"
#include "coreguard/runtime.hpp"

namespace coreguard {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(std::span<const float> values) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

// Whitespace-separated token ids, one sequence per non-empty line.
std::vector<std::vector<Token>> read_tokens(const fs::path& path, const ModelConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::vector<Token>> seqs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<Token> seq;
    std::string word;
    while (ls >> word) {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(word, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != word.size() || word[0] == '-') {
        throw InputError(fmt::format("{}:{}: '{}' is not a token id", path.string(), lineno, word));
      }
      seq.push_back(static_cast<Token>(v));
    }
    if (seq.empty()) continue;
    try {
      check_tokens(cfg, seq);
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    seqs.push_back(std::move(seq));
  }
  if (seqs.empty()) throw InputError(path.string() + " holds no token sequences");
  return seqs;
}

std::vector<NamedConfig> read_configs(const fs::path& path) {
  const auto bytes = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (j.is_object()) j = nlohmann::json::array({j});
  if (!j.is_array()) throw InputError(path.string() + ": expected a config object or array");
  std::vector<NamedConfig> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& item = j[i];
    std::string name = fmt::format("config{}", i);
    if (item.is_object() && item.contains("name")) {
      if (!item["name"].is_string()) throw InputError("config name must be a string");
      name = item["name"].get<std::string>();
    }
    out.push_back({name, io::config_from_json(item)});
  }
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    io::write_text(path, text);
  }
}

bool same_path(const fs::path& a, const fs::path& b) {
  return fs::weakly_canonical(a) == fs::weakly_canonical(b);
}

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    std::size_t v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError("bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

struct Options {
  std::uint64_t seed = 0;
  int threads = 0;

  std::string config, in, out, key_out, model, key, input, original, locked, configs,
      schemes = "noshield,blackbox,coreguard,dte,serdab,darknetz,soter,shadownet,tlg",
      kind, positions;
  std::size_t auth_pos = 0;
  std::size_t traces = 100;
  std::size_t eval = 100;
  std::size_t budget = 10000;
  bool no_otp = false;
  bool measure = false;
};

int cmd_gen(const Options& o, std::ostream& out) {
  const auto configs = read_configs(o.config);
  if (configs.size() != 1) throw InputError("gen expects exactly one config");
  const Model m = random_model(configs.front().config, o.seed);
  io::save_checkpoint(m, o.out);
  out << fmt::format("wrote {} ({} parameters, seed {})\n", o.out, m.parameter_count(), o.seed);
  return 0;
}

int cmd_lock(const Options& o, std::ostream& out) {
  if (same_path(o.out, o.key_out)) {
    throw UsageError("--out and --key-out must name different files");
  }
  const Model m = io::load_model(o.in);
  const ModelConfig& cfg = m.config();
  const std::size_t pos = o.auth_pos == 0 ? cfg.effective_auth_position() : o.auth_pos;
  Rng rng(o.seed);
  const std::uint64_t key_seed = rng.next();
  const std::uint64_t pad_seed = rng.next();
  const LockKeys keys = LockKeys::random(key_seed, cfg.d_model, cfg.d_ffn);
  const LockedModel locked = lock_model(m, keys, pos);
  io::save_checkpoint(locked, o.out);
  io::save_key({keys, pad_seed}, o.key_out);
  out << fmt::format("locked at L0={}\n", pos);
  out << fmt::format("locked_fraction={:.6f}\n", locked_fraction(cfg, pos));
  out << fmt::format("keyspace_bits={:.3f}\n", keyspace_bits(cfg.d_model));
  return 0;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const LockedModel locked = io::load_locked_model(o.model);
  const auto seqs = read_tokens(o.input, locked.config());
  BoundaryLedger total;
  std::optional<Enclave> enclave;
  if (!o.key.empty()) {
    const io::SealedKey key = io::load_key_for(o.key, locked.config());
    enclave.emplace(Enclave::provision(locked, key.keys, key.pad_seed));
    enclave->precompute_pads(seqs.size());
  } else {
    err << "warning: no key given; running the locked weights without authorization, "
           "output is scrambled\n";
  }
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    Matrix logits;
    if (enclave) {
      AuthorizedResult r = run_authorized(locked, *enclave, seqs[s]);
      logits = std::move(r.logits);
      total.rounds += r.ledger.rounds;
      total.bytes += r.ledger.bytes;
    } else {
      logits = run_unauthorized(locked, seqs[s]);
    }
    const auto arg = argmax_rows(logits);
    std::string ids;
    for (std::size_t i = 0; i < arg.size(); ++i) ids += (i ? " " : "") + std::to_string(arg[i]);
    out << fmt::format("seq {} logits_digest={:016x} argmax={}\n", s, fnv1a(logits.data()), ids);
  }
  out << fmt::format("ledger rounds={} bytes={}\n", total.rounds, total.bytes);
  return 0;
}

int cmd_verify(const Options& o, std::ostream& out) {
  const Model original = io::load_model(o.original);
  const LockedModel locked = io::load_locked_model(o.locked);
  const io::SealedKey key = io::load_key_for(o.key, locked.config());
  const LockVerification v = verify_lock(original, locked, key.keys, o.seed + 1);
  for (const auto& c : v.checks) {
    out << fmt::format("{:<4} {:<9} {:<8} {:.3e}\n", c.passed ? "ok" : "FAIL", c.scope, c.line,
                       c.max_relative_error);
  }
  if (!o.out.empty()) io::write_text(o.out, io::verification_json(v).dump(2) + "\n");
  v.require();
  out << "verified\n";
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const std::vector<NamedConfig> configs =
      o.configs.empty() ? reference_configs() : read_configs(o.configs);
  std::vector<SchemeDescriptor> schemes;
  std::stringstream ss(o.schemes);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    SchemeDescriptor d;
    try {
      d = SchemeDescriptor::parse(name);
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
    d.seed = o.seed;
    schemes.push_back(d);
  }
  if (schemes.empty()) throw UsageError("--schemes is empty");
  BenchOptions opts;
  opts.seed = o.seed;
  opts.measure = o.measure;
  const BenchReport report = bench_report(configs, schemes, opts);
  const bool json = fs::path(o.out).extension() == ".json";
  emit(json ? io::bench_json(report, configs).dump(2) + "\n" : io::bench_csv(report), o.out, out);
  return 0;
}

int cmd_attack(const Options& o, std::ostream& out) {
  const LockedModel locked = io::load_locked_model(o.model);
  const ModelConfig& cfg = locked.config();
  const io::SealedKey key = io::load_key_for(o.key, cfg);
  AttackReport report;
  if (o.kind == "differencing") {
    EnclaveOptions eo;
    if (o.no_otp) eo.pad_amplitude = 0.0f;
    Enclave enclave = Enclave::provision(locked, key.keys, key.pad_seed, eo);
    const auto seqs = random_sequences(o.seed, o.traces, cfg);
    const TraceSet traces = collect_encrypt_traces(locked, enclave, seqs);
    report = differencing_attack(traces, !o.no_otp, key.keys.pi_enc);
  } else if (o.kind == "simulate" || o.kind == "guess") {
    if (o.original.empty()) throw UsageError("--kind " + o.kind + " needs --original");
    const Model oracle = io::load_model(o.original);
    Rng rng(o.seed);
    const auto eval = random_sequences(rng.next(), o.eval, cfg);
    if (o.kind == "simulate") {
      Enclave enclave = Enclave::provision(locked, key.keys, key.pad_seed);
      const auto seqs = random_sequences(rng.next(), o.traces, cfg);
      const TraceSet traces = collect_authorization_traces(locked, enclave, seqs);
      report = simulate_authorization_unit(traces, locked, oracle, eval);
    } else {
      report = permutation_guess_attack(locked, o.budget, oracle, eval, rng.next());
    }
  } else {
    throw UsageError("--kind must be differencing, simulate or guess");
  }
  nlohmann::json j = io::attack_json(report);
  j["kind"] = o.kind;
  j["seed"] = o.seed;
  emit(j.dump(2) + "\n", o.out, out);
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const Model m = io::load_model(o.model);
  const ModelConfig& cfg = m.config();
  std::vector<std::size_t> positions;
  if (o.positions.empty()) {
    for (std::size_t p = 1; p < cfg.num_layers; ++p) positions.push_back(p);
  } else {
    positions = parse_list(o.positions);
  }
  Rng rng(o.seed);
  const LockKeys keys = LockKeys::random(rng.next(), cfg.d_model, cfg.d_ffn);
  SweepOptions so;
  so.seed = rng.next();
  so.trace_sequences = o.traces;
  so.eval_sequences = o.eval;
  emit(io::sweep_csv(sweep_auth_position(m, keys, positions, so)), o.out, out);
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Permutation-locked transformer toolkit with a simulated enclave"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--seed", o.seed, "seed for all randomness");
  app.add_option("--threads", o.threads, "OpenMP threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen", "write a random model checkpoint");
  gen->add_option("--config", o.config, "model config JSON")->required();
  gen->add_option("--out", o.out, "checkpoint path")->required();

  auto* lock = app.add_subcommand("lock", "lock a checkpoint and seal its keys");
  lock->add_option("--in", o.in, "original checkpoint")->required();
  lock->add_option("--auth-pos", o.auth_pos, "authorization position (0 = middle)");
  lock->add_option("--out", o.out, "locked checkpoint path")->required();
  lock->add_option("--key-out", o.key_out, "sealed key path")->required();

  auto* run = app.add_subcommand("run", "run a locked model, authorized when a key is given");
  run->add_option("--model", o.model, "locked checkpoint")->required();
  run->add_option("--key", o.key, "sealed key");
  run->add_option("--input", o.input, "token file, one sequence per line")->required();

  auto* verify = app.add_subcommand("verify", "check the locked-layer identities");
  verify->add_option("--original", o.original)->required();
  verify->add_option("--locked", o.locked)->required();
  verify->add_option("--key", o.key)->required();
  verify->add_option("--out", o.out, "JSON report path");

  auto* bench = app.add_subcommand("bench", "overhead comparison across schemes");
  bench->add_option("--configs", o.configs, "config JSON (default: four reference shapes)");
  bench->add_option("--schemes", o.schemes, "comma-separated scheme list");
  bench->add_option("--out", o.out, "report path (.json for JSON, CSV otherwise)");
  bench->add_flag("--measure", o.measure, "also run coreguard live on small configs");

  auto* attack = app.add_subcommand("attack", "run an adversary against a locked model");
  attack->add_option("--kind", o.kind)
      ->required()
      ->check(CLI::IsMember({"differencing", "simulate", "guess"}));
  attack->add_option("--model", o.model, "locked checkpoint")->required();
  attack->add_option("--key", o.key, "sealed key (drives the enclave, scores the result)")
      ->required();
  attack->add_option("--original", o.original, "original checkpoint (simulate, guess)");
  attack->add_option("--traces", o.traces, "observed sequences");
  attack->add_option("--eval", o.eval, "evaluation sequences");
  attack->add_option("--budget", o.budget, "guess budget");
  attack->add_flag("--no-otp", o.no_otp, "disable the one-time pad (ablation)");
  attack->add_option("--out", o.out, "JSON report path");

  auto* sweep = app.add_subcommand("sweep", "security proxies across authorization positions");
  sweep->add_option("--model", o.model, "original checkpoint")->required();
  sweep->add_option("--positions", o.positions, "comma-separated list (default: all)");
  sweep->add_option("--traces", o.traces, "trace sequences per position");
  sweep->add_option("--eval", o.eval, "evaluation sequences per position");
  sweep->add_option("--out", o.out, "CSV path");

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << "\n";
    return 2;
  }

  if (o.threads > 0) kernels::set_max_threads(o.threads);
  try {
    if (gen->parsed()) return cmd_gen(o, out);
    if (lock->parsed()) return cmd_lock(o, out);
    if (run->parsed()) return cmd_run(o, out, err);
    if (verify->parsed()) return cmd_verify(o, out);
    if (bench->parsed()) return cmd_bench(o, out);
    if (attack->parsed()) return cmd_attack(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << e.kind() << ": " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace coreguard
