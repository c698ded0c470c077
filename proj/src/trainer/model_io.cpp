#include <cstdio>

#include "retro/errors.hpp"
#include "retro/trainer/trainer.hpp"

namespace retro {

std::string vocab_fingerprint(const Vocab& vocab) {
  // 64-bit FNV-1a over the tokens, newline separated
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : vocab.tokens()) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

nlohmann::json base_meta(const char* kind, const Vocab& vocab, const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["kind"] = kind;
  meta["vocab_size"] = vocab.size();
  meta["vocab_fingerprint"] = vocab_fingerprint(vocab);
  return meta;
}

nlohmann::json read_meta(const Checkpoint& ckpt, const std::filesystem::path& path, const char* kind,
                         const Vocab& vocab) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": unreadable checkpoint metadata: " + e.what());
  }
  const auto found = meta.value("kind", std::string("?"));
  if (found != kind) {
    throw ConfigError(path.string() + ": expected a " + kind + " checkpoint, found '" + found + "'");
  }
  if (meta.value("vocab_fingerprint", std::string()) != vocab_fingerprint(vocab) ||
      meta.value("vocab_size", std::size_t{0}) != vocab.size()) {
    throw ConfigError(path.string() + ": checkpoint was trained with a different vocabulary (" +
                      std::to_string(meta.value("vocab_size", std::size_t{0})) + " tokens vs " +
                      std::to_string(vocab.size()) + ")");
  }
  return meta;
}

}  // namespace

void save_model(const std::filesystem::path& path, const SketchyModel& model, const Vocab& vocab,
                const nlohmann::json& extra) {
  auto meta = base_meta("sketchy", vocab, extra);
  meta["encoder"] = model.encoder.config;
  save_checkpoint(path, {meta.dump(), model.named_parameters()});
}

void save_model(const std::filesystem::path& path, const IntensiveModel& model, const Vocab& vocab,
                const nlohmann::json& extra) {
  auto meta = base_meta("intensive", vocab, extra);
  meta["intensive"] = model.config;
  save_checkpoint(path, {meta.dump(), model.named_parameters()});
}

SketchyModel load_sketchy(const std::filesystem::path& path, const Vocab& vocab) {
  const auto ckpt = load_checkpoint(path);
  const auto meta = read_meta(ckpt, path, "sketchy", vocab);
  auto model = SketchyModel::init(meta.at("encoder").get<EncoderConfig>(), 0);
  auto params = model.named_parameters();
  assign_parameters(ckpt, params);
  return model;
}

IntensiveModel load_intensive(const std::filesystem::path& path, const Vocab& vocab) {
  const auto ckpt = load_checkpoint(path);
  const auto meta = read_meta(ckpt, path, "intensive", vocab);
  auto model = IntensiveModel::init(meta.at("intensive").get<IntensiveConfig>(), 0);
  auto params = model.named_parameters();
  assign_parameters(ckpt, params);
  return model;
}

nlohmann::json run_manifest(const TrainConfig& config, const TrainResult& result,
                            const std::filesystem::path& checkpoint) {
  return {{"config", config},
          {"seed", config.seed},
          {"steps", result.steps},
          {"total_steps", result.total_steps},
          {"epochs_run", result.epochs_run},
          {"stopped_early", result.stopped_early},
          {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()},
          {"epoch_loss", result.epoch_loss},
          {"loss_trace", result.loss_trace},
          {"checkpoint", checkpoint.string()}};
}

}  // namespace retro
