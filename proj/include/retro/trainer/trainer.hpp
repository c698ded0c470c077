#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retro/datapipe/features.hpp"
#include "retro/readers/intensive.hpp"
#include "retro/readers/sketchy.hpp"

namespace retro {

enum class ModuleKind { sketchy, intensive };
std::string to_string(ModuleKind m);
ModuleKind parse_module_kind(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 13;
  ModuleKind module = ModuleKind::intensive;
  std::optional<IfvVariant> ifv = IfvVariant::ce;
  double alpha1 = 0.5;
  double alpha2 = 0.5;
  Matching matching = Matching::none;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);

// Linear warmup over the first int(warmup_ratio * total_steps) steps, then
// linear decay to 0 at total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, double warmup_ratio, double base_lr);

// Biases and layer-norm parameters are not decayed.
bool decays(const std::string& parameter_name);

// Adam with decoupled weight decay and bias correction.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<NamedTensor> params, Options options);

  void zero_grad();
  void step(double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  struct Slot {
    NamedTensor param;
    std::vector<double> m, v;
    bool decay = true;
  };
  std::vector<Slot> slots_;
  Options options_;
  std::size_t t_ = 0;
};

struct TrainResult {
  std::vector<double> loss_trace;  // one entry per optimizer step
  std::vector<double> epoch_loss;  // mean step loss per epoch
  std::size_t steps = 0;
  std::size_t total_steps = 0;  // schedule horizon
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

// Called after each epoch (1-based); returning true stops training.
using EpochCallback = std::function<bool(std::size_t epoch, const TrainResult& progress)>;

// Deterministic order of feature indices for one epoch.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch);

TrainResult train_sketchy(SketchyModel& model, std::span<const Feature> features,
                          const TrainConfig& config, const EpochCallback& on_epoch = {});
TrainResult train_intensive(IntensiveModel& model, std::span<const Feature> features,
                            const TrainConfig& config, const EpochCallback& on_epoch = {});

// Unpadded view of one feature; trailing padding never influences the
// unmasked outputs, so forward passes run on the trimmed sequence.
struct TrimmedInput {
  std::span<const int> ids;
  std::span<const int> types;
  std::span<const std::uint8_t> mask;
};
TrimmedInput trim_padding(const Feature& feature);

// ---- checkpoints -----------------------------------------------------------

// Identifies a vocabulary by its token list.
std::string vocab_fingerprint(const Vocab& vocab);

void save_model(const std::filesystem::path& path, const SketchyModel& model, const Vocab& vocab,
                const nlohmann::json& extra = {});
void save_model(const std::filesystem::path& path, const IntensiveModel& model, const Vocab& vocab,
                const nlohmann::json& extra = {});

// Both throw ConfigError on a wrong module kind or a vocabulary mismatch.
SketchyModel load_sketchy(const std::filesystem::path& path, const Vocab& vocab);
IntensiveModel load_intensive(const std::filesystem::path& path, const Vocab& vocab);

nlohmann::json run_manifest(const TrainConfig& config, const TrainResult& result,
                            const std::filesystem::path& checkpoint);

}  // namespace retro
