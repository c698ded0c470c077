#include "retro/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "retro/errors.hpp"

namespace retro {

std::string to_string(ModuleKind m) { return m == ModuleKind::sketchy ? "sketchy" : "intensive"; }

ModuleKind parse_module_kind(std::string_view text) {
  if (text == "sketchy") return ModuleKind::sketchy;
  if (text == "intensive") return ModuleKind::intensive;
  throw ConfigError("unknown module '" + std::string(text) + "' (expected sketchy or intensive)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw ConfigError("warmup_ratio must lie in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (alpha1 < 0.0 || alpha2 < 0.0) throw ConfigError("alpha1 and alpha2 must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"warmup_ratio", c.warmup_ratio},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"seed", c.seed},
       {"module", to_string(c.module)},
       {"ifv", c.ifv ? nlohmann::json(to_string(*c.ifv)) : nlohmann::json("none")},
       {"alpha1", c.alpha1},
       {"alpha2", c.alpha2},
       {"matching", to_string(c.matching)},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps}};
}

double lr_schedule(std::size_t step, std::size_t total_steps, double warmup_ratio, double base_lr) {
  if (step > total_steps) {
    throw ScheduleError("lr_schedule: step " + std::to_string(step) + " beyond total " +
                        std::to_string(total_steps));
  }
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw ScheduleError("lr_schedule: warmup_ratio outside [0,1)");
  if (total_steps == 0) return 0.0;
  const auto warmup = static_cast<std::size_t>(warmup_ratio * static_cast<double>(total_steps));
  if (step < warmup) return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  return base_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

bool decays(const std::string& name) {
  const auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return !(ends_with("bias") || name.find("norm.") != std::string::npos);
}

AdamW::AdamW(std::vector<NamedTensor> params, Options options) : options_(options) {
  for (auto& p : params) {
    Slot s;
    s.decay = decays(p.name);
    s.m.assign(p.tensor.size(), 0.0);
    s.v.assign(p.tensor.size(), 0.0);
    s.param = std::move(p);
    slots_.push_back(std::move(s));
  }
}

void AdamW::zero_grad() {
  for (auto& s : slots_) s.param.tensor.zero_grad();
}

void AdamW::step(double lr) {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& s : slots_) {
    auto w = s.param.tensor.mutable_data();
    const bool has_grad = s.param.tensor.has_grad();
    const auto g = has_grad ? s.param.tensor.grad() : std::span<const double>();
    const double decay = s.decay ? lr * options_.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      w[i] -= decay * w[i];
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * gi;
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * gi * gi;
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrimmedInput trim_padding(const Feature& f) {
  std::size_t n = f.attention_mask.size();
  while (n > 0 && f.attention_mask[n - 1] == 0) --n;
  return {std::span<const int>(f.input_ids).first(n), std::span<const int>(f.type_ids).first(n),
          std::span<const std::uint8_t>(f.attention_mask).first(n)};
}

namespace {

// Shared loop: `batch_loss` builds the differentiable loss of one batch.
template <typename LossFn>
TrainResult run_training(std::vector<NamedTensor> params, std::span<const Feature> features,
                         const TrainConfig& config, const EpochCallback& on_epoch, LossFn&& batch_loss) {
  config.validate();
  if (features.empty()) throw EmptyBatchError("train: no training features");
  AdamW optimizer(std::move(params),
                  {config.adam_beta1, config.adam_beta2, config.adam_eps, config.weight_decay});
  Rng dropout_rng(config.seed + 1);
  const ForwardContext ctx{true, &dropout_rng};

  const std::size_t per_epoch = (features.size() + config.batch_size - 1) / config.batch_size;
  TrainResult result;
  result.total_steps = per_epoch * config.max_epochs;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto order = epoch_order(features.size(), config.seed, epoch);
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(features.size(), lo + config.batch_size);
      std::vector<const Feature*> batch;
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&features[order[i]]);

      optimizer.zero_grad();
      const Tensor loss = batch_loss(batch, ctx);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::string qids;
        for (const auto* f : batch) qids += (qids.empty() ? "" : ",") + f->qid;
        throw TrainingError("non-finite loss " + std::to_string(value) + " at step " +
                            std::to_string(result.steps) + " (batch qids: " + qids + ")");
      }
      loss.backward();
      optimizer.step(lr_schedule(result.steps, result.total_steps, config.warmup_ratio,
                                 config.learning_rate));
      result.loss_trace.push_back(value);
      epoch_sum += value;
      ++result.steps;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(per_epoch));
    result.epochs_run = epoch + 1;
    if (on_epoch && on_epoch(epoch + 1, result)) {
      result.stopped_early = epoch + 1 < config.max_epochs;
      break;
    }
  }
  return result;
}

}  // namespace

TrainResult train_sketchy(SketchyModel& model, std::span<const Feature> features,
                          const TrainConfig& config, const EpochCallback& on_epoch) {
  return run_training(model.named_parameters(), features, config, on_epoch,
                      [&](const std::vector<const Feature*>& batch, const ForwardContext& ctx) {
                        std::vector<Tensor> logits;
                        std::vector<int> labels;
                        for (const auto* f : batch) {
                          const auto in = trim_padding(*f);
                          logits.push_back(model.forward(in.ids, in.types, in.mask, ctx).logits);
                          labels.push_back(f->ans_label);
                        }
                        return efv_loss(logits, labels);
                      });
}

TrainResult train_intensive(IntensiveModel& model, std::span<const Feature> features,
                            const TrainConfig& config, const EpochCallback& on_epoch) {
  return run_training(
      model.named_parameters(), features, config, on_epoch,
      [&](const std::vector<const Feature*>& batch, const ForwardContext& ctx) {
        std::vector<SpanLogits> spans;
        std::vector<SpanLabel> span_labels;
        std::vector<Tensor> ifv;
        std::vector<int> labels;
        for (const auto* f : batch) {
          const auto in = trim_padding(*f);
          auto out = intensive_forward(model, in.ids, in.types, in.mask, ctx);
          spans.push_back(std::move(out.span));
          span_labels.push_back(f->span_label);
          if (model.config.ifv) ifv.push_back(out.ifv);
          labels.push_back(f->ans_label);
        }
        const Tensor span = span_loss(spans, span_labels);
        if (!model.config.ifv) return scale(span, config.alpha1);
        return joint_loss(span, ifv_loss(ifv, labels, *model.config.ifv), config.alpha1, config.alpha2);
      });
}

}  // namespace retro
