#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tricycle/adam.hpp"
#include "tricycle/checkpoint.hpp"
#include "tricycle/dataset.hpp"
#include "tricycle/degrade.hpp"
#include "tricycle/enhance.hpp"
#include "tricycle/losses.hpp"
#include "tricycle/models.hpp"
#include "tricycle/random.hpp"

namespace tricycle {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 1;
  std::int64_t steps = 1000;
  std::uint64_t seed = 1;
  Index crop_size = 128;
  double z_max = kDefaultZMax;
  int max_depth_shift = 500;
  std::int64_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::int64_t log_interval = 1;
  LossWeights weights;
  GeneratorConfig generator;  // input_size is taken from crop_size
  DiscriminatorConfig discriminator;

  GeneratorConfig generator_config() const {
    GeneratorConfig g = generator;
    g.input_size = crop_size;
    return g;
  }
  void validate() const;
};

/// The two unpaired training domains, held in memory.
struct UnpairedData {
  std::vector<DepthImage> low;
  std::vector<DepthImage> high;

  /// Low domain made of degraded copies of `clean` (per-image RNG streams).
  static UnpairedData synthetic(const std::vector<DepthImage>& clean, const DegradeConfig& cfg);
};

struct SampledPair {
  std::size_t low_index = 0;
  std::size_t high_index = 0;
  Tensor<float> low;
  Tensor<float> high;
};

/// Independent uniform draws from each domain, augmented and normalized.
SampledPair sample_pair(const UnpairedData& data, const TrainConfig& cfg, Rng& rng);

/// Everything that determines the rest of a training run.
struct TrainState {
  Generator<float> low_to_high;
  Generator<float> high_to_low;
  Discriminator<float> disc_low;
  Discriminator<float> disc_high;
  AdamState<float> opt_low_to_high;
  AdamState<float> opt_high_to_low;
  AdamState<float> opt_disc_low;
  AdamState<float> opt_disc_high;
  Rng rng;
  std::int64_t step = 0;

  static TrainState initialize(const TrainConfig& cfg);
};

/// Discriminator update on detached fakes, then one generator update on the
/// full weighted objective. Throws NumericalError naming the first
/// non-finite term.
LossReport train_step(TrainState& state, const TrainConfig& cfg, const Tensor<float>& z_low,
                      const Tensor<float>& z_high);

/// Parameter-name prefixes inside checkpoints.
inline constexpr const char* kLowToHigh = "G_LH";
inline constexpr const char* kHighToLow = "G_HL";
inline constexpr const char* kDiscLow = "D_L";
inline constexpr const char* kDiscHigh = "D_H";

Checkpoint snapshot(const TrainState& state);
/// Copies a checkpoint into a state built for the same configuration; any
/// missing, extra or differently shaped tensor is rejected.
void restore(TrainState& state, const Checkpoint& ckpt);

/// Rebuilds the generator stored under `prefix` (architecture inferred from
/// parameter names and extents).
Generator<float> load_generator(const Checkpoint& ckpt, const std::string& prefix = kLowToHigh);

struct TrainOutputs {
  std::filesystem::path directory;
  std::string log_name = "train_log.tsv";
};

/// Runs train_step until cfg.steps, writing `step_<n>.tcg` every
/// checkpoint_interval steps, `final.tcg` at the end, and a TSV log
/// (step, term, value). With `resume`, continues from that checkpoint and
/// appends to the log.
TrainState train(const TrainConfig& cfg, const UnpairedData& data, const TrainOutputs& out,
                 const std::optional<std::filesystem::path>& resume = std::nullopt,
                 const std::function<void(std::int64_t, const LossReport&)>& on_step = {});

}  // namespace tricycle
