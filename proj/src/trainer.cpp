#include "tricycle/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "tricycle/errors.hpp"

namespace tricycle {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("train: lr must be non-negative");
  if (batch_size != 1) throw std::invalid_argument("train: batch size is fixed to 1");
  if (steps < 0) throw std::invalid_argument("train: steps must be non-negative");
  if (!(z_max > 0.0)) throw std::invalid_argument("train: z_max must be positive");
  if (max_depth_shift < 0) throw std::invalid_argument("train: depth shift must be non-negative");
  if (checkpoint_interval < 0 || log_interval < 0) throw std::invalid_argument("train: intervals must be non-negative");
  weights.validate();
  generator_config().validate();
  discriminator.validate();
  if (crop_size < (Index(1) << discriminator.layers))
    throw ShapeError("train: crop size smaller than the discriminator's total stride");
}

UnpairedData UnpairedData::synthetic(const std::vector<DepthImage>& clean, const DegradeConfig& cfg) {
  UnpairedData data;
  data.high = clean;
  data.low.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    Rng rng = Rng::stream(cfg.seed, i);
    data.low.push_back(degrade(clean[i], cfg, rng));
  }
  return data;
}

SampledPair sample_pair(const UnpairedData& data, const TrainConfig& cfg, Rng& rng) {
  if (data.low.empty() || data.high.empty()) throw DataError("sample_pair: empty domain");
  SampledPair pair;
  pair.low_index = static_cast<std::size_t>(rng.uniform_int(data.low.size()));
  pair.high_index = static_cast<std::size_t>(rng.uniform_int(data.high.size()));
  const AugmentConfig aug{cfg.crop_size, cfg.max_depth_shift};
  pair.low = depth_to_tensor<float>(augment(data.low[pair.low_index], aug, rng), cfg.z_max);
  pair.high = depth_to_tensor<float>(augment(data.high[pair.high_index], aug, rng), cfg.z_max);
  return pair;
}

TrainState TrainState::initialize(const TrainConfig& cfg) {
  cfg.validate();
  Rng init_lh = Rng::stream(cfg.seed, 0);
  Rng init_hl = Rng::stream(cfg.seed, 1);
  Rng init_dl = Rng::stream(cfg.seed, 2);
  Rng init_dh = Rng::stream(cfg.seed, 3);
  TrainState s{Generator<float>(cfg.generator_config(), init_lh),
               Generator<float>(cfg.generator_config(), init_hl),
               Discriminator<float>(cfg.discriminator, init_dl),
               Discriminator<float>(cfg.discriminator, init_dh),
               {}, {}, {}, {},
               Rng::stream(cfg.seed, 4),
               0};
  s.opt_low_to_high = AdamState<float>::for_parameters(s.low_to_high.parameters());
  s.opt_high_to_low = AdamState<float>::for_parameters(s.high_to_low.parameters());
  s.opt_disc_low = AdamState<float>::for_parameters(s.disc_low.parameters());
  s.opt_disc_high = AdamState<float>::for_parameters(s.disc_high.parameters());
  return s;
}

namespace {

// Freezes a parameter list for the lifetime of the guard.
class FrozenParameters {
 public:
  explicit FrozenParameters(std::vector<Tensor<float>> params) : params_(std::move(params)) {
    set_requires_grad(params_, false);
  }
  ~FrozenParameters() { set_requires_grad(params_, true); }
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  std::vector<Tensor<float>> params_;
};

void require_finite(double value, std::string_view term, std::int64_t step) {
  if (!std::isfinite(value))
    throw NumericalError("non-finite loss term '" + std::string(term) + "' at step " + std::to_string(step));
}

std::vector<Tensor<float>> concat(std::vector<Tensor<float>> a, const std::vector<Tensor<float>>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

LossReport train_step(TrainState& state, const TrainConfig& cfg, const Tensor<float>& z_low,
                      const Tensor<float>& z_high) {
  const auto lh_params = state.low_to_high.parameters();
  const auto hl_params = state.high_to_low.parameters();
  const auto dl_params = state.disc_low.parameters();
  const auto dh_params = state.disc_high.parameters();
  for (const auto* list : {&lh_params, &hl_params, &dl_params, &dh_params}) zero_grad(*list);

  const Translator<float> low_to_high = translator(state.low_to_high);
  const Translator<float> high_to_low = translator(state.high_to_low);
  const Translator<float> disc_low = translator(state.disc_low);
  const Translator<float> disc_high = translator(state.disc_high);
  const auto lr = static_cast<float>(cfg.lr);

  Graph<float> gen_graph;
  const Tensor<float> fake_high = low_to_high(gen_graph, z_low);
  const Tensor<float> fake_low = high_to_low(gen_graph, z_high);

  LossReport report;
  {
    Graph<float> disc_graph;
    const Tensor<float> d_high = discriminator_loss(disc_graph, disc_high, z_high, fake_high);
    const Tensor<float> d_low = discriminator_loss(disc_graph, disc_low, z_low, fake_low);
    report.discriminator_h = d_high.item();
    report.discriminator_l = d_low.item();
    require_finite(report.discriminator_h, "disc_h", state.step);
    require_finite(report.discriminator_l, "disc_l", state.step);
    const std::array<Tensor<float>, 2> parts{d_high, d_low};
    const std::array<float, 2> ones{1.0f, 1.0f};
    disc_graph.backward(weighted_sum<float>(disc_graph, parts, ones));
    adam_step<float>(dh_params, state.opt_disc_high, lr);
    adam_step<float>(dl_params, state.opt_disc_low, lr);
    zero_grad(dh_params);
    zero_grad(dl_params);
  }

  {
    const FrozenParameters frozen(concat(dl_params, dh_params));
    const auto terms = generator_terms(gen_graph, low_to_high, high_to_low, disc_high, disc_low, z_low, z_high,
                                       fake_high, fake_low);
    auto [total, gen_report] = total_generator_loss(gen_graph, terms, cfg.weights);
    for (int i = 0; i < kTermCount; ++i)
      require_finite(gen_report.terms[static_cast<std::size_t>(i)], kTermNames[static_cast<std::size_t>(i)],
                     state.step);
    require_finite(gen_report.total, "total", state.step);
    report.terms = gen_report.terms;
    report.total = gen_report.total;
    gen_graph.backward(total);
  }
  adam_step<float>(lh_params, state.opt_low_to_high, lr);
  adam_step<float>(hl_params, state.opt_high_to_low, lr);
  zero_grad(lh_params);
  zero_grad(hl_params);
  state.step += 1;
  return report;
}

namespace {

template <typename Model>
void append_tensors(Checkpoint& ckpt, const std::string& prefix, const Model& model) {
  for (const auto& p : model.named_parameters()) {
    CheckpointTensor t;
    t.name = prefix + "." + p.name;
    for (Index e : p.tensor.shape().dims()) t.extents.push_back(static_cast<std::uint32_t>(e));
    t.values.assign(p.tensor.value().data(), p.tensor.value().data() + p.tensor.numel());
    ckpt.tensors.push_back(std::move(t));
  }
}

CheckpointOptimizer export_optimizer(const std::string& name, const AdamState<float>& s) {
  CheckpointOptimizer o;
  o.name = name;
  o.step = s.step;
  for (const auto& m : s.first_moment) o.first_moment.emplace_back(m.data(), m.data() + m.size());
  for (const auto& v : s.second_moment) o.second_moment.emplace_back(v.data(), v.data() + v.size());
  return o;
}

template <typename Model>
std::size_t import_tensors(const Checkpoint& ckpt, const std::string& prefix, const Model& model) {
  std::size_t count = 0;
  for (const auto& p : model.named_parameters()) {
    const std::string name = prefix + "." + p.name;
    const CheckpointTensor* t = ckpt.find(name);
    if (!t) throw ShapeError("checkpoint lacks tensor " + name);
    std::vector<std::uint32_t> expect;
    for (Index e : p.tensor.shape().dims()) expect.push_back(static_cast<std::uint32_t>(e));
    if (t->extents != expect) throw ShapeError("checkpoint tensor " + name + " has mismatched extents");
    p.tensor.mutable_value() = Eigen::Map<const ArrayX<float>>(t->values.data(), static_cast<Index>(t->values.size()));
    ++count;
  }
  return count;
}

void import_optimizer(const Checkpoint& ckpt, const std::string& name, AdamState<float>& s) {
  const CheckpointOptimizer* found = nullptr;
  for (const auto& o : ckpt.optimizers)
    if (o.name == name) found = &o;
  if (!found) throw ShapeError("checkpoint lacks optimizer state " + name);
  if (found->first_moment.size() != s.first_moment.size())
    throw ShapeError("checkpoint optimizer " + name + " has the wrong parameter count");
  for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
    if (static_cast<Index>(found->first_moment[i].size()) != s.first_moment[i].size())
      throw ShapeError("checkpoint optimizer " + name + " has mismatched moment sizes");
    s.first_moment[i] = Eigen::Map<const ArrayX<float>>(found->first_moment[i].data(), s.first_moment[i].size());
    s.second_moment[i] = Eigen::Map<const ArrayX<float>>(found->second_moment[i].data(), s.second_moment[i].size());
  }
  s.step = found->step;
}

}  // namespace

Checkpoint snapshot(const TrainState& state) {
  Checkpoint ckpt;
  ckpt.step = static_cast<std::uint64_t>(state.step);
  append_tensors(ckpt, kLowToHigh, state.low_to_high);
  append_tensors(ckpt, kHighToLow, state.high_to_low);
  append_tensors(ckpt, kDiscLow, state.disc_low);
  append_tensors(ckpt, kDiscHigh, state.disc_high);
  ckpt.optimizers.push_back(export_optimizer(kLowToHigh, state.opt_low_to_high));
  ckpt.optimizers.push_back(export_optimizer(kHighToLow, state.opt_high_to_low));
  ckpt.optimizers.push_back(export_optimizer(kDiscLow, state.opt_disc_low));
  ckpt.optimizers.push_back(export_optimizer(kDiscHigh, state.opt_disc_high));
  ckpt.rng_state = state.rng.state();
  return ckpt;
}

void restore(TrainState& state, const Checkpoint& ckpt) {
  std::size_t imported = 0;
  imported += import_tensors(ckpt, kLowToHigh, state.low_to_high);
  imported += import_tensors(ckpt, kHighToLow, state.high_to_low);
  imported += import_tensors(ckpt, kDiscLow, state.disc_low);
  imported += import_tensors(ckpt, kDiscHigh, state.disc_high);
  if (imported != ckpt.tensors.size()) throw ShapeError("checkpoint holds tensors this configuration does not have");
  if (ckpt.optimizers.size() != 4) throw ShapeError("checkpoint must hold four optimizer states");
  import_optimizer(ckpt, kLowToHigh, state.opt_low_to_high);
  import_optimizer(ckpt, kHighToLow, state.opt_high_to_low);
  import_optimizer(ckpt, kDiscLow, state.opt_disc_low);
  import_optimizer(ckpt, kDiscHigh, state.opt_disc_high);
  state.rng.set_state(ckpt.rng_state);
  state.step = static_cast<std::int64_t>(ckpt.step);
}

Generator<float> load_generator(const Checkpoint& ckpt, const std::string& prefix) {
  const CheckpointTensor* first = ckpt.find(prefix + ".conv1.weight");
  if (!first || first->extents.size() != 4) throw ShapeError("checkpoint has no generator under " + prefix);
  GeneratorConfig cfg;
  cfg.base_channels = first->extents[0];
  cfg.levels = 1;
  while (ckpt.find(prefix + ".conv" + std::to_string(cfg.levels + 1) + ".1.weight")) ++cfg.levels;
  cfg.input_size = cfg.granularity();
  Rng unused(0);
  Generator<float> g(cfg, unused);
  import_tensors(ckpt, prefix, g);
  return g;
}

TrainState train(const TrainConfig& cfg, const UnpairedData& data, const TrainOutputs& out,
                 const std::optional<std::filesystem::path>& resume,
                 const std::function<void(std::int64_t, const LossReport&)>& on_step) {
  cfg.validate();
  if (data.low.empty() || data.high.empty()) throw DataError("train: both domains need at least one image");
  std::filesystem::create_directories(out.directory);

  TrainState state = TrainState::initialize(cfg);
  if (resume) restore(state, load_checkpoint(*resume));

  const auto log_path = out.directory / out.log_name;
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + log_path.string());
  if (!resume) log << "step\tterm\tvalue\n";

  char buf[64];
  auto row = [&](std::int64_t step, std::string_view term, double value) {
    std::snprintf(buf, sizeof buf, "%.9g", value);
    log << step << '\t' << term << '\t' << buf << '\n';
  };

  while (state.step < cfg.steps) {
    const SampledPair pair = sample_pair(data, cfg, state.rng);
    const LossReport report = train_step(state, cfg, pair.low, pair.high);
    if (cfg.log_interval > 0 && state.step % cfg.log_interval == 0) {
      for (int i = 0; i < kTermCount; ++i)
        row(state.step, kTermNames[static_cast<std::size_t>(i)], report.terms[static_cast<std::size_t>(i)]);
      row(state.step, "total", report.total);
      row(state.step, "disc_h", report.discriminator_h);
      row(state.step, "disc_l", report.discriminator_l);
      log.flush();
    }
    if (on_step) on_step(state.step, report);
    if (cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0) {
      std::snprintf(buf, sizeof buf, "step_%08lld.tcg", static_cast<long long>(state.step));
      save_checkpoint(snapshot(state), out.directory / buf);
    }
  }
  save_checkpoint(snapshot(state), out.directory / "final.tcg");
  return state;
}

}  // namespace tricycle
