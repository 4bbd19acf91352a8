// Command-line front end: data generation, degradation, training,
// enhancement, evaluation and gradient checks.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tricycle/config.hpp"
#include "tricycle/dataset.hpp"
#include "tricycle/degrade.hpp"
#include "tricycle/depth_image.hpp"
#include "tricycle/enhance.hpp"
#include "tricycle/errors.hpp"
#include "tricycle/gradcheck.hpp"
#include "tricycle/metrics.hpp"
#include "tricycle/scene.hpp"
#include "tricycle/trainer.hpp"

namespace fs = std::filesystem;
using namespace tricycle;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::string keys_help() {
  std::string out = "Configuration keys (--config FILE with key = value lines, or --set key=value):\n";
  char line[256];
  for (const auto& k : setting_keys()) {
    std::snprintf(line, sizeof line, "  %-26s %-10s %s\n", k.key.c_str(), k.default_value.c_str(),
                  k.description.c_str());
    out += line;
  }
  return out;
}

std::string numbered(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu.pgm", i);
  return buf;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

// Config file first, then --set, then the subcommand's own flags.
Settings resolve(const Common& common) {
  Settings s;
  if (!common.config.empty()) apply_settings_file(s, common.config);
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return s;
}

int run_gen_data(const Settings& s, const fs::path& out, std::size_t count) {
  s.scene.validate();
  fs::create_directories(out);
  DatasetManifest manifest;
  manifest.domain = Domain::High;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::stream(s.scene.seed, i);
    const fs::path path = out / numbered(i);
    save_depth(generate_scene(s.scene, rng), path);
    manifest.paths.push_back(path);
  }
  manifest.save(out / "manifest.txt");
  std::cout << "wrote " << count << " scenes to " << out.string() << "\n";
  return kOk;
}

int run_degrade(const Settings& s, const fs::path& in, const fs::path& out) {
  s.degrade.validate();
  const DatasetManifest src = DatasetManifest::load(in, Domain::High);
  if (src.paths.empty()) throw DataError("manifest " + in.string() + " lists no images");
  fs::create_directories(out);
  DatasetManifest result;
  result.domain = Domain::Low;
  for (std::size_t i = 0; i < src.paths.size(); ++i) {
    Rng rng = Rng::stream(s.degrade.seed, i);
    const fs::path path = out / src.paths[i].filename();
    save_depth(degrade(load_depth(src.paths[i]), s.degrade, rng), path);
    result.paths.push_back(path);
    result.references.push_back(src.paths[i]);
  }
  result.save(out / "manifest.txt");
  std::cout << "degraded " << result.paths.size() << " images into " << out.string() << "\n";
  return kOk;
}

int run_train(const Settings& s, const fs::path& low, const fs::path& high, const fs::path& out,
              const std::optional<fs::path>& resume) {
  UnpairedData data;
  data.low = DatasetManifest::load(low, Domain::Low).load_images();
  data.high = DatasetManifest::load(high, Domain::High).load_images();
  if (data.low.empty() || data.high.empty()) throw DataError("both manifests must list at least one image");
  fs::create_directories(out);
  std::ofstream(out / "config.txt") << dump_settings(s);
  const std::int64_t report_every = std::max<std::int64_t>(1, s.train.steps / 20);
  train(s.train, data, TrainOutputs{out}, resume, [&](std::int64_t step, const LossReport& r) {
    if (step % report_every == 0 || step == s.train.steps)
      std::cerr << "step " << step << " total " << format_number(r.total) << "\n";
  });
  std::cout << "checkpoint " << (out / "final.tcg").string() << "\n";
  return kOk;
}

int run_enhance(const Settings& s, const fs::path& ckpt, const fs::path& in, const fs::path& out, bool colorize_out) {
  const Generator<float> generator = load_generator(load_checkpoint(ckpt));
  const double z_max = s.train.z_max;
  auto one = [&](const fs::path& src, const fs::path& dst) {
    const DepthImage result = enhance(generator, load_depth(src), z_max);
    save_depth(result, dst);
    if (colorize_out) save_ppm(colorize(result, z_max), fs::path(dst).replace_extension(".ppm"));
  };
  if (in.extension() == ".pgm") {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    one(in, out);
    return kOk;
  }
  const DatasetManifest src = DatasetManifest::load(in, Domain::Low);
  fs::create_directories(out);
  DatasetManifest result;
  result.domain = Domain::High;
  result.references = src.references;
  for (const auto& p : src.paths) {
    const fs::path dst = out / p.filename();
    one(p, dst);
    result.paths.push_back(dst);
  }
  result.save(out / "manifest.txt");
  std::cout << "enhanced " << result.paths.size() << " images into " << out.string() << "\n";
  return kOk;
}

int run_eval(const Settings& s, const fs::path& pred, const std::optional<fs::path>& ref,
             const std::optional<fs::path>& out) {
  s.pncc.validate();
  // The domain tag is irrelevant here.
  auto load_any = [](const fs::path& p) { return DatasetManifest::load(p, Domain::High); };
  const DatasetManifest predictions = load_any(pred);
  std::vector<fs::path> refs = predictions.references;
  if (ref) refs = load_any(*ref).paths;
  if (refs.size() != predictions.paths.size())
    throw DataError("prediction and reference lists differ in length (or no references given)");
  if (refs.empty()) throw DataError("nothing to evaluate");

  std::ostringstream table;
  table << "id\tpncc\tmasked_mae\n";
  double sum_pncc = 0.0, sum_mae = 0.0;
  std::size_t mae_count = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const DepthImage x = load_depth(predictions.paths[i]);
    const DepthImage y = load_depth(refs[i]);
    const double p = pncc(x, y, s.pncc);
    double mae = std::nan("");
    try {
      mae = masked_mae(x, y);
      sum_mae += mae;
      ++mae_count;
    } catch (const DataError&) {
    }
    sum_pncc += p;
    table << predictions.paths[i].filename().string() << '\t' << format_number(p) << '\t' << format_number(mae)
          << '\n';
  }
  table << "mean\t" << format_number(sum_pncc / static_cast<double>(refs.size())) << '\t'
        << format_number(mae_count ? sum_mae / static_cast<double>(mae_count) : std::nan("")) << '\n';
  if (out) {
    std::ofstream(*out) << table.str();
  } else {
    std::cout << table.str();
  }
  return kOk;
}

int run_gradcheck(double tolerance) {
  bool ok = true;
  std::printf("%-20s %-12s %s\n", "case", "rel_error", "result");
  for (const auto& c : builtin_gradcheck_cases()) {
    const GradCheckResult r = run_gradcheck(c, tolerance);
    ok = ok && r.passed;
    std::printf("%-20s %-12.3e %s\n", r.name.c_str(), r.worst_relative_error, r.passed ? "ok" : "FAIL");
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised depth map enhancement with three-way cycle-consistent GANs"};
  app.require_subcommand(1);
  app.footer(keys_help());

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "override one key (repeatable), e.g. --set train.lr=2e-4");
  };

  std::string out_dir, in_path, low_path, high_path, ckpt_path, pred_path;
  std::string ref_path, resume_path, eval_out;
  std::size_t count = 100;
  std::optional<std::int64_t> size, seed, steps, block, step;
  std::optional<double> lr, z_max;
  bool colorize_flag = false;
  double tolerance = 1e-4;

  auto* gen = app.add_subcommand("gen-data", "generate clean procedural depth scenes");
  add_common(gen);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--count", count, "number of scenes")->capture_default_str();
  gen->add_option("--size", size, "scene side in pixels (scene.size)");
  gen->add_option("--seed", seed, "scene seed (scene.seed)");

  auto* deg = app.add_subcommand("degrade", "simulate sensor degradation of a clean manifest");
  add_common(deg);
  deg->add_option("--in", in_path, "manifest of clean images")->required()->check(CLI::ExistingFile);
  deg->add_option("--out", out_dir, "output directory")->required();
  deg->add_option("--seed", seed, "degradation seed (degrade.seed)");

  auto* tr = app.add_subcommand("train", "train the generator pair on unpaired manifests");
  add_common(tr);
  tr->add_option("--low", low_path, "manifest of low-quality images")->required()->check(CLI::ExistingFile);
  tr->add_option("--high", high_path, "manifest of high-quality images")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out_dir, "directory for checkpoints and the loss log")->required();
  tr->add_option("--resume", resume_path, "checkpoint to continue from")->check(CLI::ExistingFile);
  tr->add_option("--steps", steps, "total steps (train.steps)");
  tr->add_option("--seed", seed, "training seed (train.seed)");
  tr->add_option("--lr", lr, "learning rate (train.lr)");

  auto* enh = app.add_subcommand("enhance", "run the low-to-high generator of a checkpoint");
  add_common(enh);
  enh->add_option("--ckpt", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  enh->add_option("--in", in_path, "a .pgm image or a manifest")->required()->check(CLI::ExistingFile);
  enh->add_option("--out", out_dir, "output .pgm (single image) or directory (manifest)")->required();
  enh->add_flag("--colorize", colorize_flag, "also write a false-colour .ppm next to each output");
  enh->add_option("--z-max", z_max, "depth normalisation (train.z_max)");

  auto* ev = app.add_subcommand("eval", "PNCC and masked MAE against references");
  add_common(ev);
  ev->add_option("--pred", pred_path, "manifest of predictions")->required()->check(CLI::ExistingFile);
  ev->add_option("--ref", ref_path, "manifest of references (default: the references in --pred)")
      ->check(CLI::ExistingFile);
  ev->add_option("--out", eval_out, "write the table here instead of stdout");
  ev->add_option("--b", block, "patch side (pncc.block)");
  ev->add_option("--s", step, "patch stride (pncc.step)");

  auto* gc = app.add_subcommand("gradcheck", "compare analytic and numerical gradients");
  gc->add_option("--tol", tolerance, "maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    Settings s = resolve(common);
    auto set_if = [&](const char* key, const auto& v) {
      if (v) apply_setting(s, key, std::to_string(*v));
    };
    if (gen->parsed()) {
      set_if("scene.size", size);
      set_if("scene.seed", seed);
      return run_gen_data(s, out_dir, count);
    }
    if (deg->parsed()) {
      set_if("degrade.seed", seed);
      return run_degrade(s, in_path, out_dir);
    }
    if (tr->parsed()) {
      set_if("train.steps", steps);
      set_if("train.seed", seed);
      if (lr) s.train.lr = *lr;
      std::optional<fs::path> resume;
      if (!resume_path.empty()) resume = resume_path;
      return run_train(s, low_path, high_path, out_dir, resume);
    }
    if (enh->parsed()) {
      if (z_max) s.train.z_max = *z_max;
      return run_enhance(s, ckpt_path, in_path, out_dir, colorize_flag);
    }
    if (ev->parsed()) {
      set_if("pncc.block", block);
      set_if("pncc.step", step);
      std::optional<fs::path> ref, out;
      if (!ref_path.empty()) ref = ref_path;
      if (!eval_out.empty()) out = eval_out;
      return run_eval(s, pred_path, ref, out);
    }
    if (gc->parsed()) return run_gradcheck(tolerance);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
