// Command-line front end for the deblurring pipeline: dataset generation,
// training, evaluation, restoration, intra-exposure video and the rotating
// disk benchmark. Every command writes a run_manifest.json next to its
// outputs; exit codes are 0 ok, 1 validation, 2 numeric, 3 I/O.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvsdeblur/dataset_io.hpp"
#include "cvsdeblur/disk.hpp"
#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/metrics.hpp"
#include "cvsdeblur/parallel.hpp"
#include "cvsdeblur/sensor.hpp"
#include "cvsdeblur/stgdnet.hpp"
#include "cvsdeblur/trainer.hpp"
#include "png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace cvsdeblur;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config;
  std::string out = ".";
  int threads = 0;
};

// Collects everything the manifest must record; written exactly once per
// run, with status "partial" when the command threw mid-way.
struct Manifest {
  std::string command;
  ordered_json config = ordered_json::object();
  std::uint64_t seed = 0;
  ordered_json inputs = ordered_json::array();
  ordered_json outputs = ordered_json::array();
  ordered_json warnings = ordered_json::array();
  ordered_json extra = ordered_json::object();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const fs::path& dir, const std::string& status) const {
    ordered_json j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["status"] = status;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["warnings"] = warnings;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    j["duration_sec"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir / "run_manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
  }
};

ordered_json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
}

// Rejecting unknown keys catches config typos before they silently train
// with defaults.
void check_keys(const ordered_json& j, const std::vector<std::string>& allowed, const char* where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ValidationError(std::string(where) + ": unknown key '" + k + "'");
    }
  }
}

TrainConfig parse_train_config(const ordered_json& root) {
  TrainConfig cfg;
  if (!root.contains("train")) return cfg;
  const auto& j = root["train"];
  check_keys(j,
             {"epochs", "batch_size", "lr_max", "lr_min", "beta1", "beta2", "adam_eps", "weight_decay",
              "lambda_psnr", "loss_eps", "td_tail_augment", "seed"},
             "train config");
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr_max = j.value("lr_max", cfg.lr_max);
  cfg.lr_min = j.value("lr_min", cfg.lr_min);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.lambda_psnr = j.value("lambda_psnr", cfg.lambda_psnr);
  cfg.loss_eps = j.value("loss_eps", cfg.loss_eps);
  cfg.td_tail_augment = j.value("td_tail_augment", cfg.td_tail_augment);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

ArchConfig parse_arch_config(const ordered_json& root) {
  ArchConfig cfg;
  if (!root.contains("arch")) return cfg;
  const auto& j = root["arch"];
  check_keys(j, {"base_channels", "n_scales", "leaky_slope"}, "arch config");
  cfg.base_channels = j.value("base_channels", cfg.base_channels);
  cfg.n_scales = j.value("n_scales", cfg.n_scales);
  cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
  return cfg;
}

ordered_json train_config_json(const TrainConfig& c) {
  ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr_max"] = c.lr_max;
  j["lr_min"] = c.lr_min;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["weight_decay"] = c.weight_decay;
  j["lambda_psnr"] = c.lambda_psnr;
  j["loss_eps"] = c.loss_eps;
  j["td_tail_augment"] = c.td_tail_augment;
  j["seed"] = c.seed;
  return j;
}

ordered_json arch_config_json(const ArchConfig& c) {
  ordered_json j;
  j["base_channels"] = c.base_channels;
  j["n_scales"] = c.n_scales;
  j["leaky_slope"] = c.leaky_slope;
  j["use_sd"] = c.flags.use_sd;
  j["use_td"] = c.flags.use_td;
  j["use_ccf"] = c.flags.use_ccf;
  j["use_trrm"] = c.flags.use_trrm;
  return j;
}

AblationFlags parse_ablations(const std::vector<std::string>& ablate) {
  AblationFlags flags;
  for (const auto& a : ablate) {
    if (a == "no-sd") {
      flags.use_sd = false;
    } else if (a == "no-td") {
      flags.use_td = false;
    } else if (a == "no-ccf") {
      flags.use_ccf = false;
    } else if (a == "no-trrm") {
      flags.use_trrm = false;
    } else {
      throw ValidationError("unknown ablation '" + a + "' (expected no-sd, no-td, no-ccf, no-trrm)");
    }
  }
  return flags;
}

// ---------------------------------------------------------------------------
// datagen

struct DatagenOpts {
  std::string input;
  std::vector<int> exposures = {6600, 9240, 11880, 14520};
  bool srgb_decode = false;
  bool aug_headroom = false;
};

// A sequence is a directory of numbered PNGs; the input root either holds
// sequences or is itself a single sequence.
std::vector<fs::path> find_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("datagen: input is not a directory: " + root.string());
  std::vector<fs::path> seqs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && !tools::list_pngs(e.path()).empty()) seqs.push_back(e.path());
  }
  std::sort(seqs.begin(), seqs.end());
  if (seqs.empty() && !tools::list_pngs(root).empty()) seqs.push_back(root);
  if (seqs.empty()) throw ValidationError("datagen: no PNG sequences under " + root.string());
  return seqs;
}

void cmd_datagen(const GlobalOpts& g, const DatagenOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  man.inputs.push_back(o.input);
  man.config["exposures"] = o.exposures;
  man.config["srgb_decode"] = o.srgb_decode;
  man.config["aug_headroom"] = o.aug_headroom;

  int written = 0, skipped = 0;
  for (const auto& seq_dir : find_sequences(o.input)) {
    std::vector<Frame> frames;
    for (const auto& p : tools::list_pngs(seq_dir)) frames.push_back(tools::load_png(p, o.srgb_decode));
    for (int exp_us : o.exposures) {
      const ExposureInfo info = compute_exposure({exp_us, 1320});
      const int need = info.n + (o.aug_headroom ? 3 : 0);
      // Non-overlapping windows of n frames; leftovers are dropped.
      int start = 0;
      bool any = false;
      while (start + need <= static_cast<int>(frames.size())) {
        std::vector<Frame> window(frames.begin() + start, frames.begin() + start + need);
        CVSSample s = make_sample(window, {exp_us, 1320});
        std::vector<QuantFrame> extras;
        if (o.aug_headroom) {
          for (int j = 0; j < 3; ++j) {
            extras.push_back(quantize(temporal_difference(window[static_cast<size_t>(info.n - 1 + j)],
                                                          window[static_cast<size_t>(info.n + j)])));
          }
        }
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05d", written);
        write_sample(out_root / name, s, extras);
        man.outputs.push_back(name);
        ++written;
        any = true;
        start += info.n;
      }
      if (!any) {
        ++skipped;
        man.warnings.push_back(seq_dir.filename().string() + ": too short for exposure " +
                               std::to_string(exp_us) + " us");
      }
    }
  }
  man.extra["samples_written"] = written;
  man.extra["windows_skipped"] = skipped;
  std::printf("datagen: %d samples written, %d sequence/exposure pairs skipped\n", written, skipped);
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string dataset;
  std::vector<std::string> ablate;
  bool resume = false;
};

std::vector<TrainSample> load_train_set(const fs::path& root) {
  std::vector<TrainSample> data;
  for (const auto& dir : list_samples(root)) {
    TrainSample ts;
    ts.sample = read_sample(dir);
    ts.extra_tds = read_extra_tds(dir);
    data.push_back(std::move(ts));
  }
  if (data.empty()) throw ValidationError("train: no samples under " + root.string());
  return data;
}

void cmd_train(const GlobalOpts& g, const TrainOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  const ordered_json root = g.config.empty() ? ordered_json::object() : load_json_file(g.config);
  TrainConfig cfg = parse_train_config(root);
  ArchConfig arch = parse_arch_config(root);
  arch.flags = parse_ablations(o.ablate);
  if (g.seed_given) cfg.seed = g.seed;
  man.seed = cfg.seed;
  man.inputs.push_back(o.dataset);

  auto data = load_train_set(o.dataset);

  const fs::path ckpt = out_root / "checkpoint.bin";
  std::error_code ec;
  fs::create_directories(out_root, ec);

  STGDNet<float> model = [&] {
    if (!o.resume) return STGDNet<float>(arch, cfg.seed);
    STGDNet<float> m = load_model(ckpt.string(), arch);
    return m;
  }();
  TrainState state;
  if (o.resume) state = load_train_state(out_root.string());

  man.config["train"] = train_config_json(cfg);
  man.config["arch"] = arch_config_json(arch);
  man.config["resume"] = o.resume;

  // Persist after every epoch so an interrupted run resumes mid-schedule.
  auto res = train(model, data, cfg, &state, [&](int) {
    save_model(model, ckpt.string());
    save_train_state(out_root.string(), state);
  });

  write_loss_history((out_root / "loss_history.csv").string(), res.history, o.resume);
  man.outputs.push_back("checkpoint.bin");
  man.outputs.push_back("loss_history.csv");
  man.extra["steps"] = res.total_steps;
  man.extra["final_loss"] = res.history.empty() ? 0.0 : res.history.back().loss;
  std::printf("train: %lld steps, final loss %.4f\n", static_cast<long long>(res.total_steps),
              res.history.empty() ? 0.0 : res.history.back().loss);
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string dataset;
  std::string checkpoint;
};

void cmd_eval(const GlobalOpts& g, const EvalOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  man.inputs.push_back(o.dataset);
  man.inputs.push_back(o.checkpoint);
  STGDNet<float> model = load_model(o.checkpoint);

  ordered_json per_sample = ordered_json::array();
  double sum_rp = 0, sum_rs = 0, sum_bp = 0, sum_bs = 0;
  int count = 0;
  for (const auto& dir : list_samples(o.dataset)) {
    const CVSSample s = read_sample(dir);
    const Frame& gt = s.gt_frame();
    const Frame restored = restore_at(model, s, s.gt_index);
    ordered_json row;
    row["sample"] = dir.filename().string();
    row["restored_psnr"] = metrics::psnr(restored, gt);
    row["restored_ssim"] = metrics::ssim(restored, gt);
    row["blurry_psnr"] = metrics::psnr(s.blur, gt);
    row["blurry_ssim"] = metrics::ssim(s.blur, gt);
    sum_rp += row["restored_psnr"].get<double>();
    sum_rs += row["restored_ssim"].get<double>();
    sum_bp += row["blurry_psnr"].get<double>();
    sum_bs += row["blurry_ssim"].get<double>();
    ++count;
    per_sample.push_back(std::move(row));
  }
  if (count == 0) throw ValidationError("eval: no samples under " + o.dataset);

  ordered_json out;
  out["samples"] = per_sample;
  out["aggregate"] = {{"restored_psnr", sum_rp / count},
                      {"restored_ssim", sum_rs / count},
                      {"blurry_psnr", sum_bp / count},
                      {"blurry_ssim", sum_bs / count},
                      {"count", count}};
  std::error_code ec;
  fs::create_directories(out_root, ec);
  std::ofstream f(out_root / "metrics.json");
  if (!f) throw IoError("cannot write metrics.json in " + out_root.string());
  f << out.dump(2) << "\n";
  man.outputs.push_back("metrics.json");
  std::printf("eval: %d samples, restored %.3f dB vs blurry %.3f dB\n", count, sum_rp / count, sum_bp / count);
}

// ---------------------------------------------------------------------------
// infer / video

struct InferOpts {
  std::string sample;
  std::string checkpoint;
  int tick = -1;  // -1 selects the sample's training target tick
};

void cmd_infer(const GlobalOpts& g, const InferOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  man.inputs.push_back(o.sample);
  man.inputs.push_back(o.checkpoint);
  STGDNet<float> model = load_model(o.checkpoint);
  const CVSSample s = read_sample(o.sample);
  const int k = o.tick < 0 ? s.gt_index : o.tick;
  man.config["tick"] = k;
  const Frame restored = restore_at(model, s, k);
  std::error_code ec;
  fs::create_directories(out_root, ec);
  tools::save_png(out_root / "restored.png", restored);
  tools::save_f32(out_root / "restored.f32", restored);
  man.outputs.push_back("restored.png");
  man.outputs.push_back("restored.f32");
  std::printf("infer: tick %d restored\n", k);
}

void cmd_video(const GlobalOpts& g, const InferOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  man.inputs.push_back(o.sample);
  man.inputs.push_back(o.checkpoint);
  STGDNet<float> model = load_model(o.checkpoint);
  const CVSSample s = read_sample(o.sample);
  std::error_code ec;
  fs::create_directories(out_root, ec);
  for (int k = 0; k < s.n; ++k) {
    const Frame f = restore_at(model, s, k);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "frame_%02d", k);
    tools::save_png(out_root / (std::string(stem) + ".png"), f);
    tools::save_f32(out_root / (std::string(stem) + ".f32"), f);
    man.outputs.push_back(std::string(stem) + ".png");
    man.outputs.push_back(std::string(stem) + ".f32");
  }
  std::printf("video: %d frames written\n", s.n);
}

// ---------------------------------------------------------------------------
// disk-bench

struct DiskBenchOpts {
  std::string checkpoint;
  std::vector<double> rpms = {0, 100, 200, 300, 400, 500, 600};
  std::vector<int> exposures = {6600};
  std::vector<double> illuminations = {1.0};
  int size = 128;
  int sectors = 8;
};

// Blue-to-red heatmap of mean-rBEW over the (rpm, exposure*illumination)
// grid, nearest-neighbor upscaled for visibility.
void write_heatmap(const fs::path& path, const std::vector<std::vector<double>>& grid) {
  const int rows = static_cast<int>(grid.size());
  const int cols = rows ? static_cast<int>(grid[0].size()) : 0;
  if (!rows || !cols) return;
  double lo = 1e300, hi = -1e300;
  for (const auto& r : grid) {
    for (double v : r) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const int cell = 32;
  Frame img(rows * cell, cols * cell, 3);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = grid[static_cast<size_t>(i)][static_cast<size_t>(j)];
      float r = 0.2f, g = 0.2f, b = 0.2f;  // failed cells stay gray
      if (std::isfinite(v)) {
        const float t = static_cast<float>((v - lo) / (hi - lo));
        r = t;
        g = 0.15f;
        b = 1.0f - t;
      }
      for (int y = i * cell; y < (i + 1) * cell; ++y) {
        for (int x = j * cell; x < (j + 1) * cell; ++x) {
          img.at(y, x, 0) = r;
          img.at(y, x, 1) = g;
          img.at(y, x, 2) = b;
        }
      }
    }
  }
  tools::save_png(path, img);
}

void cmd_disk_bench(const GlobalOpts& g, const DiskBenchOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  man.inputs.push_back(o.checkpoint);
  man.config["rpms"] = o.rpms;
  man.config["exposures"] = o.exposures;
  man.config["illuminations"] = o.illuminations;
  man.config["size"] = o.size;
  man.config["sectors"] = o.sectors;
  STGDNet<float> model = load_model(o.checkpoint);

  ordered_json cells = ordered_json::array();
  // Rows: illumination x exposure; columns: rpm.
  std::vector<std::vector<double>> grid;
  int failures = 0;
  for (double illum : o.illuminations) {
    for (int exp_us : o.exposures) {
      std::vector<double> row;
      for (double rpm : o.rpms) {
        DiskSpec spec;
        spec.size = o.size;
        spec.sectors = o.sectors;
        spec.illumination = illum;
        spec.rpm = rpm;
        const ExposureInfo info = compute_exposure({exp_us, 1320});
        spec.n_frames = info.n;
        ordered_json cell;
        cell["rpm"] = rpm;
        cell["exposure_us"] = exp_us;
        cell["illumination"] = illum;
        double value = std::nan("");
        try {
          const auto frames = render_disk_frames(spec);
          const CVSSample s = make_sample(frames, {exp_us, 1320});
          const Frame restored = restore_at(model, s, s.gt_index);
          DiskSpec ref_spec = spec;
          ref_spec.rpm = 0.0;
          ref_spec.n_frames = 1;
          const Frame reference = render_disk_frames(ref_spec)[0];
          const auto report = metrics::mean_rbew(restored, reference, disk_geometry(spec));
          value = report.mean_rbew;
          cell["mean_rbew"] = report.mean_rbew;
          cell["edges_used"] = static_cast<int>(report.rbews.size());
          cell["edges_excluded"] = report.excluded;
        } catch (const std::exception& e) {
          cell["error"] = e.what();  // fit failures are reported, never fatal
          ++failures;
        }
        row.push_back(value);
        cells.push_back(std::move(cell));
      }
      grid.push_back(std::move(row));
    }
  }

  ordered_json out;
  out["cells"] = cells;
  out["cell_count"] = cells.size();
  out["failures"] = failures;
  std::error_code ec;
  fs::create_directories(out_root, ec);
  std::ofstream f(out_root / "disk_bench.json");
  if (!f) throw IoError("cannot write disk_bench.json in " + out_root.string());
  f << out.dump(2) << "\n";
  write_heatmap(out_root / "heatmap.png", grid);
  man.outputs.push_back("disk_bench.json");
  man.outputs.push_back("heatmap.png");
  man.extra["failures"] = failures;
  std::printf("disk-bench: %zu cells, %d fit failures\n", cells.size(), failures);
}

// ---------------------------------------------------------------------------
// validate

struct ValidateOpts {
  std::string dataset;
};

void cmd_validate(const GlobalOpts& g, const ValidateOpts& o, Manifest& man) {
  const fs::path out_root = g.out;
  man.inputs.push_back(o.dataset);
  ordered_json failures = ordered_json::array();
  int checked = 0, static_checked = 0;
  for (const auto& dir : list_samples(o.dataset)) {
    ++checked;
    try {
      const CVSSample s = read_sample(dir);
      read_extra_tds(dir);
      // A static scene (all TD codes zero) must have blur identical to gt.
      bool static_scene = true;
      for (const auto& td : s.td_seq) {
        for (std::int8_t v : td.data) {
          if (v != 0) {
            static_scene = false;
            break;
          }
        }
        if (!static_scene) break;
      }
      if (static_scene && !s.td_seq.empty()) {
        ++static_checked;
        const Frame& gt = s.gt_frame();
        if (!s.blur.same_shape(gt) || s.blur.data != gt.data) {
          throw ValidationError("static sample but blur differs from gt");
        }
      }
    } catch (const std::exception& e) {
      ordered_json f;
      f["sample"] = dir.filename().string();
      f["error"] = e.what();
      failures.push_back(std::move(f));
    }
  }
  if (checked == 0) throw ValidationError("validate: no samples under " + o.dataset);

  ordered_json out;
  out["checked"] = checked;
  out["static_verified"] = static_checked;
  out["failures"] = failures;
  std::error_code ec;
  fs::create_directories(out_root, ec);
  std::ofstream f(out_root / "validate.json");
  if (!f) throw IoError("cannot write validate.json in " + out_root.string());
  f << out.dump(2) << "\n";
  man.outputs.push_back("validate.json");
  man.extra["checked"] = checked;
  man.extra["failed"] = failures.size();
  std::printf("validate: %d samples checked, %zu failed\n", checked, failures.size());
  if (!failures.empty()) throw ValidationError("validate: " + std::to_string(failures.size()) + " samples failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complementary-vision-sensor deblurring pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Run seed (overrides config seed)")->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--config", g.config, "JSON config file (train + arch blocks)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");

  DatagenOpts dg;
  auto* c_dg = app.add_subcommand("datagen", "Build a dataset from sharp PNG sequences");
  c_dg->add_option("--input", dg.input, "Directory of PNG sequences")->required();
  c_dg->add_option("--exposures", dg.exposures, "RGB exposure times in microseconds");
  c_dg->add_flag("--srgb-decode", dg.srgb_decode, "Decode sRGB to linear on load");
  c_dg->add_flag("--aug-headroom", dg.aug_headroom, "Reserve 3 post-exposure frames per sample");

  TrainOpts tr;
  auto* c_tr = app.add_subcommand("train", "Train a restoration model");
  c_tr->add_option("--dataset", tr.dataset, "Dataset root")->required();
  c_tr->add_option("--ablate", tr.ablate, "Ablations: no-sd, no-td, no-ccf, no-trrm");
  c_tr->add_flag("--resume", tr.resume, "Resume from checkpoint in --out");

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  c_ev->add_option("--dataset", ev.dataset, "Dataset root")->required();
  c_ev->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();

  InferOpts in_;
  auto* c_in = app.add_subcommand("infer", "Restore the sharp frame of one sample");
  c_in->add_option("--sample", in_.sample, "Sample directory")->required();
  c_in->add_option("--checkpoint", in_.checkpoint, "Model checkpoint")->required();
  c_in->add_option("--tick", in_.tick, "Exposure tick to restore (default: sample target)");

  InferOpts vd;
  auto* c_vd = app.add_subcommand("video", "Restore every tick of one exposure");
  c_vd->add_option("--sample", vd.sample, "Sample directory")->required();
  c_vd->add_option("--checkpoint", vd.checkpoint, "Model checkpoint")->required();

  DiskBenchOpts db;
  auto* c_db = app.add_subcommand("disk-bench", "Rotating-disk boundary benchmark");
  c_db->add_option("--checkpoint", db.checkpoint, "Model checkpoint")->required();
  c_db->add_option("--rpms", db.rpms, "Rotation speeds");
  c_db->add_option("--exposures", db.exposures, "Exposure times in microseconds");
  c_db->add_option("--illuminations", db.illuminations, "Illumination scales in (0, 1]");
  c_db->add_option("--size", db.size, "Chart image size");
  c_db->add_option("--sectors", db.sectors, "Sector count (even)");

  ValidateOpts va;
  auto* c_va = app.add_subcommand("validate", "Check dataset integrity");
  c_va->add_option("--dataset", va.dataset, "Dataset root")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  Manifest man;
  man.seed = g.seed;
  const fs::path out_root = g.out;
  try {
    if (g.threads > 0) set_num_threads(g.threads);
    if (c_dg->parsed()) {
      man.command = "datagen";
      cmd_datagen(g, dg, man);
    } else if (c_tr->parsed()) {
      man.command = "train";
      cmd_train(g, tr, man);
    } else if (c_ev->parsed()) {
      man.command = "eval";
      cmd_eval(g, ev, man);
    } else if (c_in->parsed()) {
      man.command = "infer";
      cmd_infer(g, in_, man);
    } else if (c_vd->parsed()) {
      man.command = "video";
      cmd_video(g, vd, man);
    } else if (c_db->parsed()) {
      man.command = "disk-bench";
      cmd_disk_bench(g, db, man);
    } else if (c_va->parsed()) {
      man.command = "validate";
      cmd_validate(g, va, man);
    }
    man.write(out_root, "complete");
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", man.command.empty() ? "cvsdeblur" : man.command.c_str(), e.what());
    try {
      man.warnings.push_back(e.what());
      man.write(out_root, "partial");
    } catch (...) {
    }
    if (dynamic_cast<const NumericError*>(&e)) return 2;
    if (dynamic_cast<const IoError*>(&e)) return 3;
    return 1;
  }
}
