// contextloc command line: synthetic data generation, training, inference,
// evaluation, gradient checking and the context-network ablation sweep.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "contextloc/contextloc.hpp"

namespace fs = std::filesystem;
using namespace contextloc;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kNumerical = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

Config load_config(const Common& c) {
  Config cfg;
  if (!c.config_path.empty()) cfg = parse_config(read_text(c.config_path));
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key=value config file");
  sub->add_option("--seed", c.seed, "overrides the config seed");
  sub->add_option("--out", c.out, "output directory");
}

template <typename T>
void run_gen(const Config& cfg, const fs::path& out) {
  const Dataset<T> data = generate_synthetic<T>(cfg);
  save_dataset(data, out);
  std::cout << "wrote " << data.videos.size() << " videos to " << out.string() << "\n";
}

template <typename T>
void run_train(const Config& cfg, const fs::path& data_dir, const std::string& resume, const fs::path& out) {
  const Dataset<T> data = load_dataset<T>(data_dir, cfg.model.num_classes);
  std::optional<Checkpoint<T>> start;
  if (!resume.empty()) start = load_checkpoint<T>(resume);
  fs::create_directories(out);
  auto result = train<T>(cfg, data, start ? &*start : nullptr, [](const EpochMetrics& m) {
    std::printf("epoch %3d  cls %.6f  comp %.6f  reg %.6f  acc %.4f\n", m.epoch, m.loss_cls, m.loss_comp, m.loss_reg,
                m.train_acc);
  });
  save_checkpoint(result.checkpoint, out / "checkpoint.ctxk");
  write_text(out / "train_log.csv", metrics_csv(result.log));
}

template <typename T>
void run_infer(const std::string& ckpt_path, const fs::path& data_dir, const std::string& flow_ckpt_path,
               const std::string& flow_data_dir, const std::optional<std::string>& stream, const fs::path& out) {
  Checkpoint<T> ckpt = load_checkpoint<T>(ckpt_path);
  Config& cfg = ckpt.config;
  if (stream) set_config_value(cfg, "stream", *stream);
  const Dataset<T> data = load_dataset<T>(data_dir, cfg.model.num_classes);
  std::optional<Checkpoint<T>> flow_ckpt;
  std::optional<Dataset<T>> flow_data;
  if (!flow_ckpt_path.empty()) flow_ckpt = load_checkpoint<T>(flow_ckpt_path);
  if (!flow_data_dir.empty()) flow_data = load_dataset<T>(flow_data_dir, cfg.model.num_classes);
  const auto dets = infer(ckpt.model, data, cfg.inference, cfg.heads, flow_ckpt ? &flow_ckpt->model : nullptr,
                          flow_data ? &*flow_data : nullptr);
  fs::create_directories(out);
  write_text(out / "detections.json", dump_json_array(dets));
  std::size_t n = 0;
  for (const auto& v : dets) n += v.detections.size();
  std::cout << "wrote " << n << " detections for " << dets.size() << " videos\n";
}

Precision checkpoint_precision(const std::string& path) {
  return load_checkpoint<double>(path).config.precision;
}

int run_eval(const Config& cfg, const std::string& det_path, const std::string& gt_path, const fs::path& out) {
  const auto dets = flatten(parse_detections(read_text(det_path), det_path));
  const auto gt = flatten(parse_ground_truth(read_text(gt_path), gt_path));
  validate_class_ids(dets, gt, cfg.model.num_classes);
  const MapReport report = mean_ap(dets, gt, cfg.eval_thresholds);
  fs::create_directories(out);
  write_text(out / "map.csv", map_csv(report));
  write_text(out / "per_class.csv", per_class_csv(report));
  for (std::size_t t = 0; t < report.thresholds.size(); ++t)
    std::printf("mAP@%.2f  %.4f\n", report.thresholds[t], report.map[t]);
  std::printf("average   %.4f\n", report.average);
  return kOk;
}

int run_gradcheck(const Config& cfg, bool mutate, const fs::path& out) {
  int status = kOk;
  std::string csv = "pnet,global_aggregation,group,max_rel_error\n";
  for (PNetKind kind : {PNetKind::pgcn_style, PNetKind::nonlocal}) {
    for (GlobalAggregation agg : {GlobalAggregation::before_pnet, GlobalAggregation::after_pnet}) {
      Config c = cfg;
      c.model.pnet = kind;
      c.model.global_aggregation = agg;
      GradcheckOptions opt;
      opt.corrupt_gradient = mutate;
      const GradcheckResult r = gradcheck(c, opt);
      std::printf("%-10s %-12s %s  max rel error %.3e\n", to_string(kind), to_string(agg), r.passed ? "PASS" : "FAIL",
                  r.max_rel_error);
      for (const auto& g : r.groups) {
        std::printf("    %-14s %.3e\n", g.name.c_str(), g.max_rel_error);
        csv += std::string(to_string(kind)) + "," + to_string(agg) + "," + g.name + "," + std::to_string(g.max_rel_error) + "\n";
      }
      if (!r.passed) status = kNumerical;
    }
  }
  fs::create_directories(out);
  write_text(out / "gradcheck.csv", csv);
  return status;
}

template <typename T>
void run_ablate(const Config& cfg, int seeds, int test_videos, const fs::path& out) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants()) {
    double sum = 0.0;
    for (int s = 0; s < seeds; ++s) {
      Config c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(s);
      rows.push_back(evaluate_variant<T>(c, v, test_videos));
      sum += rows.back().map_at_05;
    }
    std::printf("%-10s mean mAP@0.5 %.4f over %d seeds\n", v.name.c_str(), sum / seeds, seeds);
  }
  fs::create_directories(out);
  write_text(out / "ablation.csv", ablation_csv(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal action localization with local, global and inter-proposal context"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset directory");
  add_common(gen, common);

  auto* tr = app.add_subcommand("train", "train a model on a dataset directory");
  add_common(tr, common);
  std::string data_dir, resume;
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--resume", resume, "checkpoint to continue from");

  auto* inf = app.add_subcommand("infer", "write detections for a dataset directory");
  add_common(inf, common);
  std::string ckpt, flow_ckpt, flow_data;
  std::optional<std::string> stream;
  inf->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  inf->add_option("--data", data_dir, "dataset directory")->required();
  inf->add_option("--flow-checkpoint", flow_ckpt, "second-stream checkpoint");
  inf->add_option("--flow-data", flow_data, "second-stream dataset directory");
  inf->add_option("--stream", stream, "rgb|flow|both, overrides the checkpoint config");

  auto* ev = app.add_subcommand("eval", "compute mAP at the configured tIoU thresholds");
  add_common(ev, common);
  std::string det_path, gt_path;
  ev->add_option("--detections", det_path, "detections JSON")->required();
  ev->add_option("--ground-truth", gt_path, "ground truth JSON")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model loss");
  add_common(gc, common);
  bool mutate = false;
  gc->add_flag("--mutate", mutate, "corrupt the matmul gradient; the check must then fail");

  auto* ab = app.add_subcommand("ablate", "train and evaluate the four context-network variants");
  add_common(ab, common);
  int seeds = 5, test_videos = 8;
  ab->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  ab->add_option("--test-videos", test_videos, "held-out videos per seed")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (gen->parsed()) {
      const Config cfg = load_config(common);
      if (cfg.precision == Precision::float32) run_gen<float>(cfg, common.out);
      else run_gen<double>(cfg, common.out);
    } else if (tr->parsed()) {
      const Config cfg = load_config(common);
      if (cfg.precision == Precision::float32) run_train<float>(cfg, data_dir, resume, common.out);
      else run_train<double>(cfg, data_dir, resume, common.out);
    } else if (inf->parsed()) {
      if (checkpoint_precision(ckpt) == Precision::float32)
        run_infer<float>(ckpt, data_dir, flow_ckpt, flow_data, stream, common.out);
      else
        run_infer<double>(ckpt, data_dir, flow_ckpt, flow_data, stream, common.out);
    } else if (ev->parsed()) {
      return run_eval(load_config(common), det_path, gt_path, common.out);
    } else if (gc->parsed()) {
      Config cfg = load_config(common);
      if (common.config_path.empty()) cfg.model.feature_dim = 8;
      return run_gradcheck(cfg, mutate, common.out);
    } else if (ab->parsed()) {
      const Config cfg = load_config(common);
      if (cfg.precision == Precision::float32) run_ablate<float>(cfg, seeds, test_videos, common.out);
      else run_ablate<double>(cfg, seeds, test_videos, common.out);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
