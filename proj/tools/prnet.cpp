// prnet: command-line driver for training, interpolation, evaluation,
// visualization, benchmarking and the self-test.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "prnet/acceptance.hpp"
#include "prnet/bench.hpp"
#include "prnet/checkpoint.hpp"
#include "prnet/error.hpp"
#include "prnet/metrics.hpp"
#include "prnet/model.hpp"
#include "prnet/parallel.hpp"
#include "prnet/pipeline.hpp"
#include "prnet/train.hpp"
#include "prnet/viz.hpp"

namespace fs = std::filesystem;
using namespace prnet;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string precision = "f32";
};

struct ModelFlags {
  std::string variant = "prnet";
  int encoders = 1;
  bool rotate = false;

  ModelConfig config() const {
    ModelConfig cfg = variant == "baseline" ? ModelConfig::baseline() : ModelConfig::prnet(encoders, rotate);
    cfg.validate();
    return cfg;
  }
};

void add_model_flags(CLI::App* app, ModelFlags& flags) {
  app->add_option("--variant", flags.variant, "Architecture")
      ->check(CLI::IsMember({"prnet", "baseline"}))
      ->capture_default_str();
  app->add_option("--encoders", flags.encoders, "Parallel encoders (PRNet only)")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  app->add_flag("--rotate", flags.rotate, "Rotate encoder inputs by 0/90/180/270 degrees (needs 4 encoders)");
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << v << "%";
  return s.str();
}

template <typename S>
int interpolate_cmd(const fs::path& model_path, const fs::path& f1, const fs::path& f2, const fs::path& out) {
  const auto model = load_checkpoint<S>(model_path);
  write_png(interpolate(model, read_png(f1), read_png(f2)), out);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

template <typename S>
int train_cmd(const ModelFlags& flags, const fs::path& init, const fs::path& data, const std::string& list,
              TrainOptions options) {
  auto model = init.empty() ? Model<S>::build(flags.config(), options.seed) : load_checkpoint<S>(init);
  const auto dataset = TripletDataset::open(data, list);
  std::cout << "training " << model.config().name() << " (" << count_params(model) << " parameters) on "
            << dataset.size() << " triplets\n";
  options.on_epoch = [](const EpochStats& s) {
    std::cout << "epoch " << s.epoch << "  loss " << std::setprecision(6) << s.mean_loss << "  lr " << s.lr << "  "
              << std::setprecision(3) << s.wall_seconds << " s" << std::endl;
  };
  const auto report = train(model, dataset, options);
  if (report.skipped_samples > 0) std::cerr << "skipped " << report.skipped_samples << " unreadable samples\n";
  std::cout << "checkpoints in " << options.checkpoint_dir.string() << '\n';
  return 0;
}

template <typename S>
int eval_cmd(const fs::path& model_path, const fs::path& data, const std::string& list, const fs::path& prefix,
             const EvalOptions& options) {
  const auto model = load_checkpoint<S>(model_path);
  const auto report = evaluate(model, TripletDataset::open(data, list), options);
  report.write(prefix);
  std::cout << report.rows.size() << " triplets";
  if (report.skipped > 0) std::cout << " (" << report.skipped << " skipped)";
  std::cout << ": mean PSNR " << (std::isinf(report.mean_psnr_db) ? std::string("inf") : std::to_string(report.mean_psnr_db))
            << " dB, mean SSIM " << report.mean_ssim << '\n'
            << "wrote " << prefix.string() << ".csv and " << prefix.string() << ".json\n";
  return 0;
}

template <typename S>
int viz_cmd(const std::string& kind, const fs::path& model_path, const fs::path& f1_path, const fs::path& f2_path,
            const fs::path& out, const fs::path& montage_path) {
  const auto model = load_checkpoint<S>(model_path);
  const Image f1 = read_png(f1_path);
  const Image f2 = read_png(f2_path);
  Image picture;
  if (kind == "occlusion") {
    picture = render_occlusion(occlusion_map(model, f1, f2));
    std::cout << occlusion_legend() << '\n';
  } else {
    const auto map = render_attention(model, f1, f2);
    picture = map.overlay;
    std::cout << "psi channel " << map.channel << " (spatial mean " << map.scores[static_cast<std::size_t>(map.channel)]
              << ")" << (map.degenerate ? ", flat map drawn at mid-ramp" : "") << '\n';
  }
  write_png(picture, out);
  std::cout << "wrote " << out.string() << '\n';
  if (!montage_path.empty()) {
    write_png(montage({&f1, &picture, &f2}), montage_path);
    std::cout << "wrote " << montage_path.string() << '\n';
  }
  return 0;
}

template <typename S>
int bench_cmd(const BenchOptions& options, const fs::path& out) {
  const auto result = bench<S>(options);
  for (const auto& w : result.warnings) std::cerr << w << '\n';
  std::ofstream csv(out);
  if (!csv || !(csv << result.csv())) throw Error(ErrorKind::io, "bench", "cannot write " + out.string());
  fs::path md = out;
  md.replace_extension(".md");
  std::ofstream(md) << result.markdown();
  std::cout << result.markdown() << "wrote " << out.string() << " and " << md.string() << '\n';
  return 0;
}

std::vector<ModelConfig> parse_variants(const std::string& text) {
  std::vector<ModelConfig> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(ModelConfig::from_name(item));
  }
  if (out.empty()) throw Error(ErrorKind::usage, "bench", "no variants given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter-reduced multi-encoder frame interpolation"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--seed", globals.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", globals.threads, "Worker threads (default: $PRNET_THREADS or 1)")->check(CLI::PositiveNumber);
  app.add_option("--precision", globals.precision, "Floating-point precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();

  ModelFlags count_flags;
  auto* count = app.add_subcommand("count-params", "Print the parameter count and reduction vs the baseline");
  add_model_flags(count, count_flags);

  ModelFlags train_flags;
  fs::path train_data, train_out, train_init, train_report;
  std::string train_list = "tri_trainlist.txt";
  TrainOptions train_options;
  auto* train_sub = app.add_subcommand("train", "Train on a triplet directory");
  add_model_flags(train_sub, train_flags);
  train_sub->add_option("--data", train_data, "Dataset root (<root>/<seq>/im1..3.png)")->required();
  train_sub->add_option("--out", train_out, "Checkpoint directory")->required();
  train_sub->add_option("--epochs", train_options.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  train_sub->add_option("--batch", train_options.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  train_sub->add_option("--crop", train_options.augment.crop, "Square crop side, 0 for full frames")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_sub->add_option("--lr", train_options.initial_lr, "Initial learning rate")->capture_default_str();
  train_sub->add_option("--halve-every", train_options.halve_every, "Epochs per learning-rate halving, 0 for constant")
      ->capture_default_str();
  train_sub->add_flag("--shared-flip-coin", train_options.augment.shared_flip_coin,
                      "One coin for both flips instead of independent coins");
  train_sub->add_option("--list", train_list, "Split file inside the dataset root")->capture_default_str();
  train_sub->add_option("--init", train_init, "Start from this checkpoint instead of a fresh model");
  train_sub->add_option("--report", train_report, "JSON-lines report (default: <out>/report.jsonl)");

  fs::path interp_model, interp_f1, interp_f2, interp_out;
  auto* interp = app.add_subcommand("interpolate", "Synthesize the midpoint of two frames");
  interp->add_option("--model", interp_model, "Checkpoint")->required();
  interp->add_option("--frame1", interp_f1)->required();
  interp->add_option("--frame2", interp_f2)->required();
  interp->add_option("--out", interp_out, "Output PNG")->required();

  fs::path eval_model, eval_data, eval_report;
  std::string eval_list = "tri_testlist.txt";
  EvalOptions eval_options;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM over a triplet directory");
  eval->add_option("--model", eval_model, "Checkpoint")->required();
  eval->add_option("--data", eval_data, "Dataset root")->required();
  eval->add_option("--report", eval_report, "Output prefix for .csv and .json")->required();
  eval->add_option("--list", eval_list, "Split file inside the dataset root")->capture_default_str();
  eval->add_flag("--ssim-rgb", eval_options.ssim.rgb_mean, "Average per-channel SSIM instead of luma SSIM");
  eval->add_flag("--pre-quantization", eval_options.pre_quantization, "Score the float output before 8-bit rounding");

  std::string viz_kind;
  fs::path viz_model, viz_f1, viz_f2, viz_out, viz_montage;
  auto* viz = app.add_subcommand("viz", "Render occlusion or attention maps");
  viz->add_option("kind", viz_kind, "occlusion or attention")->required()->check(CLI::IsMember({"occlusion", "attention"}));
  viz->add_option("--model", viz_model, "Checkpoint")->required();
  viz->add_option("--frame1", viz_f1)->required();
  viz->add_option("--frame2", viz_f2)->required();
  viz->add_option("--out", viz_out, "Output PNG")->required();
  viz->add_option("--montage", viz_montage, "Also write frame1 | map | frame2");

  std::string bench_variants = "PRNet_1,PRNet_2,PRNet_3,PRNet_4,PRNet_4*";
  std::string bench_resolutions = "4096x2160,2048x1080,1280x720,640x360,320x180";
  BenchOptions bench_options;
  double budget_mb = 2048;
  fs::path bench_out = "bench.csv";
  auto* bench_sub = app.add_subcommand("bench", "Time interpolation per variant and resolution");
  bench_sub->add_option("--variants", bench_variants, "Comma-separated model names")->capture_default_str();
  bench_sub->add_option("--resolutions", bench_resolutions, "Comma-separated WxH list")->capture_default_str();
  bench_sub->add_option("--reps", bench_options.reps, "Timed repetitions")->capture_default_str();
  bench_sub->add_option("--warmup", bench_options.warmup, "Untimed warmup runs")->capture_default_str();
  bench_sub->add_option("--budget-mb", budget_mb, "Skip rows whose estimated peak exceeds this")->capture_default_str();
  bench_sub->add_option("--out", bench_out, "CSV path; a Markdown table is written beside it")->capture_default_str();

  std::vector<int> selftest_only;
  auto* selftest = app.add_subcommand("selftest", "Run the acceptance checks");
  selftest->add_option("--only", selftest_only, "Criterion numbers to run")->delimiter(',')->check(CLI::Range(1, 10));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  }

  try {
    int threads = globals.threads;
    if (threads == 0) {
      const char* env = std::getenv("PRNET_THREADS");
      threads = 1;
      if (env != nullptr && *env != '\0') {
        try {
          threads = std::stoi(env);
        } catch (const std::logic_error&) {
          throw Error(ErrorKind::usage, "prnet", std::string("PRNET_THREADS is not a number: ") + env);
        }
      }
    }
    set_num_threads(threads);
    const bool f64 = globals.precision == "f64";

    if (*count) {
      const auto cfg = count_flags.config();
      const auto n = count_params(cfg);
      std::cout << n << '\n'
                << percent(reduction_percent(n)) << " fewer parameters than " << ModelConfig::baseline().name() << " ("
                << count_params(ModelConfig::baseline()) << ")\n";
      return 0;
    }
    if (*train_sub) {
      train_flags.config();
      train_options.seed = globals.seed;
      train_options.checkpoint_dir = train_out;
      train_options.report_path = train_report.empty() ? train_out / "report.jsonl" : train_report;
      fs::create_directories(train_out);
      return f64 ? train_cmd<double>(train_flags, train_init, train_data, train_list, train_options)
                 : train_cmd<float>(train_flags, train_init, train_data, train_list, train_options);
    }
    if (*interp) {
      return f64 ? interpolate_cmd<double>(interp_model, interp_f1, interp_f2, interp_out)
                 : interpolate_cmd<float>(interp_model, interp_f1, interp_f2, interp_out);
    }
    if (*eval) {
      return f64 ? eval_cmd<double>(eval_model, eval_data, eval_list, eval_report, eval_options)
                 : eval_cmd<float>(eval_model, eval_data, eval_list, eval_report, eval_options);
    }
    if (*viz) {
      return f64 ? viz_cmd<double>(viz_kind, viz_model, viz_f1, viz_f2, viz_out, viz_montage)
                 : viz_cmd<float>(viz_kind, viz_model, viz_f1, viz_f2, viz_out, viz_montage);
    }
    if (*bench_sub) {
      bench_options.variants = parse_variants(bench_variants);
      bench_options.resolutions = parse_resolutions(bench_resolutions);
      bench_options.seed = globals.seed;
      bench_options.memory_budget = static_cast<std::int64_t>(budget_mb * 1024 * 1024);
      if (bench_options.reps < 1) throw Error(ErrorKind::usage, "bench", "--reps must be >= 1");
      return f64 ? bench_cmd<double>(bench_options, bench_out) : bench_cmd<float>(bench_options, bench_out);
    }
    if (*selftest) {
      const auto results = acceptance::run(selftest_only, std::cout);
      const auto passed = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.passed; });
      std::cout << passed << "/" << results.size() << " acceptance checks passed\n";
      return acceptance::all_passed(results) ? 0 : kRuntimeError;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::usage || e.kind() == ErrorKind::config ? kUsageError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
