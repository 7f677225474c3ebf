#include "prnet/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "prnet/adacof.hpp"
#include "prnet/bench.hpp"
#include "prnet/checkpoint.hpp"
#include "prnet/error.hpp"
#include "prnet/gradcheck.hpp"
#include "prnet/metrics.hpp"
#include "prnet/model.hpp"
#include "prnet/ops.hpp"
#include "prnet/pipeline.hpp"
#include "prnet/reference.hpp"
#include "prnet/train.hpp"

namespace prnet::acceptance {

namespace {

using Clock = std::chrono::steady_clock;
using V = Var<double>;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

Tensor<double> uniform(Shape shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Magnitudes in [0.1, 1] with random sign.
Tensor<double> away_from_zero(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

Image noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(u(rng));
  return img;
}

const std::vector<std::pair<ModelConfig, std::int64_t>>& published_counts() {
  static const std::vector<std::pair<ModelConfig, std::int64_t>> counts = {
      {ModelConfig::prnet(1), 1931491}, {ModelConfig::prnet(2), 2413123},        {ModelConfig::prnet(3), 2894755},
      {ModelConfig::prnet(4), 3376387}, {ModelConfig::prnet(4, true), 3376387}, {ModelConfig::baseline(), 21843427}};
  return counts;
}

CheckResult parameter_counts() {
  const auto start = Clock::now();
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [cfg, expected] : published_counts()) {
    const auto got = count_params(cfg);
    ok = ok && got == expected;
    detail << cfg.name() << "=" << got << (got == expected ? " " : "(expected " + std::to_string(expected) + ") ");
  }
  // The built PRNet_1 agrees with the layer-plan arithmetic.
  const auto built = count_params(Model<float>::build(ModelConfig::prnet(1), 0));
  ok = ok && built == 1931491;
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 1.0;
  detail << "built PRNet_1=" << built << ", " << fmt(elapsed, 3) << " s (limit 1 s)";
  return {1, "parameter counts", ok, detail.str(), elapsed};
}

CheckResult reductions() {
  const double published[] = {91.2, 89.0, 86.7, 84.5, 84.5};
  bool ok = true;
  std::ostringstream detail;
  for (int i = 0; i < 5; ++i) {
    const auto& cfg = published_counts()[static_cast<std::size_t>(i)].first;
    const double r = reduction_percent(count_params(cfg));
    const bool close = std::abs(r - published[i]) <= 0.05;
    ok = ok && close;
    detail << cfg.name() << " " << fmt(r, 5) << "% vs " << published[i] << (close ? "; " : " (off); ");
  }
  detail << "tolerance 0.05 points";
  return {2, "reduction percentages", ok, detail.str(), 0};
}

CheckResult adacof_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 12);
  std::uniform_real_distribution<double> offset(-3.0, 3.0);
  double worst = 0;
  const int instances = 100;
  for (int k = 0; k < instances; ++k) {
    const WarpGeometry g{k % 2 == 0 ? 3 : 5, 1};
    const std::int64_t h = dim(rng), w = dim(rng), taps = g.taps(), p = g.padding();
    const Shape fs{1, taps, h, w};
    const auto image = uniform(Shape{1, 3, h + 2 * p, w + 2 * p}, rng(), 0.0, 1.0);
    const auto weights = channel_softmax(V(uniform(fs, rng(), -2.0, 2.0))).value();
    const auto alpha = uniform(fs, rng(), -3.0, 3.0);
    const auto beta = uniform(fs, rng(), -3.0, 3.0);
    const auto fast = adacof_warp(V(image), WarpParams<double>{V(weights), V(alpha), V(beta), g}).value();
    const auto slow = reference::adacof_warp(image, weights, alpha, beta, g.kernel_size, g.dilation);
    worst = std::max(worst, static_cast<double>((fast.array() - slow.array()).abs().maxCoeff()));
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst < 1e-6 && elapsed < 10.0;
  return {3, "AdaCoF oracle equivalence", ok,
          std::to_string(instances) + " instances, F in {3,5}, max |diff| " + fmt(worst, 3) + " (limit 1e-6), " +
              fmt(elapsed, 3) + " s (limit 10 s)",
          elapsed};
}

// Offsets at least 0.1 away from integers so no probe crosses a bilinear kink.
Tensor<double> fractional_offsets(Shape shape, std::uint64_t seed) {
  auto t = uniform(shape, seed, -2.0, 2.0);
  for (auto& v : t.values()) v = std::floor(v) + 0.1 + 0.8 * (v - std::floor(v));
  return t;
}

CheckResult gradient_suite() {
  const auto start = Clock::now();
  struct Case {
    const char* name;
    std::function<V(const std::vector<V>&)> f;
    std::vector<Tensor<double>> inputs;
    GradCheckOptions options{};
  };
  const Shape x4{1, 2, 4, 4};
  const auto mask4 = uniform(x4, 91, -1, 1);
  const auto mask_conv = uniform(Shape{2, 4, 6, 6}, 92, -1, 1);
  const WarpGeometry g{5, 1};
  const Shape fs{1, 25, 3, 4};
  const auto warp_mask = uniform(Shape{1, 3, 3, 4}, 93, -1, 1);

  std::vector<Case> cases;
  cases.push_back({"conv2d",
                   [&](const std::vector<V>& x) { return sum(mul(conv2d(x[0], x[1], x[2]), V(mask_conv))); },
                   {away_from_zero(Shape{2, 3, 6, 6}, 1), away_from_zero(Shape{4, 3, 3, 3}, 2), away_from_zero(Shape{1, 4, 1, 1}, 3)}});
  cases.push_back({"conv2d (edge replicate)",
                   [&](const std::vector<V>& x) {
                     return sum(mul(conv2d(x[0], x[1], x[2], 1, PadMode::replicate), V(mask_conv)));
                   },
                   {away_from_zero(Shape{2, 3, 6, 6}, 4), away_from_zero(Shape{4, 3, 3, 3}, 5), away_from_zero(Shape{1, 4, 1, 1}, 6)}});
  cases.push_back({"avg_pool2",
                   [&](const std::vector<V>& x) { return sum(mul(avg_pool2(x[0]), V(uniform(Shape{1, 2, 2, 2}, 7, -1, 1)))); },
                   {away_from_zero(x4, 8)}});
  cases.push_back({"upsample_bilinear2",
                   [&](const std::vector<V>& x) {
                     return sum(mul(upsample_bilinear2(x[0]), V(uniform(Shape{1, 1, 6, 6}, 9, -1, 1))));
                   },
                   {away_from_zero(Shape{1, 1, 3, 3}, 10)}});
  cases.push_back({"rot90",
                   [&](const std::vector<V>& x) {
                     return sum(mul(rot90(x[0], 1), V(uniform(Shape{1, 2, 5, 3}, 11, -1, 1))));
                   },
                   {away_from_zero(Shape{1, 2, 3, 5}, 12)}});
  cases.push_back({"channel_softmax",
                   [&](const std::vector<V>& x) { return sum(mul(channel_softmax(x[0]), V(mask4))); },
                   {away_from_zero(x4, 13)}});
  cases.push_back({"relu", [](const std::vector<V>& x) { return sum(relu(x[0])); }, {away_from_zero(x4, 14)}});
  cases.push_back({"sigmoid",
                   [&](const std::vector<V>& x) { return sum(mul(sigmoid(x[0]), V(mask4))); },
                   {away_from_zero(x4, 15)}});
  cases.push_back({"add and mul",
                   [&](const std::vector<V>& x) { return sum(mul(add(x[0], x[1]), x[1])); },
                   {away_from_zero(x4, 16), away_from_zero(x4, 17)}});
  cases.push_back({"replication_pad",
                   [&](const std::vector<V>& x) {
                     return sum(mul(replication_pad(x[0], 1, 2, 3, 0), V(uniform(Shape{1, 2, 7, 7}, 18, -1, 1))));
                   },
                   {away_from_zero(x4, 19)}});
  cases.push_back({"crop",
                   [&](const std::vector<V>& x) {
                     return sum(mul(crop(x[0], 1, 0, 2, 3), V(uniform(Shape{1, 2, 2, 3}, 20, -1, 1))));
                   },
                   {away_from_zero(x4, 21)}});
  cases.push_back({"concat_channels",
                   [&](const std::vector<V>& x) {
                     return sum(mul(concat_channels<double>({x[0], x[1]}), V(uniform(Shape{1, 4, 4, 4}, 22, -1, 1))));
                   },
                   {away_from_zero(x4, 23), away_from_zero(x4, 24)}});
  cases.push_back({"l1_loss (conv, offset target)",
                   [&](const std::vector<V>& x) {
                     Tensor<double> target = uniform(Shape{2, 4, 6, 6}, 25, -1, 1);
                     target.array() += 5.0;
                     return l1_loss(conv2d(x[0], x[1], x[2]), V(target));
                   },
                   {away_from_zero(Shape{2, 3, 6, 6}, 26), away_from_zero(Shape{4, 3, 3, 3}, 27), away_from_zero(Shape{1, 4, 1, 1}, 28)}});
  cases.push_back({"adacof_warp",
                   [&](const std::vector<V>& x) {
                     return sum(mul(adacof_warp(x[0], WarpParams<double>{x[1], x[2], x[3], g}), V(warp_mask)));
                   },
                   {uniform(Shape{1, 3, 7, 8}, 29, 0, 1), channel_softmax(V(uniform(fs, 30, -1, 1))).value(),
                    fractional_offsets(fs, 31), fractional_offsets(fs, 32)}});
  cases.push_back({"blend",
                   [&](const std::vector<V>& x) { return sum(mul(blend(x[0], x[1], x[2]), V(uniform(Shape{1, 3, 3, 3}, 33, -1, 1)))); },
                   {uniform(Shape{1, 3, 3, 3}, 34, 0, 1), uniform(Shape{1, 3, 3, 3}, 35, 0, 1), uniform(Shape{1, 1, 3, 3}, 36, 0.1, 0.9)}});

  bool ok = true;
  double worst = 0;
  std::string worst_name;
  std::vector<std::string> failed;
  for (const auto& c : cases) {
    const auto report = grad_check(c.f, c.inputs, c.options);
    if (report.worst() >= worst) {
      worst = report.worst();
      worst_name = c.name;
    }
    if (!report.passed()) {
      ok = false;
      failed.push_back(c.name);
    }
  }

  // Composed loss: L1 between the pre-quantization midpoint and a target, 16x16.
  auto model = Model<double>::build(ModelConfig::prnet(1), 5);
  V frame1(uniform(Shape{1, 3, 16, 16}, 40, 0, 1), true);
  V frame2(uniform(Shape{1, 3, 16, 16}, 41, 0, 1), true);
  const V target(uniform(Shape{1, 3, 16, 16}, 42, 0, 1));
  std::vector<V> leaves{frame1, frame2};
  for (const char* name :
       {"encoder.1.block1.conv0.weight", "encoder.1.block2.conv1.bias", "encoder.1.block3.conv2.weight",
        "decoder.deconv3.conv0.weight", "decoder.upsample2.conv.weight", "subnet.weight1.conv3.weight",
        "subnet.alpha1.conv3.bias", "subnet.beta2.conv3.weight", "subnet.weight2.conv0.weight",
        "subnet.occlusion.conv3.weight", "subnet.occlusion.conv3.bias"}) {
    leaves.push_back(model.find(name)->var);
  }
  GradCheckOptions composed_options;
  composed_options.step = 1e-6;
  composed_options.max_probes = 12;
  composed_options.seed = 7;
  const auto composed = grad_check(
      [&] { return l1_loss(synthesize(model, frame1, frame2).frame, target); }, leaves, composed_options);
  if (!composed.passed()) {
    ok = false;
    failed.push_back("composed L1(synthesize)");
  }

  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 120.0;
  std::string detail = std::to_string(cases.size()) + " op checks, worst " + fmt(worst, 3) + " (" + worst_name +
                       "); composed L1(synthesize) 16x16 worst " + fmt(composed.worst(), 3) + " over " +
                       std::to_string(leaves.size()) + " leaves; tolerance 1e-4; " + fmt(elapsed, 3) +
                       " s (limit 120 s)";
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {4, "gradient suite", ok, detail, elapsed};
}

CheckResult constancy() {
  const auto model = Model<float>::build(ModelConfig::prnet(4, true), 4);
  const Image grey(64, 48, 128);
  const Image out = interpolate(model, grey, grey);
  const bool constant = out == grey;

  NoGradGuard guard;
  const auto syn = synthesize(model, Var<float>(to_tensor<float>(grey)), Var<float>(to_tensor<float>(grey)));
  double worst_sum = 0;
  for (const auto* w : {&syn.field.weights1, &syn.field.weights2}) {
    const auto& t = w->value();
    const auto plane = t.shape().plane();
    for (std::int64_t p = 0; p < plane; ++p) {
      double s = 0;
      for (std::int64_t c = 0; c < t.shape().c; ++c) s += static_cast<double>(t[c * plane + p]);
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  }
  const auto& v = syn.field.occlusion.value().array();
  const bool v_open = (v > 0.0f).all() && (v < 1.0f).all();
  const bool ok = constant && worst_sum <= 1e-6 && v_open;
  return {5, "identity/constancy end to end", ok,
          std::string("PRNet_4* grey 128 -> ") + (constant ? "constant 128" : "NOT constant") +
              "; max |sum W - 1| " + fmt(worst_sum, 3) + " (limit 1e-6); V in [" + fmt(v.minCoeff()) + ", " +
              fmt(v.maxCoeff()) + "]",
          0};
}

CheckResult overfit_smoke() {
  const auto start = Clock::now();
  const auto samples = synthetic_triplets(4, 64, 42);
  auto model = Model<float>::build(ModelConfig::prnet(1), 42);
  TrainOptions options;
  options.batch_size = 4;
  options.epochs = 300;  // one step per epoch
  options.seed = 42;
  options.initial_lr = 0.001;
  options.halve_every = 0;
  options.augment.crop = 64;
  const auto report = train(model, samples, options);
  // Gate on the batch-mean L1 logged at step 300, the same quantity as the step-1 loss.
  const double first = report.step_losses.front();
  const double final_loss = report.step_losses.back();
  const double ratio = final_loss / first;
  const double unaugmented = mean_l1(model, samples);
  const double elapsed = seconds_since(start);
  const bool ok = report.step_losses.size() == 300 && ratio <= 0.2 && elapsed <= 1800;
  return {6, "overfit smoke test", ok,
          "PRNet_1, 4 triplets, crop 64, 300 steps, seed 42: step-1 L1 " + fmt(first) + ", step-300 L1 " +
              fmt(final_loss) + " (ratio " + fmt(ratio, 4) + ", limit 0.2); unaugmented mean L1 after training " +
              fmt(unaugmented) + " (ratio " + fmt(unaugmented / first, 4) + "), " + fmt(elapsed, 4) + " s",
          elapsed};
}

CheckResult metric_oracles() {
  const Image a = noise_image(32, 24, 1);
  Image b = a;
  for (auto& p : b.pixels) p = p == 255 ? 254 : p + 1;
  const double identical = psnr(a, a);
  const double off_by_one = psnr(a, b);
  const double self = ssim(a, a);
  double asymmetry = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Image x = noise_image(24, 20, 100 + k);
    const Image y = noise_image(24, 20, 200 + k);
    asymmetry = std::max(asymmetry, std::abs(ssim(x, y) - ssim(y, x)));
  }
  const bool ok = std::isinf(identical) && identical > 0 && std::abs(off_by_one - 48.1308) <= 1e-4 &&
                  std::abs(self - 1.0) <= 1e-9 && asymmetry <= 1e-12;
  return {7, "metric oracles", ok,
          "PSNR(identical)=" + fmt(identical) + ", off-by-one " + fmt(off_by_one, 10) + " dB, SSIM(identical)=" +
              fmt(self, 12) + ", max SSIM asymmetry over 20 pairs " + fmt(asymmetry, 3),
          0};
}

CheckResult checkpoint_round_trip() {
  const auto path = std::filesystem::temp_directory_path() / "prnet_acceptance_checkpoint.prnc";
  const auto model = Model<float>::build(ModelConfig::prnet(4, true), 8);
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint<float>(path);
  std::filesystem::remove(path);
  NoGradGuard guard;
  const Var<float> f1(uniform(Shape{1, 3, 24, 32}, 1, 0, 1).cast<float>());
  const Var<float> f2(uniform(Shape{1, 3, 24, 32}, 2, 0, 1).cast<float>());
  const auto a = synthesize(model, f1, f2);
  const auto b = synthesize(loaded, f1, f2);
  bool identical = a.frame.value().array().size() == b.frame.value().array().size();
  for (const auto& [x, y] : {std::pair{&a.frame, &b.frame}, std::pair{&a.field.weights1, &b.field.weights1},
                             std::pair{&a.field.alpha2, &b.field.alpha2}, std::pair{&a.field.occlusion, &b.field.occlusion}}) {
    identical = identical && std::equal(x->value().values().begin(), x->value().values().end(),
                                        y->value().values().begin(), y->value().values().end());
  }
  const bool bytes_equal = serialize_checkpoint(model) == serialize_checkpoint(loaded);
  const bool ok = identical && bytes_equal;
  return {8, "checkpoint round trip", ok,
          std::string("PRNet_4* save/load: forward ") + (identical ? "bitwise identical" : "DIFFERS") +
              ", re-serialized bytes " + (bytes_equal ? "identical" : "DIFFER"),
          0};
}

CheckResult rotation_bookkeeping() {
  auto model = Model<double>::build(ModelConfig::prnet(4, true), 9);
  for (std::size_t e = 1; e < 4; ++e) {
    for (std::size_t level = 0; level < model.encoder[e].size(); ++level) {
      for (std::size_t i = 0; i < model.encoder[e][level].convs.size(); ++i) {
        auto& dst = model.encoder[e][level].convs[i];
        const auto& src = model.encoder[0][level].convs[i];
        dst.weight.mutable_value() = src.weight.value();
        dst.bias.mutable_value() = src.bias.value();
      }
    }
  }
  NoGradGuard guard;
  FeatureTrace<double> trace;
  // 256x192 (width x height).
  const V f1(Tensor<double>(Shape{1, 3, 192, 256}, 0.4));
  const V f2(Tensor<double>(Shape{1, 3, 192, 256}, 0.6));
  forward_features(model, f1, f2, &trace);
  bool shapes = true;
  for (const auto& maps : trace.maps) shapes = shapes && maps[1].shape() == Shape{1, 64, 96, 128};
  double worst = 0;
  for (std::size_t level = 1; level < 3; ++level) {
    const auto diff = (trace.fused[level].value().array() - 4.0 * trace.maps[0][level].value().array()).abs().maxCoeff();
    worst = std::max(worst, static_cast<double>(diff));
  }
  const bool ok = shapes && worst <= 1e-5;
  return {9, "rotation bookkeeping", ok,
          std::string("PRNet_4*, constant 256x192: back-rotated level-2 maps ") +
              (shapes ? "all [1,64,96,128]" : "MISSHAPEN") + "; max |fused - 4 x encoder 1| " + fmt(worst, 3) +
              " (limit 1e-5)",
          0};
}

CheckResult bench_structure() {
  const auto start = Clock::now();
  BenchOptions options;
  options.variants = {ModelConfig::prnet(1), ModelConfig::prnet(2), ModelConfig::prnet(3), ModelConfig::prnet(4),
                      ModelConfig::prnet(4, true)};
  options.resolutions = table4_resolutions();
  options.reps = 3;
  options.seed = 10;
  // Keeps only 320x180 measured on a desk machine; larger rows are reported as skipped.
  options.memory_budget = std::int64_t{600} << 20;
  const auto result = bench<float>(options);
  bool all_resolutions = true;
  for (const auto& r : table4_resolutions()) {
    const auto rows = std::count_if(result.rows.begin(), result.rows.end(),
                                    [&](const BenchRow& row) { return row.resolution == r; });
    all_resolutions = all_resolutions && rows == 5;
  }
  const auto csv = result.csv();
  const bool header = csv.rfind("variant,width,height,mean_s_per_frame,peak_bytes\n", 0) == 0;
  const auto measured = std::count_if(result.rows.begin(), result.rows.end(), [](const BenchRow& r) { return !r.skipped; });
  const bool ok = all_resolutions && header && measured > 0;
  std::string detail = std::to_string(result.rows.size()) + " rows over 5 resolutions x 5 variants, " +
                       std::to_string(measured) + " measured, ordering check: " +
                       (result.warnings.empty() ? std::string("no inversions") : std::to_string(result.warnings.size()) + " soft warning(s)");
  for (const auto& w : result.warnings) detail += "\n      " + w;
  const double elapsed = seconds_since(start);
  return {10, "bench table structure", ok, detail + "\n      " + fmt(elapsed, 4) + " s", elapsed};
}

}  // namespace

std::vector<Check> checks() {
  return {{1, "parameter counts", parameter_counts},
          {2, "reduction percentages", reductions},
          {3, "AdaCoF oracle equivalence", adacof_oracle},
          {4, "gradient suite", gradient_suite},
          {5, "identity/constancy end to end", constancy},
          {6, "overfit smoke test", overfit_smoke},
          {7, "metric oracles", metric_oracles},
          {8, "checkpoint round trip", checkpoint_round_trip},
          {9, "rotation bookkeeping", rotation_bookkeeping},
          {10, "bench table structure", bench_structure}};
}

std::vector<CheckResult> run(const std::vector<int>& only, std::ostream& out) {
  std::vector<CheckResult> results;
  for (const auto& check : checks()) {
    if (!only.empty() && std::find(only.begin(), only.end(), check.id) == only.end()) continue;
    const auto start = Clock::now();
    CheckResult r;
    try {
      r = check.run();
    } catch (const std::exception& e) {
      r = {check.id, check.name, false, std::string("exception: ") + e.what(), 0};
    }
    r.seconds = seconds_since(start);
    out << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << std::endl;
    results.push_back(std::move(r));
  }
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace prnet::acceptance
