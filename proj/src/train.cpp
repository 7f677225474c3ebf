#include "prnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "prnet/checkpoint.hpp"
#include "prnet/error.hpp"
#include "prnet/ops.hpp"
#include "prnet/pipeline.hpp"

namespace prnet {

namespace fs = std::filesystem;

void TripletSample::validate(const char* op) const {
  if (!frame1.same_size(target) || !frame1.same_size(frame2)) {
    throw Error(ErrorKind::format, op,
                "frames of " + (sequence.empty() ? std::string("sample") : sequence) + " differ in size");
  }
}

Image crop_image(const Image& image, int left, int top, int width, int height) {
  if (left < 0 || top < 0 || width < 0 || height < 0 || left + width > image.width || top + height > image.height) {
    throw Error(ErrorKind::shape, "crop_image",
                "window " + std::to_string(width) + "x" + std::to_string(height) + "+" + std::to_string(left) + "+" +
                    std::to_string(top) + " outside " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const auto* src = image.pixels.data() + (static_cast<std::size_t>(top + y) * image.width + left) * 3;
    std::copy(src, src + static_cast<std::size_t>(width) * 3, out.pixels.data() + static_cast<std::size_t>(y) * width * 3);
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(image.width - 1 - x, y, c);
    }
  }
  return out;
}

Image flip_vertical(const Image& image) {
  Image out(image.width, image.height);
  const std::size_t row = static_cast<std::size_t>(image.width) * 3;
  for (int y = 0; y < image.height; ++y) {
    const auto* src = image.pixels.data() + static_cast<std::size_t>(image.height - 1 - y) * row;
    std::copy(src, src + row, out.pixels.data() + static_cast<std::size_t>(y) * row);
  }
  return out;
}

TripletSample augment(const TripletSample& sample, const AugmentOptions& options, std::mt19937_64& rng) {
  sample.validate("augment");
  TripletSample out = sample;
  if (options.crop > 0) {
    const int w = sample.frame1.width;
    const int h = sample.frame1.height;
    if (w < options.crop || h < options.crop) {
      throw Error(ErrorKind::shape, "augment",
                  "frame " + std::to_string(w) + "x" + std::to_string(h) + " smaller than crop " +
                      std::to_string(options.crop));
    }
    const int left = std::uniform_int_distribution<int>(0, w - options.crop)(rng);
    const int top = std::uniform_int_distribution<int>(0, h - options.crop)(rng);
    for (Image* img : {&out.frame1, &out.target, &out.frame2}) *img = crop_image(*img, left, top, options.crop, options.crop);
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool hflip = coin(rng) < options.p_hflip;
  const bool vflip = options.shared_flip_coin ? hflip : coin(rng) < options.p_vflip;
  const bool swap = coin(rng) < options.p_swap;
  for (Image* img : {&out.frame1, &out.target, &out.frame2}) {
    if (hflip) *img = flip_horizontal(*img);
    if (vflip) *img = flip_vertical(*img);
  }
  if (swap) std::swap(out.frame1, out.frame2);
  return out;
}

TripletDataset TripletDataset::open(const fs::path& root, const std::string& list_file) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::io, "dataset", "not a directory: " + root.string());
  TripletDataset ds;
  ds.root_ = root;
  const fs::path list = root / list_file;
  if (!list_file.empty() && fs::is_regular_file(list)) {
    std::ifstream in(list);
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      ds.sequences_.push_back(line.substr(first, last - first + 1));
    }
    return ds;
  }
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "im1.png")) {
      ds.sequences_.push_back(fs::relative(entry.path(), root).generic_string());
    }
  }
  std::sort(ds.sequences_.begin(), ds.sequences_.end());
  return ds;
}

TripletSample TripletDataset::load(std::size_t index) const {
  const fs::path dir = root_ / sequences_.at(index);
  TripletSample s;
  s.sequence = sequences_[index];
  s.frame1 = read_png(dir / "im1.png");
  s.target = read_png(dir / "im2.png");
  s.frame2 = read_png(dir / "im3.png");
  s.validate("dataset");
  return s;
}

template <typename Scalar>
Adamax<Scalar>::Adamax(std::vector<Var<Scalar>> params, AdamaxOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.value().numel()), 0.0);
    u_.emplace_back(static_cast<std::size_t>(p.value().numel()), 0.0);
  }
}

template <typename Scalar>
void Adamax<Scalar>::step() {
  for (const auto& p : params_) {
    if (!p.grad().empty()) check_finite(p.grad(), "adamax_step");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double rate = options_.lr / (1.0 - std::pow(b1, static_cast<double>(t_)));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<Scalar>& theta = params_[i].mutable_value();
    const Tensor<Scalar>& grad = params_[i].grad();
    auto& m = m_[i];
    auto& u = u_[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[static_cast<std::int64_t>(k)]);
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      u[k] = std::max(b2 * u[k], std::abs(g));
      const double delta = rate * m[k] / (u[k] + options_.eps);
      theta[static_cast<std::int64_t>(k)] = static_cast<Scalar>(static_cast<double>(theta[static_cast<std::int64_t>(k)]) - delta);
    }
  }
}

template <typename Scalar>
void Adamax<Scalar>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double lr_schedule(int epoch, double initial, int halve_every) {
  if (halve_every <= 0 || epoch < 0) return initial;
  return initial * std::pow(0.5, epoch / halve_every);
}

namespace {

using SampleSource = std::function<std::optional<TripletSample>(std::size_t)>;

template <typename Scalar>
TrainReport train_impl(Model<Scalar>& model, std::size_t count, const SampleSource& source,
                       const TrainOptions& options) {
  if (count == 0) throw Error(ErrorKind::config, "train", "dataset is empty");
  if (options.batch_size < 1) throw Error(ErrorKind::config, "train", "batch size must be >= 1");
  if (options.epochs < 0) throw Error(ErrorKind::config, "train", "epochs must be >= 0");

  std::vector<Var<Scalar>> params;
  for (const auto& p : model.parameters()) params.push_back(p.var);
  Adamax<Scalar> optimizer(params, AdamaxOptions{options.initial_lr});

  std::ofstream report_file;
  if (!options.report_path.empty()) {
    report_file.open(options.report_path);
    if (!report_file) throw Error(ErrorKind::io, "train", "cannot write " + options.report_path.string());
  }
  if (!options.checkpoint_dir.empty()) fs::create_directories(options.checkpoint_dir);

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(count);
  TrainReport report;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    optimizer.set_lr(lr_schedule(epoch, options.initial_lr, options.halve_every));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    int steps = 0;
    for (std::size_t b = 0; b < count; b += static_cast<std::size_t>(options.batch_size)) {
      std::vector<TripletSample> batch;
      for (std::size_t k = b; k < std::min(count, b + static_cast<std::size_t>(options.batch_size)); ++k) {
        auto sample = source(order[k]);
        if (!sample) {
          ++report.skipped_samples;
          continue;
        }
        batch.push_back(augment(*sample, options.augment, rng));
      }
      if (batch.empty()) continue;

      std::vector<const Image*> f1, gt, f2;
      for (const auto& s : batch) {
        f1.push_back(&s.frame1);
        gt.push_back(&s.target);
        f2.push_back(&s.frame2);
      }
      const auto synthesis = synthesize(model, Var<Scalar>(to_tensor<Scalar>(f1)), Var<Scalar>(to_tensor<Scalar>(f2)));
      const auto loss = l1_loss(synthesis.frame, Var<Scalar>(to_tensor<Scalar>(gt)));
      const double value = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(value)) throw Error(ErrorKind::numeric, "train", "loss is not finite");
      loss.backward();
      optimizer.step();
      optimizer.zero_grad();
      report.step_losses.push_back(value);
      loss_sum += value;
      ++steps;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = steps > 0 ? loss_sum / steps : 0.0;
    stats.lr = optimizer.lr();
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(stats);
    if (report_file) {
      report_file << nlohmann::json{{"epoch", stats.epoch},
                                    {"mean_loss", stats.mean_loss},
                                    {"lr", stats.lr},
                                    {"wall_seconds", stats.wall_seconds}}
                         .dump()
                  << '\n'
                  << std::flush;
    }
    if (!options.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.prnc", epoch);
      save_checkpoint(model, options.checkpoint_dir / name);
      save_checkpoint(model, options.checkpoint_dir / "latest.prnc");
    }
    if (options.on_epoch) options.on_epoch(stats);
  }
  if (options.epochs == 0 && !options.checkpoint_dir.empty()) {
    save_checkpoint(model, options.checkpoint_dir / "latest.prnc");
  }
  return report;
}

}  // namespace

template <typename Scalar>
TrainReport train(Model<Scalar>& model, const std::vector<TripletSample>& samples, const TrainOptions& options) {
  return train_impl(model, samples.size(), [&samples](std::size_t i) { return std::optional(samples[i]); }, options);
}

template <typename Scalar>
TrainReport train(Model<Scalar>& model, const TripletDataset& dataset, const TrainOptions& options) {
  return train_impl(
      model, dataset.size(),
      [&dataset](std::size_t i) -> std::optional<TripletSample> {
        try {
          return dataset.load(i);
        } catch (const Error& e) {
          std::cerr << "warning: skipping " << dataset.sequences()[i] << ": " << e.what() << '\n';
          return std::nullopt;
        }
      },
      options);
}

template <typename Scalar>
double mean_l1(const Model<Scalar>& model, const std::vector<TripletSample>& samples) {
  if (samples.empty()) throw Error(ErrorKind::config, "mean_l1", "no samples");
  NoGradGuard guard;
  double total = 0;
  for (const auto& s : samples) {
    const auto synthesis =
        synthesize(model, Var<Scalar>(to_tensor<Scalar>(s.frame1)), Var<Scalar>(to_tensor<Scalar>(s.frame2)));
    total += static_cast<double>(l1_loss(synthesis.frame, Var<Scalar>(to_tensor<Scalar>(s.target))).value()[0]);
  }
  return total / static_cast<double>(samples.size());
}

std::vector<TripletSample> synthetic_triplets(int count, int size, std::uint64_t seed) {
  if (count < 1 || size < 16) throw Error(ErrorKind::config, "synthetic_triplets", "need count >= 1 and size >= 16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int side = size / 4;
  const int max_step = std::max(1, size / 16);
  std::vector<TripletSample> out;
  for (int n = 0; n < count; ++n) {
    // Background: smooth colour gradient with a slow ripple.
    const double base[3] = {unit(rng), unit(rng), unit(rng)};
    const double slope[3] = {unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5};
    const double freq = 2.0 + 4.0 * unit(rng);
    Image background(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double ripple = 0.08 * std::sin(freq * 6.2832 * (x + 0.5 * y) / size);
        for (int c = 0; c < 3; ++c) {
          const double v = 0.15 + 0.5 * base[c] + 0.3 * slope[c] * (x + y) / size + ripple;
          background.at(x, y, c) = quantize(v);
        }
      }
    }
    // Textured square: coarse random 4x4-pixel cells.
    std::vector<std::uint8_t> texture(static_cast<std::size_t>(side) * side * 3);
    const int cells = (side + 3) / 4;
    std::vector<double> cell_values(static_cast<std::size_t>(cells) * cells * 3);
    for (auto& v : cell_values) v = unit(rng);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        for (int c = 0; c < 3; ++c) {
          texture[(static_cast<std::size_t>(y) * side + x) * 3 + c] =
              quantize(cell_values[(static_cast<std::size_t>(y / 4) * cells + x / 4) * 3 + c]);
        }
      }
    }
    std::uniform_int_distribution<int> step(-max_step, max_step);
    const int dx = step(rng);
    const int dy = step(rng);
    std::uniform_int_distribution<int> cy(max_step, size - side - max_step);
    const int x0 = cy(rng);
    const int y0 = cy(rng);

    auto render = [&](int ox, int oy) {
      Image img = background;
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          for (int c = 0; c < 3; ++c) img.at(ox + x, oy + y, c) = texture[(static_cast<std::size_t>(y) * side + x) * 3 + c];
        }
      }
      return img;
    };
    TripletSample s;
    s.sequence = "synthetic/" + std::to_string(n);
    s.frame1 = render(x0 - dx, y0 - dy);
    s.target = render(x0, y0);
    s.frame2 = render(x0 + dx, y0 + dy);
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::vector<TripletSample>& samples, const fs::path& root) {
  fs::create_directories(root);
  std::ofstream list(root / "tri_trainlist.txt");
  if (!list) throw Error(ErrorKind::io, "write_dataset", "cannot write into " + root.string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu", i + 1);
    const fs::path dir = root / name;
    fs::create_directories(dir);
    write_png(samples[i].frame1, dir / "im1.png");
    write_png(samples[i].target, dir / "im2.png");
    write_png(samples[i].frame2, dir / "im3.png");
    list << name << '\n';
  }
}

template class Adamax<float>;
template class Adamax<double>;
template TrainReport train(Model<float>&, const std::vector<TripletSample>&, const TrainOptions&);
template TrainReport train(Model<double>&, const std::vector<TripletSample>&, const TrainOptions&);
template TrainReport train(Model<float>&, const TripletDataset&, const TrainOptions&);
template TrainReport train(Model<double>&, const TripletDataset&, const TrainOptions&);
template double mean_l1(const Model<float>&, const std::vector<TripletSample>&);
template double mean_l1(const Model<double>&, const std::vector<TripletSample>&);

}  // namespace prnet
