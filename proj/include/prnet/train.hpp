#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "prnet/image.hpp"
#include "prnet/model.hpp"

namespace prnet {

/// Two input frames and the ground-truth midpoint between them.
struct TripletSample {
  Image frame1;
  Image target;
  Image frame2;
  std::string sequence;

  void validate(const char* op) const;
};

struct AugmentOptions {
  int crop = 256;  // side of the square crop; 0 keeps the full frame
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double p_swap = 0.5;
  /// One coin decides both flips (flipped horizontally and vertically together).
  bool shared_flip_coin = false;
};

/// Random crop shared by the triple, then flips and temporal swap.
TripletSample augment(const TripletSample& sample, const AugmentOptions& options, std::mt19937_64& rng);

Image crop_image(const Image& image, int left, int top, int width, int height);
Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);

/// Vimeo-style triplet directory: `<root>/<sequence>/im1.png, im2.png, im3.png`.
///
/// Sequences come from `<root>/<list_file>` when it exists (one relative
/// path per line), otherwise from a sorted recursive scan for directories
/// holding im1.png.
class TripletDataset {
 public:
  static TripletDataset open(const std::filesystem::path& root, const std::string& list_file = "tri_trainlist.txt");

  const std::filesystem::path& root() const { return root_; }
  const std::vector<std::string>& sequences() const { return sequences_; }
  std::size_t size() const { return sequences_.size(); }
  bool empty() const { return sequences_.empty(); }

  /// Throws ErrorKind::io or ErrorKind::format for unreadable or inconsistent samples.
  TripletSample load(std::size_t index) const;

 private:
  std::filesystem::path root_;
  std::vector<std::string> sequences_;
};

struct AdamaxOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adamax over a fixed parameter list. Moments are kept in double.
template <typename Scalar>
class Adamax {
 public:
  Adamax(std::vector<Var<Scalar>> params, AdamaxOptions options = {});

  /// One update from the parameters' accumulated gradients (missing
  /// gradients count as zero). Any non-finite gradient aborts the step with
  /// ErrorKind::numeric before a parameter is touched.
  void step();
  void zero_grad();

  double lr() const { return options_.lr; }
  void set_lr(double lr) { options_.lr = lr; }
  std::int64_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& infinity_norm() const { return u_; }

 private:
  std::vector<Var<Scalar>> params_;
  AdamaxOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> u_;
  std::int64_t t_ = 0;
};

/// Step schedule: initial * 0.5^floor(epoch / halve_every). halve_every <= 0 keeps it constant.
double lr_schedule(int epoch, double initial = 0.001, int halve_every = 20);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  double lr = 0;
  double wall_seconds = 0;
};

struct TrainOptions {
  int epochs = 100;
  int batch_size = 4;
  std::uint64_t seed = 0;
  double initial_lr = 0.001;
  int halve_every = 20;
  AugmentOptions augment{};
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path report_path;     // JSON lines; empty: none
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<double> step_losses;
  std::int64_t skipped_samples = 0;
};

/// L1 training of `model` on in-memory samples. Each epoch visits a seeded
/// shuffle of the samples in batches (the last batch may be short).
template <typename Scalar>
TrainReport train(Model<Scalar>& model, const std::vector<TripletSample>& samples, const TrainOptions& options);

/// Same, reading samples from a dataset directory. Unreadable samples are
/// skipped with a warning and counted.
template <typename Scalar>
TrainReport train(Model<Scalar>& model, const TripletDataset& dataset, const TrainOptions& options);

/// Mean L1 of the synthesized midpoint against the target over `samples`, no augmentation.
template <typename Scalar>
double mean_l1(const Model<Scalar>& model, const std::vector<TripletSample>& samples);

/// Triplets of a textured square translating over a smooth background; the
/// target sits exactly halfway between the two inputs.
std::vector<TripletSample> synthetic_triplets(int count, int size, std::uint64_t seed);

/// Writes triplets in the dataset layout with a tri_trainlist.txt.
void write_dataset(const std::vector<TripletSample>& samples, const std::filesystem::path& root);

}  // namespace prnet
