#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "prnet/image.hpp"
#include "prnet/model.hpp"
#include "prnet/train.hpp"

namespace prnet {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) over every sample; +inf when the inputs are identical.
double psnr(std::span<const double> a, std::span<const double> b, double peak = 255.0);
double psnr(const Image& a, const Image& b);

/// Single-channel plane of doubles in 8-bit units.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

/// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
Plane luminance(const Image& image);
Plane channel(const Image& image, int c);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255),
/// averaged over every window that fits inside the image.
double ssim(const Plane& a, const Plane& b);

struct SsimOptions {
  bool rgb_mean = false;  // mean of per-channel SSIM instead of luma SSIM
};
double ssim(const Image& a, const Image& b, SsimOptions options = {});

struct FrameMetric {
  std::string sequence;
  int frame_index = 0;
  double psnr_db = 0;
  double ssim = 0;
};

struct MetricReport {
  std::vector<FrameMetric> rows;
  double mean_psnr_db = 0;
  double mean_ssim = 0;
  std::int64_t skipped = 0;

  /// Recomputes the means from `rows`.
  void summarize();
  std::string csv() const;
  std::string json() const;
  /// Writes `<prefix>.csv` and `<prefix>.json`.
  void write(const std::filesystem::path& prefix) const;
};

struct EvalOptions {
  SsimOptions ssim{};
  /// Score the clamped float output rather than the 8-bit image.
  bool pre_quantization = false;
};

/// Interpolates im1/im3 of every triplet and scores it against im2, one row
/// per triplet. Unreadable triplets are skipped with a warning.
template <typename Scalar>
MetricReport evaluate(const Model<Scalar>& model, const TripletDataset& dataset, const EvalOptions& options = {});

}  // namespace prnet
