#include "prnet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prnet/error.hpp"
#include "prnet/pipeline.hpp"

namespace prnet {

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorKind::shape, "psnr",
                "inputs hold " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " samples");
  }
  double sq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  if (sq == 0.0) return kInfinitePsnr;
  const double mse = sq / static_cast<double>(a.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_size(b)) {
    throw Error(ErrorKind::shape, "psnr",
                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height));
  }
  const std::vector<double> da(a.pixels.begin(), a.pixels.end());
  const std::vector<double> db(b.pixels.begin(), b.pixels.end());
  return psnr(da, db);
}

Plane luminance(const Image& image) {
  Plane p{image.width, image.height, {}};
  p.values.resize(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const auto* px = image.pixels.data() + i * 3;
    p.values[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return p;
}

Plane channel(const Image& image, int c) {
  Plane p{image.width, image.height, {}};
  p.values.resize(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = image.pixels[i * 3 + static_cast<std::size_t>(c)];
  return p;
}

namespace {

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double total = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    g[i] = std::exp(-x * x / (2 * 1.5 * 1.5));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Separable weighted mean over every valid window position.
std::vector<double> window_mean(const std::vector<double>& v, int w, int h) {
  static const auto g = gaussian_window();
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * v[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

std::string size_str(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

}  // namespace

double ssim(const Plane& a, const Plane& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorKind::shape, "ssim", size_str(a.width, a.height) + " vs " + size_str(b.width, b.height));
  }
  if (a.width < kWindow || a.height < kWindow) {
    throw Error(ErrorKind::shape, "ssim", "image " + size_str(a.width, a.height) + " smaller than the 11x11 window");
  }
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const std::size_t n = a.values.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto mu_a = window_mean(a.values, a.width, a.height);
  const auto mu_b = window_mean(b.values, a.width, a.height);
  const auto e_aa = window_mean(aa, a.width, a.height);
  const auto e_bb = window_mean(bb, a.width, a.height);
  const auto e_ab = window_mean(ab, a.width, a.height);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const Image& a, const Image& b, SsimOptions options) {
  if (!a.same_size(b)) throw Error(ErrorKind::shape, "ssim", size_str(a.width, a.height) + " vs " + size_str(b.width, b.height));
  if (!options.rgb_mean) return ssim(luminance(a), luminance(b));
  double total = 0;
  for (int c = 0; c < 3; ++c) total += ssim(channel(a, c), channel(b, c));
  return total / 3.0;
}

void MetricReport::summarize() {
  mean_psnr_db = 0;
  mean_ssim = 0;
  if (rows.empty()) return;
  for (const auto& r : rows) {
    mean_psnr_db += r.psnr_db;
    mean_ssim += r.ssim;
  }
  mean_psnr_db /= static_cast<double>(rows.size());
  mean_ssim /= static_cast<double>(rows.size());
}

namespace {

std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

std::string MetricReport::csv() const {
  std::ostringstream s;
  s.precision(10);
  s << "sequence,frame_index,psnr_db,ssim\n";
  for (const auto& r : rows) s << r.sequence << ',' << r.frame_index << ',' << format_psnr(r.psnr_db) << ',' << r.ssim << '\n';
  return s.str();
}

std::string MetricReport::json() const {
  nlohmann::json frames = nlohmann::json::array();
  auto psnr_value = [](double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); };
  for (const auto& r : rows) {
    frames.push_back({{"sequence", r.sequence}, {"frame_index", r.frame_index}, {"psnr_db", psnr_value(r.psnr_db)},
                      {"ssim", r.ssim}});
  }
  const nlohmann::json j{{"frames", frames},
                         {"count", rows.size()},
                         {"skipped", skipped},
                         {"mean_psnr_db", psnr_value(mean_psnr_db)},
                         {"mean_ssim", mean_ssim}};
  return j.dump(2);
}

void MetricReport::write(const std::filesystem::path& prefix) const {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  for (const auto& [ext, text] : {std::pair{".csv", csv()}, std::pair{".json", json() + "\n"}}) {
    const std::filesystem::path path = prefix.string() + ext;
    std::ofstream out(path);
    if (!out || !(out << text)) throw Error(ErrorKind::io, "metrics", "cannot write " + path.string());
  }
}

template <typename Scalar>
MetricReport evaluate(const Model<Scalar>& model, const TripletDataset& dataset, const EvalOptions& options) {
  if (dataset.empty()) throw Error(ErrorKind::config, "evaluate", "dataset is empty: " + dataset.root().string());
  MetricReport report;
  NoGradGuard guard;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    TripletSample s;
    try {
      s = dataset.load(i);
    } catch (const Error& e) {
      std::cerr << "warning: skipping " << dataset.sequences()[i] << ": " << e.what() << '\n';
      ++report.skipped;
      continue;
    }
    FrameMetric row;
    row.sequence = s.sequence;
    row.frame_index = static_cast<int>(report.rows.size());
    if (options.pre_quantization) {
      const auto out = synthesize(model, Var<Scalar>(to_tensor<Scalar>(s.frame1)), Var<Scalar>(to_tensor<Scalar>(s.frame2)));
      const Tensor<Scalar>& t = out.frame.value();
      const int w = s.target.width;
      const int h = s.target.height;
      std::vector<double> pred(static_cast<std::size_t>(w) * h * 3);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const double v = std::clamp(static_cast<double>(t(0, c, y, x)), 0.0, 1.0) * 255.0;
            pred[(static_cast<std::size_t>(y) * w + x) * 3 + c] = v;
          }
        }
      }
      const std::vector<double> target(s.target.pixels.begin(), s.target.pixels.end());
      row.psnr_db = psnr(pred, target);
      auto plane = [&](int c) {
        Plane p{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
        for (std::size_t k = 0; k < p.values.size(); ++k) {
          const double* px = pred.data() + k * 3;
          p.values[k] = c < 0 ? 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2] : px[c];
        }
        return p;
      };
      if (options.ssim.rgb_mean) {
        row.ssim = (ssim(plane(0), channel(s.target, 0)) + ssim(plane(1), channel(s.target, 1)) +
                    ssim(plane(2), channel(s.target, 2))) / 3.0;
      } else {
        row.ssim = ssim(plane(-1), luminance(s.target));
      }
    } else {
      const Image out = interpolate(model, s.frame1, s.frame2);
      row.psnr_db = psnr(out, s.target);
      row.ssim = ssim(out, s.target, options.ssim);
    }
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw Error(ErrorKind::io, "evaluate", "no readable triplets in " + dataset.root().string());
  report.summarize();
  return report;
}

template MetricReport evaluate(const Model<float>&, const TripletDataset&, const EvalOptions&);
template MetricReport evaluate(const Model<double>&, const TripletDataset&, const EvalOptions&);

}  // namespace prnet
