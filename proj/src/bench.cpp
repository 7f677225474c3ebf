#include "prnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "prnet/error.hpp"
#include "prnet/memory.hpp"
#include "prnet/pipeline.hpp"

namespace prnet {

std::vector<Resolution> table4_resolutions() {
  return {{4096, 2160}, {2048, 1080}, {1280, 720}, {640, 360}, {320, 180}};
}

std::vector<Resolution> parse_resolutions(const std::string& text) {
  std::vector<Resolution> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto x = item.find_first_of("xX");
    try {
      if (x == std::string::npos) throw std::invalid_argument(item);
      std::size_t used_w = 0, used_h = 0;
      const int w = std::stoi(item.substr(0, x), &used_w);
      const int h = std::stoi(item.substr(x + 1), &used_h);
      if (used_w != x || used_h != item.size() - x - 1) throw std::invalid_argument(item);
      out.push_back({w, h});
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::usage, "bench", "bad resolution '" + item + "', expected WxH");
    }
  }
  if (out.empty()) throw Error(ErrorKind::usage, "bench", "no resolutions given");
  return out;
}

namespace {

Image noise_frame(Resolution r, std::mt19937_64& rng) {
  Image img(r.width, r.height);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(u(rng));
  return img;
}

std::int64_t padded_pixels(const ModelConfig& cfg, Resolution r) {
  return round_up(r.width, cfg.size_multiple()) * round_up(r.height, cfg.size_multiple());
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

template <typename Scalar>
BenchResult bench(const BenchOptions& options) {
  if (options.reps < 1) throw Error(ErrorKind::usage, "bench", "repetitions must be >= 1");
  if (options.warmup < 0) throw Error(ErrorKind::usage, "bench", "warmup must be >= 0");
  if (options.variants.empty()) throw Error(ErrorKind::usage, "bench", "no variants given");
  for (const auto& r : options.resolutions) {
    if (r.width < 8 || r.height < 8) {
      throw Error(ErrorKind::usage, "bench",
                  "resolution " + std::to_string(r.width) + "x" + std::to_string(r.height) + " below 8x8");
    }
  }
  BenchResult result;
  for (const auto& cfg : options.variants) {
    const auto model = Model<Scalar>::build(cfg, options.seed);
    std::mt19937_64 rng(options.seed);

    // Probe one small frame pair to estimate bytes per padded pixel.
    const Resolution probe{cfg.size_multiple() * 2, cfg.size_multiple() * 2};
    const std::int64_t resident = static_cast<std::int64_t>(memory::live_bytes());
    memory::reset_peak();
    interpolate(model, noise_frame(probe, rng), noise_frame(probe, rng));
    const double per_pixel =
        static_cast<double>(static_cast<std::int64_t>(memory::peak_bytes()) - resident) / static_cast<double>(padded_pixels(cfg, probe));

    for (const auto& r : options.resolutions) {
      BenchRow row;
      row.variant = cfg.name();
      row.resolution = r;
      const auto estimate = resident + static_cast<std::int64_t>(per_pixel * static_cast<double>(padded_pixels(cfg, r)));
      if (estimate > options.memory_budget) {
        row.skipped = true;
        row.peak_bytes = estimate;
        result.rows.push_back(row);
        continue;
      }
      const Image a = noise_frame(r, rng);
      const Image b = noise_frame(r, rng);
      for (int i = 0; i < options.warmup; ++i) interpolate(model, a, b);
      memory::reset_peak();
      for (int i = 0; i < options.reps; ++i) {
        const auto start = std::chrono::steady_clock::now();
        interpolate(model, a, b);
        row.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      row.peak_bytes = static_cast<std::int64_t>(memory::peak_bytes());
      double total = 0;
      for (double s : row.seconds) total += s;
      row.mean_s_per_frame = total / static_cast<double>(row.seconds.size());
      auto sorted = row.seconds;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t n = sorted.size();
      row.median_s_per_frame = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      result.rows.push_back(row);
    }
  }
  result.warnings = runtime_ordering_warnings(result.rows);
  return result;
}

std::vector<std::string> runtime_ordering_warnings(const std::vector<BenchRow>& rows, double margin) {
  std::vector<std::string> out;
  std::map<std::pair<int, int>, std::vector<const BenchRow*>> by_resolution;
  std::vector<std::pair<int, int>> order;
  for (const auto& row : rows) {
    if (row.skipped) continue;
    const std::pair<int, int> key{row.resolution.width, row.resolution.height};
    if (!by_resolution.count(key)) order.push_back(key);
    by_resolution[key].push_back(&row);
  }
  for (const auto& key : order) {
    const auto& list = by_resolution[key];
    for (std::size_t i = 1; i < list.size(); ++i) {
      const double prev = list[i - 1]->median_s_per_frame;
      const double cur = list[i]->median_s_per_frame;
      if (cur >= prev) continue;
      const double gap = (prev - cur) / prev;
      std::ostringstream s;
      s << (gap > margin ? "warning: " : "note: ") << list[i]->variant << " ran faster than " << list[i - 1]->variant
        << " at " << key.first << "x" << key.second << " (" << fixed(cur, 4) << " s vs " << fixed(prev, 4) << " s, "
        << fixed(100 * gap, 1) << "%" << (gap > margin ? " beyond" : " within") << " the " << fixed(100 * margin, 0)
        << "% margin)";
      out.push_back(s.str());
    }
  }
  return out;
}

std::string BenchResult::csv() const {
  std::ostringstream s;
  s << "variant,width,height,mean_s_per_frame,peak_bytes\n";
  for (const auto& r : rows) {
    s << r.variant << ',' << r.resolution.width << ',' << r.resolution.height << ',';
    if (r.skipped) {
      s << "skipped: budget," << r.peak_bytes << '\n';
    } else {
      s << fixed(r.mean_s_per_frame, 6) << ',' << r.peak_bytes << '\n';
    }
  }
  return s.str();
}

std::string BenchResult::markdown() const {
  // Table 4 layout: one row per resolution, one column pair per variant.
  std::vector<std::string> variants;
  std::vector<std::pair<int, int>> resolutions;
  std::map<std::pair<std::string, std::pair<int, int>>, const BenchRow*> cell;
  for (const auto& r : rows) {
    const std::pair<int, int> key{r.resolution.width, r.resolution.height};
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    if (std::find(resolutions.begin(), resolutions.end(), key) == resolutions.end()) resolutions.push_back(key);
    cell[{r.variant, key}] = &r;
  }
  std::ostringstream s;
  s << "| Resolution |";
  for (const auto& v : variants) s << ' ' << v << " (s/f) | " << v << " (MB) |";
  s << "\n|---|";
  for (std::size_t i = 0; i < variants.size(); ++i) s << "---:|---:|";
  s << '\n';
  for (const auto& key : resolutions) {
    s << "| " << key.first << "x" << key.second << " |";
    for (const auto& v : variants) {
      const auto it = cell.find({v, key});
      if (it == cell.end()) {
        s << " | |";
      } else if (it->second->skipped) {
        s << " skipped: budget | ~" << fixed(static_cast<double>(it->second->peak_bytes) / (1 << 20), 0) << " |";
      } else {
        s << ' ' << fixed(it->second->mean_s_per_frame, 4) << " | "
          << fixed(static_cast<double>(it->second->peak_bytes) / (1 << 20), 1) << " |";
      }
    }
    s << '\n';
  }
  return s.str();
}

template BenchResult bench<float>(const BenchOptions&);
template BenchResult bench<double>(const BenchOptions&);

}  // namespace prnet
