#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prnet/model.hpp"

namespace prnet {

struct Resolution {
  int width = 0;
  int height = 0;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// 4096x2160, 2048x1080, 1280x720, 640x360, 320x180.
std::vector<Resolution> table4_resolutions();
/// Parses "WxH[,WxH...]".
std::vector<Resolution> parse_resolutions(const std::string& text);

struct BenchOptions {
  std::vector<ModelConfig> variants;
  std::vector<Resolution> resolutions = table4_resolutions();
  int reps = 3;
  int warmup = 1;
  std::uint64_t seed = 0;
  /// Rows whose estimated peak exceeds this many tracked bytes are skipped.
  std::int64_t memory_budget = std::int64_t{2} << 30;
};

struct BenchRow {
  std::string variant;
  Resolution resolution;
  std::vector<double> seconds;  // timed repetitions
  double mean_s_per_frame = 0;
  double median_s_per_frame = 0;
  std::int64_t peak_bytes = 0;          // measured, or the estimate for skipped rows
  bool skipped = false;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  /// Runtime inversions between consecutive variants at equal resolution.
  std::vector<std::string> warnings;

  std::string csv() const;
  std::string markdown() const;
};

/// Times interpolate() on seeded noise frames, serially. Peak memory is the
/// tracking allocator's high-water mark over the timed calls.
template <typename Scalar>
BenchResult bench(const BenchOptions& options);

/// Soft ordering check: a later variant faster than an earlier one by more
/// than `margin` (relative, on medians) produces a warning; smaller
/// inversions produce a note.
std::vector<std::string> runtime_ordering_warnings(const std::vector<BenchRow>& rows, double margin = 0.05);

}  // namespace prnet
