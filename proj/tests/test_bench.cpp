#include <doctest.h>

#include "prnet/bench.hpp"
#include "prnet/error.hpp"

using namespace prnet;

TEST_CASE("default resolutions") {
  const auto r = table4_resolutions();
  REQUIRE(r.size() == 5);
  CHECK(r[0] == Resolution{4096, 2160});
  CHECK(r[1] == Resolution{2048, 1080});
  CHECK(r[2] == Resolution{1280, 720});
  CHECK(r[3] == Resolution{640, 360});
  CHECK(r[4] == Resolution{320, 180});
  CHECK(parse_resolutions("640x360,32X24") == std::vector<Resolution>{{640, 360}, {32, 24}});
  CHECK_THROWS_AS(parse_resolutions("640x"), Error);
  CHECK_THROWS_AS(parse_resolutions("abc"), Error);
}

TEST_CASE("bench runs, measures and skips") {
  BenchOptions o;
  o.variants = {ModelConfig::prnet(1), ModelConfig::prnet(2)};
  o.resolutions = {{32, 24}, {4096, 2160}};
  o.reps = 3;
  o.memory_budget = std::int64_t{256} << 20;
  const auto result = bench<float>(o);
  REQUIRE(result.rows.size() == 4);
  for (const auto& row : result.rows) {
    if (row.resolution.width == 32) {
      CHECK_FALSE(row.skipped);
      CHECK(row.seconds.size() == 3);
      CHECK(row.mean_s_per_frame > 0);
      CHECK(row.peak_bytes > 0);
    } else {
      CHECK(row.skipped);
      CHECK(row.peak_bytes > o.memory_budget);
    }
  }
  CHECK(result.rows[0].variant == "PRNet_1");
  const auto csv = result.csv();
  CHECK(csv.rfind("variant,width,height,mean_s_per_frame,peak_bytes\n", 0) == 0);
  CHECK(csv.find("PRNet_2,4096,2160,skipped: budget,") != std::string::npos);
  const auto md = result.markdown();
  CHECK(md.find("| 32x24 |") != std::string::npos);
  CHECK(md.find("| 4096x2160 |") != std::string::npos);

  o.reps = 0;
  CHECK_THROWS_AS(bench<float>(o), Error);
  o.reps = 1;
  o.resolutions = {{4, 4}};
  CHECK_THROWS_AS(bench<float>(o), Error);
}

TEST_CASE("ordering check is soft") {
  auto row = [](const char* v, double s) {
    BenchRow r;
    r.variant = v;
    r.resolution = {64, 64};
    r.median_s_per_frame = s;
    return r;
  };
  CHECK(runtime_ordering_warnings({row("PRNet_1", 1.0), row("PRNet_2", 1.2)}).empty());
  const auto near = runtime_ordering_warnings({row("PRNet_1", 1.0), row("PRNet_2", 0.98)});
  REQUIRE(near.size() == 1);
  CHECK(near[0].rfind("note:", 0) == 0);
  const auto far = runtime_ordering_warnings({row("PRNet_1", 1.0), row("PRNet_2", 0.8)});
  REQUIRE(far.size() == 1);
  CHECK(far[0].rfind("warning:", 0) == 0);
}
