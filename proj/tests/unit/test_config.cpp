#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "lorasim/config.hpp"

using namespace lorasim;

TEST_CASE("defaults validate and derive sensible values") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  // 80 GB card minus 7x4096x4096 fp16 weights over 32 layers minus 2 GB
  // reserve, at 8 MiB per page.
  const KvPageConfig kv = cfg.kv_page_config();
  CHECK(kv.total_pages == 8402);
  CHECK(kv.page_size == 16);

  // Mean output of the builtin table is ~99.2 tokens -> 100 -> 7 pages.
  CHECK(cfg.headroom_pages() == 7);

  const CostParams p = cfg.cost_params();
  CHECK(p.proj_coeff == doctest::Approx(1.0 / (0.5 * 312e12)).epsilon(1e-15));

  const WorkloadSpec w = cfg.workload_spec();
  CHECK(w.num_requests == 1000);
  CHECK(w.popularity == Popularity::Distinct);
  CHECK(w.lengths.size() == builtin_length_table().size());
}

TEST_CASE("explicit total_pages and headroom override derivation") {
  ExperimentConfig cfg;
  cfg.kv_cache.total_pages = 123;
  CHECK(cfg.kv_page_config().total_pages == 123);
  cfg.scheduler.headroom_tokens = 32;
  CHECK(cfg.headroom_pages() == 2);
  // Headroom never drops to zero: an exact-fit readmission after a
  // self-eviction would otherwise bounce forever.
  cfg.scheduler.headroom_tokens = 1;
  CHECK(cfg.headroom_pages() == 1);
}

TEST_CASE("parse over defaults keeps absent sections") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "workload": {"num_requests": 7, "popularity": "skewed"},
    "cluster": {"gpu_count": 4}
  })",
                                                 "inline", ".");
  CHECK(cfg.workload.num_requests == 7);
  CHECK(cfg.workload.popularity == Popularity::Skewed);
  CHECK(cfg.cluster.gpu_count == 4);
  CHECK(cfg.scheduler.max_batch == 32);
  CHECK(cfg.cost_model.layers == 32);
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"cost_model": {"bogus": 1}})", "inline", "."),
                       doctest::Contains("cost_model.bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"misc": {}})", "inline", "."),
                       doctest::Contains("misc"), ConfigError);
}

TEST_CASE("syntax errors carry line and column") {
  CHECK_THROWS_WITH_AS(parse_config_text("{\n  \"workload\": {,}\n}", "broken.json", "."),
                       doctest::Contains("line 2"), ConfigError);
}

TEST_CASE("type errors name the key") {
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"workload": {"num_requests": "many"}})",
                                         "inline", "."),
                       doctest::Contains("workload.num_requests"), ConfigError);
}

TEST_CASE("validation lists violations with paths") {
  ExperimentConfig cfg;
  cfg.cluster.gpu_count = 0;
  cfg.scheduler.max_batch = -1;
  cfg.workload.popularity = Popularity::Skewed;
  cfg.workload.alpha = 0.5;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cluster.gpu_count") != std::string::npos);
    CHECK(msg.find("scheduler.max_batch") != std::string::npos);
    CHECK(msg.find("workload.alpha") != std::string::npos);
  }
}

TEST_CASE("arrival and popularity spellings") {
  const ExperimentConfig a = parse_config_text(
      R"({"workload": {"arrival": {"kind": "poisson", "rate": 25.0}}})", "inline", ".");
  CHECK(a.workload.arrival.kind == ArrivalKind::Poisson);
  CHECK(a.workload.arrival.rate == 25.0);

  const ExperimentConfig r = parse_config_text(R"({"workload": {"arrival": {
      "kind": "ramp", "peak_rate": 480, "ramp_up_s": 60, "hold_s": 60, "ramp_down_s": 60}}})",
                                               "inline", ".");
  CHECK(r.workload.arrival.kind == ArrivalKind::Ramp);
  CHECK(r.workload.arrival.peak_rate == 480.0);

  CHECK_THROWS_AS(parse_config_text(R"({"workload": {"popularity": "zipfish"}})", "inline", "."),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"workload": {"arrival": {"kind": "storm"}}})",
                                    "inline", "."),
                  ConfigError);
}

TEST_CASE("canonical json round-trips") {
  ExperimentConfig cfg;
  cfg.cluster.gpu_count = 16;
  cfg.workload.popularity = Popularity::Skewed;
  cfg.workload.arrival.kind = ArrivalKind::Ramp;
  cfg.workload.arrival.peak_rate = 480.0;
  cfg.workload.arrival.ramp_up_s = 60.0;
  cfg.workload.arrival.hold_s = 60.0;
  cfg.workload.arrival.ramp_down_s = 60.0;
  cfg.kv_cache.total_pages = 640;
  const std::string text = cfg.to_json_text();
  const ExperimentConfig back = parse_config_text(text, "roundtrip", ".");
  CHECK(back.cluster.gpu_count == 16);
  CHECK(back.workload.popularity == Popularity::Skewed);
  CHECK(back.workload.arrival.kind == ArrivalKind::Ramp);
  CHECK(back.workload.arrival.peak_rate == 480.0);
  CHECK(back.kv_cache.total_pages == 640);
  CHECK(back.to_json_text() == text);
}

TEST_CASE("length table file resolution") {
  const std::string dir = "test_cfg_tmp";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir + "/lens.csv");
    f << "prompt_len,output_len,weight\n24,12,1\n";
  }
  ExperimentConfig cfg = parse_config_text(R"({"workload": {"length_table": "lens.csv"}})",
                                           "inline", dir);
  const auto rows = cfg.length_rows();
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].prompt_len == 24);

  // A missing table is caught while the config is being parsed, not later.
  CHECK_THROWS_AS(
      parse_config_text(R"({"workload": {"length_table": "nope.csv"}})", "inline", dir),
      ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_config_file reports the file name") {
  const std::string path = "test_cfg_tmp_file.json";
  {
    std::ofstream f(path);
    f << R"({"cluster": {"gpu_memory": 40.0, "reserved_memory": 1.0}})";
  }
  const ExperimentConfig cfg = load_config_file(path);
  CHECK(cfg.cluster.gpu_memory_gb == 40.0);
  CHECK(cfg.cluster.reserved_memory_gb == 1.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_config_file("definitely_missing.json"), ConfigError);
}
