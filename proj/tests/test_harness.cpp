#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rmt/harness.hpp"

using namespace rmt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "rmt_harness_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// counts real completions so resume behaviour is observable
class CountingOracle : public llm::CompletionBackend {
 public:
  llm::Completion complete(const prompt::RenderedPrompt& p,
                           const llm::CompletionParams& params) override {
    ++calls;
    return inner.complete(p, params);
  }
  std::string id() const override { return inner.id(); }
  int calls = 0;

 private:
  llm::OracleBackend inner;
};

harness::RunConfig addition_config(const fs::path& out, int n) {
  harness::RunConfig cfg;
  cfg.task = tasks::Task::Addition;
  cfg.variant = prompt::Variant::Full;
  cfg.backend = "oracle";
  cfg.sampler = tasks::SamplerConfig{std::max(n * 2, 40), 4, 14, 1234};
  cfg.n = n;
  cfg.seed = 99;
  cfg.out_dir = out;
  cfg.concurrency = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("oracle run scores a perfect report") {
  auto cfg = addition_config(fresh_dir("oracle_add"), 40);
  llm::OracleBackend oracle;
  auto report = harness::run_eval(cfg, oracle);
  CHECK(report.total == 40);
  CHECK(report.correct == 40);
  CHECK(report.overall_accuracy == doctest::Approx(1.0));
  int bucket_total = 0;
  for (const auto& [k, b] : report.buckets) {
    bucket_total += b.count;
    CHECK(b.accuracy == doctest::Approx(1.0));
  }
  CHECK(bucket_total == 40);
  CHECK(report.error_histogram.at("none") == 40);
  CHECK(fs::exists(cfg.out_dir / "records.jsonl"));
  CHECK(fs::exists(cfg.out_dir / "report.json"));
  CHECK(fs::exists(cfg.out_dir / "report.txt"));
}

TEST_CASE("scan run from a generated split file") {
  auto dir = fresh_dir("oracle_scan");
  auto train = dir / "train.txt";
  auto test = dir / "test.txt";
  tasks::generate_length_split(train, test);

  harness::RunConfig cfg;
  cfg.task = tasks::Task::Scan;
  cfg.variant = prompt::Variant::Inverted;
  cfg.backend = "oracle";
  cfg.test_set_path = test;
  cfg.n = 25;
  cfg.seed = 5;
  cfg.out_dir = dir / "run";
  cfg.concurrency = 4;
  llm::OracleBackend oracle;
  auto report = harness::run_eval(cfg, oracle);
  CHECK(report.total == 25);
  CHECK(report.overall_accuracy == doctest::Approx(1.0));
  for (const auto& [k, b] : report.buckets) {
    CHECK(k >= 24);
    CHECK(k <= 48);
  }
}

TEST_CASE("reports are byte-identical for identical deterministic runs") {
  auto a = addition_config(fresh_dir("det_a"), 30);
  auto b = addition_config(fresh_dir("det_b"), 30);
  llm::OracleBackend oracle;
  harness::run_eval(a, oracle);
  harness::run_eval(b, oracle);
  CHECK(slurp(a.out_dir / "report.json") == slurp(b.out_dir / "report.json"));
  CHECK(slurp(a.out_dir / "report.txt") == slurp(b.out_dir / "report.txt"));
}

TEST_CASE("interrupted runs resume to the same report") {
  auto full_dir = fresh_dir("resume_full");
  auto cfg_full = addition_config(full_dir, 12);
  llm::OracleBackend oracle;
  auto uninterrupted = harness::run_eval(cfg_full, oracle);
  auto reference_report = slurp(full_dir / "report.json");

  // replay: keep only the first 5 records, as if the process died mid-run
  auto resumed_dir = fresh_dir("resume_partial");
  auto cfg = addition_config(resumed_dir, 12);
  CountingOracle counting;
  harness::run_eval(cfg, counting);
  CHECK(counting.calls == 12);
  auto records = slurp(resumed_dir / "records.jsonl");
  std::vector<std::string> lines = util::split_lines(records);
  std::string head;
  for (int i = 0; i < 5; ++i) head += lines[static_cast<std::size_t>(i)] + "\n";
  {
    std::ofstream out(resumed_dir / "records.jsonl");
    out << head;
  }
  auto resumed = harness::run_eval(cfg, counting);
  CHECK(counting.calls == 12 + 7);  // only the missing seven re-run
  CHECK(resumed.total == uninterrupted.total);
  CHECK(slurp(resumed_dir / "report.json") == reference_report);
}

TEST_CASE("an output directory is bound to its run config") {
  auto dir = fresh_dir("config_guard");
  auto cfg = addition_config(dir, 10);
  llm::OracleBackend oracle;
  harness::run_eval(cfg, oracle);
  auto other = cfg;
  other.seed = 123456;
  CHECK_THROWS_AS(harness::run_eval(other, oracle), harness::ConfigError);
}

TEST_CASE("config validation") {
  llm::OracleBackend oracle;
  auto cfg = addition_config(fresh_dir("bad_cfg"), 10);
  cfg.n = 0;
  CHECK_THROWS_AS(harness::run_eval(cfg, oracle), harness::ConfigError);

  cfg = addition_config(fresh_dir("bad_cfg2"), 10);
  cfg.n = 10000;  // larger than the sampled set
  CHECK_THROWS_AS(harness::run_eval(cfg, oracle), harness::ConfigError);

  cfg = addition_config(fresh_dir("bad_cfg3"), 10);
  cfg.pack_path = "/nonexistent/pack.jsonl";
  CHECK_THROWS_AS(harness::run_eval(cfg, oracle), harness::ConfigError);

  cfg = addition_config(fresh_dir("bad_cfg4"), 10);
  cfg.test_set_path = "/nonexistent/examples.jsonl";
  CHECK_THROWS_AS(harness::run_eval(cfg, oracle), harness::ConfigError);
}

TEST_CASE("faulty backend runs score zero with the matching class") {
  auto cfg = addition_config(fresh_dir("faulty"), 30);
  cfg.backend = "faulty";
  cfg.fault = {llm::FaultClass::CarryFlip, 1.0, 2024};
  auto report = harness::run_eval(cfg);  // convenience overload builds the backend
  CHECK(report.total == 30);
  CHECK(report.correct == 0);
  CHECK(report.error_histogram.at("carry_error") == 30);
}

TEST_CASE("backend errors are recorded, not fatal") {
  class FlakyBackend : public llm::CompletionBackend {
   public:
    llm::Completion complete(const prompt::RenderedPrompt& p,
                             const llm::CompletionParams& params) override {
      if (++calls % 3 == 0)
        throw llm::BackendError(llm::BackendErrorKind::Transport, "synthetic outage");
      return inner.complete(p, params);
    }
    std::string id() const override { return "flaky"; }
    int calls = 0;

   private:
    llm::OracleBackend inner;
  };

  auto cfg = addition_config(fresh_dir("flaky"), 15);
  cfg.concurrency = 1;
  FlakyBackend backend;
  auto report = harness::run_eval(cfg, backend);
  CHECK(report.total == 15);
  CHECK(report.correct == 10);
  CHECK(report.error_histogram.at("truncated") == 5);

  auto records = harness::load_records(cfg.out_dir / "records.jsonl");
  int with_error = 0;
  for (const auto& r : records)
    if (!r.backend_error.empty()) ++with_error;
  CHECK(with_error == 5);
}

TEST_CASE("record JSONL round-trips and tolerates a torn tail") {
  auto dir = fresh_dir("records_io");
  auto cfg = addition_config(dir, 8);
  llm::OracleBackend oracle;
  harness::run_eval(cfg, oracle);

  auto records = harness::load_records(dir / "records.jsonl");
  REQUIRE(records.size() == 8);
  for (const auto& r : records) {
    auto back = harness::record_from_json(harness::record_to_json(r));
    CHECK(back.id == r.id);
    CHECK(back.correct == r.correct);
    CHECK(back.error_class == r.error_class);
    CHECK(back.bucket == r.bucket);
    CHECK(back.completion == r.completion);
  }

  {
    std::ofstream out(dir / "records.jsonl", std::ios::app);
    out << "{\"id\": \"torn";  // no newline, no closing brace
  }
  CHECK(harness::load_records(dir / "records.jsonl").size() == 8);
}

TEST_CASE("offline re-scoring reproduces verdicts") {
  auto dir = fresh_dir("rescore");
  auto cfg = addition_config(dir, 10);
  llm::OracleBackend oracle;
  harness::run_eval(cfg, oracle);
  for (auto& r : harness::load_records(dir / "records.jsonl")) {
    auto rescored = harness::rescore_record(r);
    CHECK(rescored.correct == r.correct);
    CHECK(rescored.error_class == r.error_class);
    CHECK(rescored.stripped_answer == r.stripped_answer);
  }
}

TEST_CASE("report serialization round-trips; empty input rejected") {
  auto cfg = addition_config(fresh_dir("report_io"), 10);
  llm::OracleBackend oracle;
  auto report = harness::run_eval(cfg, oracle);
  auto back = harness::report_from_json(harness::report_to_json(report));
  CHECK(back.total == report.total);
  CHECK(back.correct == report.correct);
  CHECK(back.overall_accuracy == doctest::Approx(report.overall_accuracy));
  CHECK(back.buckets.size() == report.buckets.size());
  CHECK(back.error_histogram == report.error_histogram);

  CHECK_THROWS_AS(harness::bucket_accuracy({}), harness::EmptyInput);
  CHECK_THROWS_AS(harness::report_from_records({}), harness::EmptyInput);

  harness::EvalRecord single;
  single.correct = true;
  single.bucket = 7;
  auto one = harness::bucket_accuracy({single});
  REQUIRE(one.size() == 1);
  CHECK(one.at(7).count == 1);
  CHECK(one.at(7).accuracy == doctest::Approx(1.0));

  auto text = harness::render_report_text(report);
  CHECK(text.find("overall accuracy:") != std::string::npos);
  CHECK(text.find("bucket") != std::string::npos);
  CHECK(text.find("errors:") != std::string::npos);
}

}  // TEST_SUITE
