// harness.hpp -- end-to-end evaluation runs.
//
// run_eval loads or generates a test set, samples a subset, renders prompts,
// completes them through the supplied backend under a concurrency ceiling,
// verifies each completion, and appends one record per example to
// records.jsonl in the output directory.  Runs resume: ids already present
// in records.jsonl are skipped, guarded by a config echo written next to it.
// report.json / report.txt are deterministic for deterministic backends;
// wall-clock metadata goes to run_meta.json instead.

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rmt/llm.hpp"
#include "rmt/prompt.hpp"
#include "rmt/tasks.hpp"
#include "rmt/verifier.hpp"

namespace rmt::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IOError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  tasks::Task task = tasks::Task::Scan;
  prompt::Variant variant = prompt::Variant::Full;
  std::string backend = "oracle";  // oracle | faulty | http (echoed into records/report)
  llm::CompletionParams params;
  llm::FaultSpec fault;                          // faulty backend only
  std::filesystem::path pack_path;               // empty -> canonical pack for the task
  std::filesystem::path test_set_path;           // SCAN split .txt or examples .jsonl
  std::optional<tasks::SamplerConfig> sampler;   // addition generation when no file
  int n = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int concurrency = 1;
};

struct EvalRecord {
  std::string id;
  tasks::Task task = tasks::Task::Scan;
  prompt::Variant variant = prompt::Variant::Full;
  std::string instruction;
  std::string prompt_hash;
  std::string completion;
  bool correct = false;
  std::string extracted_output;
  std::string stripped_answer;
  std::string error_class;
  std::optional<int> first_bad_step;
  int bucket = 0;
  long latency_ms = 0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  std::string backend_error;
};

inline nlohmann::json record_to_json(const EvalRecord& r) {
  nlohmann::json j{{"id", r.id},
                   {"task", std::string(tasks::task_name(r.task))},
                   {"variant", std::string(prompt::variant_name(r.variant))},
                   {"instruction", r.instruction},
                   {"prompt_hash", r.prompt_hash},
                   {"completion", r.completion},
                   {"correct", r.correct},
                   {"extracted_output", r.extracted_output},
                   {"stripped_answer", r.stripped_answer},
                   {"error_class", r.error_class},
                   {"bucket", r.bucket},
                   {"latency_ms", r.latency_ms}};
  if (r.first_bad_step) j["first_bad_step"] = *r.first_bad_step;
  if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
  if (r.completion_tokens) j["completion_tokens"] = *r.completion_tokens;
  if (!r.backend_error.empty()) j["backend_error"] = r.backend_error;
  return j;
}

inline EvalRecord record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.id = j.at("id").get<std::string>();
  r.task = tasks::task_from_name(j.at("task").get<std::string>()).value_or(tasks::Task::Scan);
  r.variant =
      prompt::variant_from_name(j.at("variant").get<std::string>()).value_or(prompt::Variant::Full);
  r.instruction = j.at("instruction").get<std::string>();
  r.prompt_hash = j.value("prompt_hash", std::string{});
  r.completion = j.value("completion", std::string{});
  r.correct = j.at("correct").get<bool>();
  r.extracted_output = j.value("extracted_output", std::string{});
  r.stripped_answer = j.value("stripped_answer", std::string{});
  r.error_class = j.at("error_class").get<std::string>();
  if (j.contains("first_bad_step")) r.first_bad_step = j["first_bad_step"].get<int>();
  r.bucket = j.at("bucket").get<int>();
  r.latency_ms = j.value("latency_ms", 0L);
  if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<int>();
  if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<int>();
  r.backend_error = j.value("backend_error", std::string{});
  return r;
}

// Tolerates a truncated final line (an interrupted run); anything else
// malformed is an error.
inline std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::vector<EvalRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (util::trim(lines[i]).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      if (i + 1 == lines.size()) break;  // interrupted mid-write
      throw IOError("corrupt records file at line " + std::to_string(i + 1));
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

struct BucketStat {
  int count = 0;
  int correct = 0;
  double accuracy = 0.0;
};

inline std::map<int, BucketStat> bucket_accuracy(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyInput("no records to bucket");
  std::map<int, BucketStat> out;
  for (const auto& r : records) {
    auto& b = out[r.bucket];
    ++b.count;
    if (r.correct) ++b.correct;
  }
  for (auto& [k, b] : out) b.accuracy = static_cast<double>(b.correct) / b.count;
  return out;
}

struct EvalReport {
  int total = 0;
  int correct = 0;
  double overall_accuracy = 0.0;
  std::map<int, BucketStat> buckets;
  std::map<std::string, int> error_histogram;
  nlohmann::json config_echo;
};

inline EvalReport report_from_records(const std::vector<EvalRecord>& records,
                                      nlohmann::json config_echo = {}) {
  if (records.empty()) throw EmptyInput("no records to report on");
  EvalReport rep;
  rep.total = static_cast<int>(records.size());
  for (const auto& r : records) {
    if (r.correct) ++rep.correct;
    ++rep.error_histogram[r.error_class];
  }
  rep.overall_accuracy = static_cast<double>(rep.correct) / rep.total;
  rep.buckets = bucket_accuracy(records);
  rep.config_echo = std::move(config_echo);
  return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& [k, b] : rep.buckets)
    buckets.push_back(
        {{"bucket", k}, {"count", b.count}, {"correct", b.correct}, {"accuracy", b.accuracy}});
  return nlohmann::json{{"total", rep.total},
                        {"correct", rep.correct},
                        {"overall_accuracy", rep.overall_accuracy},
                        {"buckets", buckets},
                        {"error_histogram", rep.error_histogram},
                        {"config", rep.config_echo}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport rep;
  rep.total = j.at("total").get<int>();
  rep.correct = j.at("correct").get<int>();
  rep.overall_accuracy = j.at("overall_accuracy").get<double>();
  for (const auto& b : j.at("buckets"))
    rep.buckets[b.at("bucket").get<int>()] = {b.at("count").get<int>(),
                                              b.at("correct").get<int>(),
                                              b.at("accuracy").get<double>()};
  for (auto it = j.at("error_histogram").begin(); it != j.at("error_histogram").end(); ++it)
    rep.error_histogram[it.key()] = it.value().get<int>();
  rep.config_echo = j.value("config", nlohmann::json{});
  return rep;
}

inline std::string render_report_text(const EvalReport& rep) {
  char buf[128];
  std::string out;
  auto echo = [&](const char* key) {
    return rep.config_echo.contains(key) ? rep.config_echo[key].get<std::string>()
                                         : std::string("-");
  };
  out += "task: " + echo("task") + "  variant: " + echo("variant") +
         "  backend: " + echo("backend") + "\n";
  std::snprintf(buf, sizeof buf, "examples: %d  correct: %d  overall accuracy: %.4f\n\n",
                rep.total, rep.correct, rep.overall_accuracy);
  out += buf;
  out += "bucket  count  accuracy\n";
  for (const auto& [k, b] : rep.buckets) {
    std::snprintf(buf, sizeof buf, "%6d  %5d  %8.4f\n", k, b.count, b.accuracy);
    out += buf;
  }
  out += "\nerrors:\n";
  for (const auto& [name, n] : rep.error_histogram) {
    std::snprintf(buf, sizeof buf, "  %s: %d\n", name.c_str(), n);
    out += buf;
  }
  return out;
}

inline void emit_report(const EvalReport& rep, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream js(out_dir / "report.json");
  std::ofstream txt(out_dir / "report.txt");
  if (!js || !txt) throw IOError("cannot write report files under " + out_dir.string());
  js << report_to_json(rep).dump(2) << '\n';
  txt << render_report_text(rep);
}

namespace detail {

inline nlohmann::json config_echo(const RunConfig& cfg) {
  nlohmann::json j{{"task", std::string(tasks::task_name(cfg.task))},
                   {"variant", std::string(prompt::variant_name(cfg.variant))},
                   {"backend", cfg.backend},
                   {"n", cfg.n},
                   {"seed", cfg.seed},
                   {"concurrency", cfg.concurrency},
                   {"pack", cfg.pack_path.string()},
                   {"test_set", cfg.test_set_path.string()},
                   {"model", cfg.params.model_name},
                   {"max_tokens", cfg.params.max_tokens},
                   {"temperature", cfg.params.temperature}};
  if (cfg.backend == "faulty") {
    j["fault_class"] = std::string(llm::fault_name(cfg.fault.fault_class));
    j["fault_rate"] = cfg.fault.rate;
    j["fault_seed"] = cfg.fault.seed;
  }
  if (cfg.sampler) {
    j["sampler"] = {{"count", cfg.sampler->count},
                    {"d_min", cfg.sampler->d_min},
                    {"d_max", cfg.sampler->d_max},
                    {"seed", cfg.sampler->seed}};
  }
  return j;
}

inline std::vector<tasks::Example> load_examples(const RunConfig& cfg) {
  if (!cfg.test_set_path.empty()) {
    if (!std::filesystem::exists(cfg.test_set_path))
      throw ConfigError("test set does not exist: " + cfg.test_set_path.string());
    if (cfg.test_set_path.extension() == ".jsonl")
      return tasks::read_examples_jsonl(cfg.test_set_path);
    if (cfg.task != tasks::Task::Scan)
      throw ConfigError("only SCAN test sets come as split .txt files");
    return tasks::as_examples(tasks::load_scan_split(cfg.test_set_path));
  }
  if (cfg.task == tasks::Task::Addition && cfg.sampler)
    return tasks::as_examples(tasks::sample_balanced_addition(*cfg.sampler));
  throw ConfigError("no test set: give a file or, for addition, a sampler config");
}

// The rendered prompt for one example under the run's variant.
inline prompt::RenderedPrompt prompt_for(const RunConfig& cfg,
                                         const std::vector<prompt::Triple>& pack,
                                         const tasks::Example& ex) {
  prompt::PromptSpec spec;
  spec.task = cfg.task;
  spec.variant = cfg.variant;
  spec.in_context = pack;
  spec.test_instruction = ex.instruction;
  if (cfg.task == tasks::Task::Addition && cfg.variant == prompt::Variant::RationaleOnly) {
    auto [a, b] = tasks::parse_addition_instruction(ex.instruction);
    spec.test_instruction = "add the numbers " + std::to_string(a) + " and " + std::to_string(b);
  }
  return prompt::build_prompt(spec);
}

inline verifier::Verdict verify_example(const tasks::Example& ex, const std::string& completion,
                                        prompt::Variant variant) {
  if (ex.task == tasks::Task::Scan)
    return verifier::check_scan(completion, scan::actions_from_string(ex.ground_truth), variant);
  auto [a, b] = tasks::parse_addition_instruction(ex.instruction);
  return verifier::check_addition(completion, tasks::make_addition_problem(a, b), variant);
}

inline std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

// Re-score one record offline (the `verify` subcommand): the verdict is
// recomputed from completion text alone, no backend involved.
inline EvalRecord rescore_record(EvalRecord r) {
  tasks::Example ex;
  ex.id = r.id;
  ex.task = r.task;
  ex.instruction = r.instruction;
  ex.bucket = r.bucket;
  if (r.task == tasks::Task::Scan) {
    auto actions = scan::flatten(scan::interpret(scan::parse_command(r.instruction)));
    ex.ground_truth = scan::actions_to_string(actions);
  }
  auto verdict = detail::verify_example(ex, r.completion, r.variant);
  r.correct = verdict.correct;
  r.extracted_output = verdict.extracted_output;
  r.stripped_answer = verdict.stripped_answer;
  r.error_class = std::string(verifier::error_class_name(verdict.error_class));
  r.first_bad_step = verdict.first_bad_step;
  return r;
}

inline EvalReport run_eval(const RunConfig& cfg, llm::CompletionBackend& backend) {
  if (cfg.n < 1) throw ConfigError("n must be at least 1");
  if (cfg.concurrency < 1) throw ConfigError("concurrency must be at least 1");
  if (cfg.out_dir.empty()) throw ConfigError("an output directory is required");
  if (!cfg.pack_path.empty() && !std::filesystem::exists(cfg.pack_path))
    throw ConfigError("prompt pack does not exist: " + cfg.pack_path.string());

  auto examples = detail::load_examples(cfg);
  if (static_cast<std::size_t>(cfg.n) > examples.size())
    throw ConfigError("n=" + std::to_string(cfg.n) + " exceeds the test set size " +
                      std::to_string(examples.size()));
  auto subset = tasks::sample_test_subset(examples, static_cast<std::size_t>(cfg.n), cfg.seed);

  auto full_pack = cfg.pack_path.empty()
                       ? (cfg.task == tasks::Task::Scan ? prompt::canonical_scan_pack()
                                                        : prompt::canonical_addition_pack())
                       : prompt::load_pack(cfg.pack_path);
  auto pack = prompt::derive_pack(full_pack, cfg.variant, cfg.task);

  std::filesystem::create_directories(cfg.out_dir);
  auto echo = detail::config_echo(cfg);
  auto config_path = cfg.out_dir / "run_config.json";
  if (std::filesystem::exists(config_path)) {
    std::ifstream in(config_path);
    nlohmann::json prior = nlohmann::json::parse(in, nullptr, false);
    if (prior != echo)
      throw ConfigError("output directory holds a different run's records: " +
                        cfg.out_dir.string());
  } else {
    std::ofstream out(config_path);
    out << echo.dump(2) << '\n';
  }

  auto records_path = cfg.out_dir / "records.jsonl";
  auto existing = load_records(records_path);
  std::set<std::string> done;
  for (const auto& r : existing) done.insert(r.id);

  std::vector<const tasks::Example*> pending;
  for (const auto& ex : subset)
    if (!done.count(ex.id)) pending.push_back(&ex);

  std::string started_at = detail::iso_timestamp();
  std::mutex write_mutex;
  std::ofstream records_out(records_path, std::ios::app);
  if (!records_out) throw IOError("cannot append to " + records_path.string());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const tasks::Example& ex = *pending[i];
      EvalRecord rec;
      rec.id = ex.id;
      rec.task = ex.task;
      rec.variant = cfg.variant;
      rec.instruction = ex.instruction;
      rec.bucket = ex.bucket;

      auto rendered = detail::prompt_for(cfg, pack, ex);
      rec.prompt_hash = util::hex64(util::fnv1a64(rendered.text));
      auto t0 = std::chrono::steady_clock::now();
      try {
        auto completion = backend.complete(rendered, cfg.params);
        rec.completion = completion.text;
        rec.prompt_tokens = completion.prompt_tokens;
        rec.completion_tokens = completion.completion_tokens;
        auto verdict = detail::verify_example(ex, completion.text, cfg.variant);
        rec.correct = verdict.correct;
        rec.extracted_output = verdict.extracted_output;
        rec.stripped_answer = verdict.stripped_answer;
        rec.error_class = std::string(verifier::error_class_name(verdict.error_class));
        rec.first_bad_step = verdict.first_bad_step;
      } catch (const llm::BackendError& e) {
        rec.correct = false;
        rec.error_class = std::string(verifier::error_class_name(verifier::ErrorClass::Truncated));
        rec.backend_error = std::string(llm::backend_error_name(e.kind())) + ": " + e.what();
      }
      rec.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();

      std::lock_guard lock(write_mutex);
      records_out << record_to_json(rec).dump() << '\n';
      records_out.flush();
    }
  };

  std::size_t threads_n = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency),
                                                std::max<std::size_t>(pending.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads_n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  records_out.close();

  auto all = load_records(records_path);
  if (all.size() != subset.size())
    throw IOError("record count " + std::to_string(all.size()) + " does not match n=" +
                  std::to_string(subset.size()));
  auto report = report_from_records(all, echo);
  emit_report(report, cfg.out_dir);

  std::ofstream meta(cfg.out_dir / "run_meta.json");
  meta << nlohmann::json{{"started_at", started_at},
                         {"finished_at", detail::iso_timestamp()},
                         {"resumed_records", existing.size()},
                         {"new_records", pending.size()}}
              .dump(2)
       << '\n';
  return report;
}

// Oracle/faulty convenience; the live backend is injected by the caller.
inline EvalReport run_eval(const RunConfig& cfg) {
  if (cfg.backend == "oracle") {
    llm::OracleBackend backend;
    return run_eval(cfg, backend);
  }
  if (cfg.backend == "faulty") {
    llm::FaultyBackend backend(cfg.fault);
    return run_eval(cfg, backend);
  }
  throw ConfigError("backend '" + cfg.backend + "' needs to be constructed by the caller");
}

}  // namespace rmt::harness
