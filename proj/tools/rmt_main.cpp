// rmt -- command line front end.
//
// Subcommands: gen-data (datasets, packs, split files), build-prompt (render
// one prompt for audit), eval (full run), verify (re-score recorded
// completions offline), report (recompute report files from records).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmt/harness.hpp"
#include "rmt/llm_http.hpp"

namespace fs = std::filesystem;
using namespace rmt;

namespace {

tasks::Task parse_task(const std::string& name) {
  auto t = tasks::task_from_name(name);
  if (!t) throw harness::ConfigError("unknown task: " + name);
  return *t;
}

prompt::Variant parse_variant(const std::string& name) {
  auto v = prompt::variant_from_name(name);
  if (!v) throw harness::ConfigError("unknown variant: " + name);
  return *v;
}

struct EvalOptions {
  std::string config_path;
  std::string task = "scan";
  std::string variant = "full";
  std::string backend = "oracle";
  int n = 400;
  std::uint64_t seed = 0;
  std::string pack;
  std::string test_set;
  std::string out;
  int concurrency = 1;
  std::string model;
  int max_tokens = 1024;
  double temperature = 0.0;
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  int rpm = 60;
  std::string fault_class = "carry-flip";
  double fault_rate = 1.0;
  std::uint64_t fault_seed = 0;
  int sampler_count = 0;
  int d_min = 4;
  int d_max = 14;
  std::uint64_t sampler_seed = 0;
};

// JSON config first, explicit flags on top.
harness::RunConfig make_run_config(const EvalOptions& opt, const CLI::App* cmd,
                                   llm::HttpConfig* http_out) {
  EvalOptions merged = opt;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw harness::ConfigError("cannot open config: " + opt.config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].template get<std::decay_t<decltype(field)>>();
    };
    get("task", merged.task);
    get("variant", merged.variant);
    get("backend", merged.backend);
    get("n", merged.n);
    get("seed", merged.seed);
    get("pack", merged.pack);
    get("test_set", merged.test_set);
    get("out", merged.out);
    get("concurrency", merged.concurrency);
    get("model", merged.model);
    get("max_tokens", merged.max_tokens);
    get("temperature", merged.temperature);
    get("base_url", merged.base_url);
    get("api_key_env", merged.api_key_env);
    get("requests_per_minute", merged.rpm);
    get("fault_class", merged.fault_class);
    get("fault_rate", merged.fault_rate);
    get("fault_seed", merged.fault_seed);
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      merged.sampler_count = s.value("count", merged.sampler_count);
      merged.d_min = s.value("d_min", merged.d_min);
      merged.d_max = s.value("d_max", merged.d_max);
      merged.sampler_seed = s.value("seed", merged.sampler_seed);
    }
    // flags given on the command line win over the file
    auto keep_if_set = [&](const char* flag, auto& dst, const auto& src) {
      if (cmd->count(flag) > 0) dst = src;
    };
    keep_if_set("--task", merged.task, opt.task);
    keep_if_set("--variant", merged.variant, opt.variant);
    keep_if_set("--backend", merged.backend, opt.backend);
    keep_if_set("--n", merged.n, opt.n);
    keep_if_set("--seed", merged.seed, opt.seed);
    keep_if_set("--pack", merged.pack, opt.pack);
    keep_if_set("--test-set", merged.test_set, opt.test_set);
    keep_if_set("--out", merged.out, opt.out);
    keep_if_set("--concurrency", merged.concurrency, opt.concurrency);
    keep_if_set("--model", merged.model, opt.model);
    keep_if_set("--max-tokens", merged.max_tokens, opt.max_tokens);
    keep_if_set("--temperature", merged.temperature, opt.temperature);
    keep_if_set("--base-url", merged.base_url, opt.base_url);
    keep_if_set("--api-key-env", merged.api_key_env, opt.api_key_env);
    keep_if_set("--rpm", merged.rpm, opt.rpm);
    keep_if_set("--fault-class", merged.fault_class, opt.fault_class);
    keep_if_set("--fault-rate", merged.fault_rate, opt.fault_rate);
    keep_if_set("--fault-seed", merged.fault_seed, opt.fault_seed);
    keep_if_set("--sampler-count", merged.sampler_count, opt.sampler_count);
    keep_if_set("--d-min", merged.d_min, opt.d_min);
    keep_if_set("--d-max", merged.d_max, opt.d_max);
    keep_if_set("--sampler-seed", merged.sampler_seed, opt.sampler_seed);
  }

  harness::RunConfig cfg;
  cfg.task = parse_task(merged.task);
  cfg.variant = parse_variant(merged.variant);
  cfg.backend = merged.backend;
  cfg.n = merged.n;
  cfg.seed = merged.seed;
  cfg.pack_path = merged.pack;
  cfg.test_set_path = merged.test_set;
  cfg.out_dir = merged.out;
  cfg.concurrency = merged.concurrency;
  cfg.params.model_name = merged.model;
  cfg.params.max_tokens = merged.max_tokens;
  cfg.params.temperature = merged.temperature;
  if (cfg.backend == "faulty") {
    auto fc = llm::fault_from_name(merged.fault_class);
    if (!fc) throw harness::ConfigError("unknown fault class: " + merged.fault_class);
    cfg.fault = {*fc, merged.fault_rate, merged.fault_seed};
  }
  if (cfg.task == tasks::Task::Addition && cfg.test_set_path.empty()) {
    int count = merged.sampler_count > 0 ? merged.sampler_count : merged.n;
    cfg.sampler = tasks::SamplerConfig{count, merged.d_min, merged.d_max, merged.sampler_seed};
  }
  if (http_out) {
    http_out->base_url = merged.base_url;
    http_out->api_key_env = merged.api_key_env;
    http_out->max_concurrency = merged.concurrency;
    http_out->requests_per_window = merged.rpm;
  }
  return cfg;
}

int cmd_gen_data(const std::string& task, const std::string& out, const std::string& train,
                 const std::string& test, const std::string& split_file, int count, int d_min,
                 int d_max, std::uint64_t seed, int n) {
  if (task == "scan-split") {
    if (train.empty() || test.empty())
      throw harness::ConfigError("scan-split needs --train and --test output paths");
    tasks::generate_length_split(train, test);
    std::cout << "wrote " << train << " and " << test << "\n";
    return 0;
  }
  if (task == "scan-pack" || task == "addition-pack") {
    if (out.empty()) throw harness::ConfigError("pack generation needs --out");
    auto pack = task == "scan-pack" ? prompt::canonical_scan_pack()
                                    : prompt::canonical_addition_pack();
    prompt::save_pack(out, pack);
    std::cout << "wrote " << pack.size() << " in-context examples to " << out << "\n";
    return 0;
  }
  if (out.empty()) throw harness::ConfigError("gen-data needs --out");
  if (task == "addition") {
    auto problems = tasks::sample_balanced_addition({count, d_min, d_max, seed});
    tasks::write_examples_jsonl(out, tasks::as_examples(problems));
    std::cout << "wrote " << problems.size() << " addition examples to " << out << "\n";
    return 0;
  }
  if (task == "scan") {
    if (split_file.empty()) throw harness::ConfigError("scan examples need --split-file");
    auto examples = tasks::as_examples(tasks::load_scan_split(split_file));
    if (n > 0) examples = tasks::sample_test_subset(examples, static_cast<std::size_t>(n), seed);
    tasks::write_examples_jsonl(out, examples);
    std::cout << "wrote " << examples.size() << " scan examples to " << out << "\n";
    return 0;
  }
  throw harness::ConfigError("unknown gen-data task: " + task);
}

int cmd_build_prompt(const std::string& task_name, const std::string& variant_name,
                     const std::string& pack_path, std::string instruction, std::uint64_t a,
                     std::uint64_t b, bool have_operands, const std::string& out) {
  auto task = parse_task(task_name);
  auto variant = parse_variant(variant_name);
  prompt::PromptSpec spec;
  spec.task = task;
  spec.variant = variant;
  auto full = pack_path.empty() ? (task == tasks::Task::Scan ? prompt::canonical_scan_pack()
                                                             : prompt::canonical_addition_pack())
                                : prompt::load_pack(pack_path);
  spec.in_context = prompt::derive_pack(full, variant, task);
  if (have_operands) {
    if (task != tasks::Task::Addition)
      throw harness::ConfigError("--a/--b only make sense with --task addition");
    instruction = variant == prompt::Variant::RationaleOnly
                      ? "add the numbers " + std::to_string(a) + " and " + std::to_string(b)
                      : tasks::make_addition_problem(a, b).marked_instruction;
  }
  if (instruction.empty()) throw harness::ConfigError("give --instruction or --a/--b");
  spec.test_instruction = instruction;
  auto rendered = prompt::build_prompt(spec);
  if (out.empty()) {
    std::cout << rendered.text;
  } else {
    std::ofstream f(out);
    f << rendered.text;
    std::cout << "wrote prompt (" << rendered.text.size() << " bytes, anchor '"
              << rendered.completion_anchor << "') to " << out << "\n";
  }
  return 0;
}

int cmd_eval(const EvalOptions& opt, const CLI::App* cmd) {
  llm::HttpConfig http;
  auto cfg = make_run_config(opt, cmd, &http);
  harness::EvalReport report;
  if (cfg.backend == "http") {
    if (cfg.params.model_name.empty()) throw harness::ConfigError("live runs need --model");
    std::cerr << "note: live completions are billed per token; prompts this long have "
                 "historically run on the order of $0.10 per example on 175B-class models\n";
    llm::HttpBackend backend(http);
    report = harness::run_eval(cfg, backend);
  } else {
    report = harness::run_eval(cfg);
  }
  std::cout << harness::render_report_text(report);
  return 0;
}

nlohmann::json echo_from_records(const std::vector<harness::EvalRecord>& records,
                                 const std::string& source) {
  return nlohmann::json{{"task", std::string(tasks::task_name(records.front().task))},
                        {"variant", std::string(prompt::variant_name(records.front().variant))},
                        {"backend", "offline:" + source}};
}

int cmd_verify(const std::string& records_path, const std::string& out) {
  auto records = harness::load_records(records_path);
  if (records.empty()) throw harness::EmptyInput("no records in " + records_path);
  for (auto& r : records) r = harness::rescore_record(r);
  fs::create_directories(out);
  std::ofstream f(fs::path(out) / "records.jsonl");
  for (const auto& r : records) f << harness::record_to_json(r).dump() << '\n';
  auto report = harness::report_from_records(records, echo_from_records(records, records_path));
  harness::emit_report(report, out);
  std::cout << harness::render_report_text(report);
  return 0;
}

int cmd_report(const std::string& records_path, const std::string& out) {
  auto records = harness::load_records(records_path);
  if (records.empty()) throw harness::EmptyInput("no records in " + records_path);
  auto report = harness::report_from_records(records, echo_from_records(records, records_path));
  if (!out.empty()) harness::emit_report(report, out);
  std::cout << harness::render_report_text(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rationale + markup evaluation toolkit for SCAN and multi-digit addition"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_task, gd_out, gd_train, gd_test, gd_split;
  int gd_count = 4400, gd_dmin = 4, gd_dmax = 14, gd_n = 0;
  std::uint64_t gd_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "generate datasets, packs, and split files");
  gen->add_option("--task", gd_task, "scan-split | scan | addition | scan-pack | addition-pack")
      ->required();
  gen->add_option("--out", gd_out, "output JSONL path");
  gen->add_option("--train", gd_train, "scan-split: train file path");
  gen->add_option("--test", gd_test, "scan-split: test file path");
  gen->add_option("--split-file", gd_split, "scan: source split file");
  gen->add_option("--count", gd_count, "addition: number of problems");
  gen->add_option("--d-min", gd_dmin, "addition: smallest answer digit count");
  gen->add_option("--d-max", gd_dmax, "addition: largest answer digit count");
  gen->add_option("--seed", gd_seed, "sampler seed");
  gen->add_option("--n", gd_n, "scan: subsample size (0 = all)");

  // build-prompt
  std::string bp_task = "scan", bp_variant = "full", bp_pack, bp_instruction, bp_out;
  std::uint64_t bp_a = 0, bp_b = 0;
  auto* bp = app.add_subcommand("build-prompt", "render one prompt for audit");
  bp->add_option("--task", bp_task, "scan | addition");
  bp->add_option("--variant", bp_variant, "full | rationale-only | markup-only | inverted");
  bp->add_option("--pack", bp_pack, "in-context pack JSONL (default: built-in canonical pack)");
  bp->add_option("--instruction", bp_instruction, "test instruction");
  auto* opt_a = bp->add_option("--a", bp_a, "addition: first operand");
  bp->add_option("--b", bp_b, "addition: second operand");
  bp->add_option("--out", bp_out, "write the prompt here instead of stdout");

  // eval
  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "run an evaluation end to end");
  eval->add_option("--config", ev.config_path, "JSON run config; flags override");
  eval->add_option("--task", ev.task, "scan | addition");
  eval->add_option("--variant", ev.variant, "full | rationale-only | markup-only | inverted");
  eval->add_option("--backend", ev.backend, "oracle | faulty | http");
  eval->add_option("--n", ev.n, "number of test examples");
  eval->add_option("--seed", ev.seed, "subset sampling seed");
  eval->add_option("--pack", ev.pack, "in-context pack JSONL");
  eval->add_option("--test-set", ev.test_set, "examples JSONL or SCAN split .txt");
  eval->add_option("--out", ev.out, "output directory (here or in --config)");
  eval->add_option("--concurrency", ev.concurrency, "max in-flight completions");
  eval->add_option("--model", ev.model, "model name for the http backend");
  eval->add_option("--max-tokens", ev.max_tokens, "completion token budget");
  eval->add_option("--temperature", ev.temperature, "sampling temperature");
  eval->add_option("--base-url", ev.base_url, "OpenAI-compatible endpoint base URL");
  eval->add_option("--api-key-env", ev.api_key_env, "env var holding the API credential");
  eval->add_option("--rpm", ev.rpm, "requests per minute ceiling");
  eval->add_option("--fault-class", ev.fault_class,
                   "carry-flip | digit-lookup | spurious-final-carry | scan-drop-direction");
  eval->add_option("--fault-rate", ev.fault_rate, "fault injection probability");
  eval->add_option("--fault-seed", ev.fault_seed, "fault injection seed");
  eval->add_option("--sampler-count", ev.sampler_count, "addition: generated pool size");
  eval->add_option("--d-min", ev.d_min, "addition: smallest answer digit count");
  eval->add_option("--d-max", ev.d_max, "addition: largest answer digit count");
  eval->add_option("--sampler-seed", ev.sampler_seed, "addition: generation seed");

  // verify
  std::string vf_records, vf_out;
  auto* verify = app.add_subcommand("verify", "re-score recorded completions offline");
  verify->add_option("--records", vf_records, "records.jsonl from a previous run")->required();
  verify->add_option("--out", vf_out, "output directory")->required();

  // report
  std::string rp_records, rp_out;
  auto* report = app.add_subcommand("report", "recompute report files from records");
  report->add_option("--records", rp_records, "records.jsonl")->required();
  report->add_option("--out", rp_out, "directory for report.json/report.txt");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(gd_task, gd_out, gd_train, gd_test, gd_split, gd_count, gd_dmin,
                          gd_dmax, gd_seed, gd_n);
    if (bp->parsed())
      return cmd_build_prompt(bp_task, bp_variant, bp_pack, bp_instruction, bp_a, bp_b,
                              opt_a->count() > 0, bp_out);
    if (eval->parsed()) return cmd_eval(ev, eval);
    if (verify->parsed()) return cmd_verify(vf_records, vf_out);
    if (report->parsed()) return cmd_report(rp_records, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
