// tasks.hpp -- test-set construction for both tasks.
//
// SCAN side: load the official "IN: ... OUT: ..." length-split files, or
// regenerate them from the grammar (the split is a pure partition of the
// 20,910-command space at 22 actions).  Addition side: balanced sampling --
// answers near-uniform over digit counts -- plus deterministic subset
// sampling and a JSONL exchange format shared with the harness.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmt/markup.hpp"
#include "rmt/scan.hpp"
#include "rmt/util.hpp"

namespace rmt::tasks {

enum class Task { Scan, Addition };

inline std::string_view task_name(Task t) { return t == Task::Scan ? "scan" : "addition"; }

inline std::optional<Task> task_from_name(std::string_view s) {
  if (s == "scan") return Task::Scan;
  if (s == "addition") return Task::Addition;
  return std::nullopt;
}

class FileFormatError : public std::runtime_error {
 public:
  FileFormatError(const std::string& msg, std::size_t line_number)
      : std::runtime_error(msg + " (line " + std::to_string(line_number) + ")"),
        line_number_(line_number) {}
  std::size_t line_number() const { return line_number_; }

 private:
  std::size_t line_number_;
};

struct ScanExample {
  std::string instruction;
  std::vector<scan::Action> ground_truth;
  int output_length = 0;
};

inline std::vector<ScanExample> load_scan_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open " + path.string(), 0);
  std::vector<ScanExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    auto in_pos = line.find("IN:");
    auto out_pos = line.find("OUT:");
    if (in_pos == std::string::npos || out_pos == std::string::npos || out_pos < in_pos)
      throw FileFormatError("expected 'IN: ... OUT: ...'", lineno);
    ScanExample ex;
    ex.instruction = util::trim(line.substr(in_pos + 3, out_pos - in_pos - 3));
    try {
      ex.ground_truth = scan::map_official_tokens(util::split_ws(line.substr(out_pos + 4)));
    } catch (const scan::UnknownToken& e) {
      throw FileFormatError(e.what(), lineno);
    }
    ex.output_length = static_cast<int>(ex.ground_truth.size());
    out.push_back(std::move(ex));
  }
  return out;
}

// Regenerates the length split in the official file format: outputs of up to
// 22 actions go to `train_path`, the rest (24..48) to `test_path`.
inline void generate_length_split(const std::filesystem::path& train_path,
                                  const std::filesystem::path& test_path) {
  std::ofstream train(train_path), test(test_path);
  if (!train || !test)
    throw FileFormatError("cannot open output files for the length split", 0);
  for (const auto& cmd : scan::enumerate_all_commands()) {
    auto actions = scan::flatten(scan::interpret(scan::parse_command(cmd)));
    std::string line = "IN: " + cmd + " OUT:";
    for (auto a : actions) line += " " + scan::official_token(a);
    (actions.size() <= 22 ? train : test) << line << '\n';
  }
}

inline int digit_count(std::uint64_t v) {
  int n = 1;
  while (v >= 10) {
    v /= 10;
    ++n;
  }
  return n;
}

inline int digit_at(std::uint64_t v, int pos) {
  for (int i = 0; i < pos; ++i) v /= 10;
  return static_cast<int>(v % 10);
}

struct AdditionProblem {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t answer = 0;
  int answer_digits = 0;
  std::string marked_instruction;
};

inline AdditionProblem make_addition_problem(std::uint64_t a, std::uint64_t b) {
  AdditionProblem p;
  p.a = a;
  p.b = b;
  p.answer = a + b;
  p.answer_digits = digit_count(p.answer);
  p.marked_instruction = "add the numbers " + markup::encode_number_markup(a) + " and " +
                         markup::encode_number_markup(b);
  return p;
}

// Accepts both the marked form ("add the numbers C 7 B 8 A 0 and ...") and
// the plain one ("add the numbers 780 and 2308").
inline std::pair<std::uint64_t, std::uint64_t> parse_addition_instruction(
    std::string_view instruction) {
  constexpr std::string_view prefix = "add the numbers ";
  std::string text = util::trim(instruction);
  if (text.rfind(prefix, 0) != 0)
    throw markup::MalformedMarkup("not an addition instruction: " + text);
  text = text.substr(prefix.size());
  auto sep = text.find(" and ");
  if (sep == std::string::npos)
    throw markup::MalformedMarkup("missing ' and ' in addition instruction");
  auto parse_operand = [](std::string_view part) -> std::uint64_t {
    std::string s = util::trim(part);
    if (util::is_all_digits(s)) return std::stoull(s);
    return static_cast<std::uint64_t>(markup::decode_number_markup(s));
  };
  return {parse_operand(text.substr(0, sep)), parse_operand(text.substr(sep + 5))};
}

struct SamplerConfig {
  int count = 0;
  int d_min = 4;
  int d_max = 14;
  std::uint64_t seed = 0;
};

// Balanced sampling: the answer's digit count d is uniform over
// [d_min, d_max], the answer uniform over d-digit integers, and the first
// operand uniform over [0, answer].
inline std::vector<AdditionProblem> sample_balanced_addition(const SamplerConfig& cfg) {
  if (cfg.d_min < 1 || cfg.d_min > cfg.d_max || cfg.d_max > 15)
    throw RangeError("sampler digit bounds must satisfy 1 <= d_min <= d_max <= 15");
  std::mt19937_64 rng(cfg.seed);
  std::vector<AdditionProblem> out;
  out.reserve(static_cast<std::size_t>(std::max(cfg.count, 0)));
  for (int i = 0; i < cfg.count; ++i) {
    int d = static_cast<int>(util::bounded_uniform(rng, static_cast<std::uint64_t>(cfg.d_min),
                                                   static_cast<std::uint64_t>(cfg.d_max)));
    std::uint64_t lo = 1;
    for (int k = 1; k < d; ++k) lo *= 10;
    std::uint64_t hi = lo * 10 - 1;
    if (d == 1) lo = 0;
    std::uint64_t s = util::bounded_uniform(rng, lo, hi);
    std::uint64_t a = util::bounded_uniform(rng, 0, s);
    out.push_back(make_addition_problem(a, s - a));
  }
  return out;
}

// Uniform sample without replacement; input order is preserved.
template <typename T>
inline std::vector<T> sample_test_subset(const std::vector<T>& items, std::size_t n,
                                         std::uint64_t seed) {
  if (n > items.size())
    throw RangeError("subset size " + std::to_string(n) + " exceeds population " +
                     std::to_string(items.size()));
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = util::bounded_uniform(rng, i, idx.size() - 1);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

// One evaluation example, task-agnostic; the JSONL exchange record.
struct Example {
  std::string id;
  Task task = Task::Scan;
  std::string instruction;
  std::string ground_truth;  // "JUMP JUMP WALK" or a decimal answer
  int bucket = 0;            // output length or answer digit count
};

inline std::vector<Example> as_examples(const std::vector<ScanExample>& xs) {
  std::vector<Example> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scan-%06zu", i);
    out.push_back({id, Task::Scan, xs[i].instruction, scan::actions_to_string(xs[i].ground_truth),
                   xs[i].output_length});
  }
  return out;
}

inline std::vector<Example> as_examples(const std::vector<AdditionProblem>& xs) {
  std::vector<Example> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "add-%06zu", i);
    out.push_back({id, Task::Addition, xs[i].marked_instruction, std::to_string(xs[i].answer),
                   xs[i].answer_digits});
  }
  return out;
}

inline void write_examples_jsonl(const std::filesystem::path& path,
                                 const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw FileFormatError("cannot open " + path.string(), 0);
  for (const auto& ex : examples) {
    nlohmann::json j{{"id", ex.id},
                     {"task", std::string(task_name(ex.task))},
                     {"instruction", ex.instruction},
                     {"ground_truth", ex.ground_truth},
                     {"bucket", ex.bucket}};
    out << j.dump() << '\n';
  }
}

inline std::vector<Example> read_examples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open " + path.string(), 0);
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FileFormatError("invalid JSON", lineno);
    try {
      Example ex;
      ex.id = j.at("id").get<std::string>();
      auto t = task_from_name(j.at("task").get<std::string>());
      if (!t) throw FileFormatError("unknown task", lineno);
      ex.task = *t;
      ex.instruction = j.at("instruction").get<std::string>();
      ex.ground_truth = j.at("ground_truth").get<std::string>();
      ex.bucket = j.at("bucket").get<int>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw FileFormatError(e.what(), lineno);
    }
  }
  return out;
}

}  // namespace rmt::tasks
