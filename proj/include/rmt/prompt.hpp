// prompt.hpp -- few-shot prompt assembly.
//
// A prompt is N worked (Instruction, Explanation, Output) blocks followed by
// a test block cut off at the field the model must continue.  Four variants:
//   Full          explanation + marked output, prompt ends at "Explanation:"
//   RationaleOnly explanation + markup-free output, ends at "Explanation:"
//   MarkupOnly    no explanation field at all, ends at "Output:"
//   Inverted      output before explanation, ends at "Output:"

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmt/markup.hpp"
#include "rmt/rationale.hpp"
#include "rmt/scan.hpp"
#include "rmt/tasks.hpp"

namespace rmt::prompt {

using tasks::Task;

enum class Variant { Full, RationaleOnly, MarkupOnly, Inverted };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::RationaleOnly: return "rationale-only";
    case Variant::MarkupOnly: return "markup-only";
    case Variant::Inverted: return "inverted";
  }
  return "";
}

inline std::optional<Variant> variant_from_name(std::string_view s) {
  if (s == "full") return Variant::Full;
  if (s == "rationale-only" || s == "rationale_only") return Variant::RationaleOnly;
  if (s == "markup-only" || s == "markup_only") return Variant::MarkupOnly;
  if (s == "inverted") return Variant::Inverted;
  return std::nullopt;
}

struct Triple {
  std::string instruction;
  std::string explanation;
  std::string output;
};

struct PromptSpec {
  std::vector<Triple> in_context;
  std::string test_instruction;
  Variant variant = Variant::Full;
  Task task = Task::Scan;
};

struct RenderedPrompt {
  std::string text;
  std::string completion_anchor;  // the label the text ends with
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// True when the text carries any of the markup conventions: a "||" token, a
// counter right after an action token, or a positional letter/digit pair.
inline bool contains_markup_tokens(std::string_view text) {
  auto toks = util::split_ws(text);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == "||") return true;
    if (i + 1 == toks.size()) continue;
    if (scan::action_from_token(toks[i]) && util::is_all_digits(toks[i + 1])) return true;
    bool letter = toks[i].size() == 1 && toks[i][0] >= 'A' && toks[i][0] <= 'Z';
    bool digit = toks[i + 1].size() == 1 && toks[i + 1][0] >= '0' && toks[i + 1][0] <= '9';
    if (letter && digit) return true;
  }
  return false;
}

inline RenderedPrompt build_prompt(const PromptSpec& spec) {
  if (spec.in_context.empty())
    throw InvariantViolation("a prompt needs at least one in-context example");
  for (const auto& t : spec.in_context) {
    if (spec.variant == Variant::RationaleOnly &&
        (contains_markup_tokens(t.output) || contains_markup_tokens(t.instruction)))
      throw InvariantViolation("rationale-only pack still carries markup: " + t.output);
    if (spec.variant == Variant::MarkupOnly && !t.explanation.empty())
      throw InvariantViolation("markup-only pack must not carry explanations");
  }
  if (spec.variant == Variant::RationaleOnly && contains_markup_tokens(spec.test_instruction))
    throw InvariantViolation("rationale-only test instruction still carries markup");

  std::string text;
  int k = 1;
  for (const auto& t : spec.in_context) {
    text += "Example " + std::to_string(k++) + ":\n";
    text += "Instruction: " + t.instruction + "\n";
    switch (spec.variant) {
      case Variant::Full:
      case Variant::RationaleOnly:
        text += "Explanation:\n" + t.explanation + "\nOutput: " + t.output + "\n\n";
        break;
      case Variant::MarkupOnly:
        text += "Output: " + t.output + "\n\n";
        break;
      case Variant::Inverted:
        text += "Output: " + t.output + "\nExplanation:\n" + t.explanation + "\n\n";
        break;
    }
  }
  text += "Example " + std::to_string(k) + ":\n";
  text += "Instruction: " + spec.test_instruction + "\n";

  RenderedPrompt out;
  bool explanation_first =
      spec.variant == Variant::Full || spec.variant == Variant::RationaleOnly;
  out.completion_anchor = explanation_first ? "Explanation:" : "Output:";
  out.text = text + out.completion_anchor;
  return out;
}

// Full pack -> rationale-only derivative: markup stripped from outputs (and
// addition instructions), explanations re-rendered from the markup-free
// template.  Already-plain triples pass through unchanged.
inline std::vector<Triple> strip_markup_from_pack(const std::vector<Triple>& full, Task task) {
  std::vector<Triple> out;
  out.reserve(full.size());
  for (const auto& t : full) {
    Triple plain = t;
    if (task == Task::Scan) {
      plain.output = scan::actions_to_string(markup::strip_scan_markup(t.output));
    } else {
      auto [a, b] = tasks::parse_addition_instruction(t.instruction);
      auto p = tasks::make_addition_problem(a, b);
      plain.instruction = "add the numbers " + std::to_string(a) + " and " + std::to_string(b);
      plain.explanation = rationale::gen_addition_explanation_plain(p);
      plain.output = std::to_string(p.answer);
    }
    out.push_back(std::move(plain));
  }
  return out;
}

inline std::vector<Triple> derive_pack(const std::vector<Triple>& full, Variant variant,
                                       Task task) {
  switch (variant) {
    case Variant::Full:
    case Variant::Inverted:
      return full;
    case Variant::MarkupOnly: {
      std::vector<Triple> out = full;
      for (auto& t : out) t.explanation.clear();
      return out;
    }
    case Variant::RationaleOnly:
      return strip_markup_from_pack(full, task);
  }
  return full;
}

// The canonical in-context sets.  SCAN: nine examples covering every grammar
// construct with targets of at most 22 actions.  Addition: five examples with
// operands of at most 5 digits.
inline std::vector<Triple> canonical_scan_pack() {
  static const char* kInstructions[] = {
      "jump",
      "run right",
      "turn left twice",
      "walk opposite left",
      "look opposite right thrice",
      "jump around left",
      "jump twice and walk twice",
      "walk after run thrice",
      "turn around right twice",
  };
  std::vector<Triple> out;
  for (const char* cmd : kInstructions) {
    auto ast = scan::parse_command(cmd);
    auto sa = scan::interpret(ast);
    out.push_back({cmd, rationale::gen_scan_rationale(ast, sa).text(),
                   markup::encode_scan_markup(sa)});
  }
  return out;
}

inline std::vector<Triple> canonical_addition_pack() {
  static const std::pair<std::uint64_t, std::uint64_t> kPairs[] = {
      {7, 5}, {47, 31}, {912, 64}, {88, 939}, {780, 2308},
  };
  std::vector<Triple> out;
  for (auto [a, b] : kPairs) {
    auto p = tasks::make_addition_problem(a, b);
    auto r = rationale::gen_addition_rationale(p);
    out.push_back({p.marked_instruction, r.explanation_text(),
                   markup::encode_number_markup(p.answer)});
  }
  return out;
}

inline void save_pack(const std::filesystem::path& path, const std::vector<Triple>& pack) {
  std::ofstream out(path);
  if (!out) throw tasks::FileFormatError("cannot open " + path.string(), 0);
  for (const auto& t : pack) {
    nlohmann::json j{
        {"instruction", t.instruction}, {"explanation", t.explanation}, {"output", t.output}};
    out << j.dump() << '\n';
  }
}

inline std::vector<Triple> load_pack(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw tasks::FileFormatError("cannot open " + path.string(), 0);
  std::vector<Triple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw tasks::FileFormatError("invalid JSON", lineno);
    try {
      out.push_back({j.at("instruction").get<std::string>(),
                     j.value("explanation", std::string{}), j.at("output").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw tasks::FileFormatError(e.what(), lineno);
    }
  }
  return out;
}

}  // namespace rmt::prompt
