// llm.hpp -- completion backends behind one contract.
//
// OracleBackend answers any prompt with the gold explanation and output by
// re-deriving the test instruction from the prompt tail; it makes the whole
// pipeline testable at 100% accuracy without a model.  FaultyBackend wraps
// the oracle and injects one of the observed model failure modes, seeded and
// reproducible, for exercising the verifier.  The live HTTP client lives in
// llm_http.hpp.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmt/markup.hpp"
#include "rmt/prompt.hpp"
#include "rmt/rationale.hpp"
#include "rmt/scan.hpp"
#include "rmt/tasks.hpp"
#include "rmt/util.hpp"

namespace rmt::llm {

struct CompletionParams {
  int max_tokens = 1024;
  double temperature = 0.0;
  std::vector<std::string> stop = {"\n\nExample"};
  std::string model_name;
};

struct Completion {
  std::string text;  // the raw continuation, prompt not included
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  std::chrono::milliseconds latency{0};
  std::string backend_id;
};

enum class BackendErrorKind {
  Auth,
  RateLimitExhausted,
  Transport,
  ContextLengthExceeded,
  OracleParse,
};

inline std::string_view backend_error_name(BackendErrorKind k) {
  switch (k) {
    case BackendErrorKind::Auth: return "auth";
    case BackendErrorKind::RateLimitExhausted: return "rate_limit_exhausted";
    case BackendErrorKind::Transport: return "transport";
    case BackendErrorKind::ContextLengthExceeded: return "context_length_exceeded";
    case BackendErrorKind::OracleParse: return "oracle_parse";
  }
  return "unknown";
}

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  BackendErrorKind kind() const { return kind_; }

 private:
  BackendErrorKind kind_;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const prompt::RenderedPrompt& p, const CompletionParams& params) = 0;
  virtual std::string id() const = 0;
};

namespace detail {

struct PromptShape {
  tasks::Task task;
  prompt::Variant variant;
  std::string instruction;
};

// Re-derive (task, variant, test instruction) from rendered prompt text.
inline PromptShape parse_prompt(const prompt::RenderedPrompt& p) {
  const std::string& text = p.text;
  auto ipos = text.rfind("\nInstruction: ");
  if (ipos == std::string::npos)
    throw BackendError(BackendErrorKind::OracleParse, "prompt has no Instruction line");
  std::size_t start = ipos + std::string("\nInstruction: ").size();
  auto end = text.find('\n', start);
  if (end == std::string::npos)
    throw BackendError(BackendErrorKind::OracleParse, "prompt ends inside the Instruction line");
  PromptShape shape;
  shape.instruction = text.substr(start, end - start);
  shape.task = shape.instruction.rfind("add the numbers", 0) == 0 ? tasks::Task::Addition
                                                                  : tasks::Task::Scan;
  if (p.completion_anchor == "Explanation:") {
    // Full and rationale-only prompts both stop at the Explanation label;
    // the in-context outputs tell them apart.
    auto opos = text.find("\nOutput: ");
    if (opos == std::string::npos)
      throw BackendError(BackendErrorKind::OracleParse, "prompt has no in-context Output line");
    std::size_t ostart = opos + std::string("\nOutput: ").size();
    auto oend = text.find('\n', ostart);
    std::string first_output = text.substr(ostart, oend - ostart);
    shape.variant = prompt::contains_markup_tokens(first_output)
                        ? prompt::Variant::Full
                        : prompt::Variant::RationaleOnly;
  } else {
    shape.variant = text.find("Explanation:") != std::string::npos ? prompt::Variant::Inverted
                                                                   : prompt::Variant::MarkupOnly;
  }
  return shape;
}

// Gold explanation/output pair for an instruction, marked or plain per variant.
struct GoldFields {
  std::string explanation;
  std::string output;
};

inline GoldFields gold_fields(const PromptShape& shape) {
  GoldFields g;
  bool plain = shape.variant == prompt::Variant::RationaleOnly;
  if (shape.task == tasks::Task::Scan) {
    scan::CommandAst ast;
    try {
      ast = scan::parse_command(shape.instruction);
    } catch (const scan::ParseError& e) {
      throw BackendError(BackendErrorKind::OracleParse, e.what());
    }
    auto sa = scan::interpret(ast);
    g.explanation = rationale::gen_scan_rationale(ast, sa).text();
    g.output = plain ? scan::actions_to_string(scan::flatten(sa)) : markup::encode_scan_markup(sa);
  } else {
    std::uint64_t a = 0, b = 0;
    try {
      std::tie(a, b) = tasks::parse_addition_instruction(shape.instruction);
    } catch (const markup::MalformedMarkup& e) {
      throw BackendError(BackendErrorKind::OracleParse, e.what());
    }
    auto problem = tasks::make_addition_problem(a, b);
    if (plain) {
      g.explanation = rationale::gen_addition_explanation_plain(problem);
      g.output = std::to_string(problem.answer);
    } else {
      auto r = rationale::gen_addition_rationale(problem);
      g.explanation = r.explanation_text();
      g.output = markup::encode_number_markup(problem.answer);
    }
  }
  return g;
}

// Continuation text laid out to extend the prompt into a canonical block.
inline std::string render_continuation(prompt::Variant variant, const GoldFields& g) {
  switch (variant) {
    case prompt::Variant::Full:
    case prompt::Variant::RationaleOnly:
      return "\n" + g.explanation + "\nOutput: " + g.output;
    case prompt::Variant::MarkupOnly:
      return " " + g.output;
    case prompt::Variant::Inverted:
      return " " + g.output + "\nExplanation:\n" + g.explanation;
  }
  return {};
}

}  // namespace detail

class OracleBackend : public CompletionBackend {
 public:
  Completion complete(const prompt::RenderedPrompt& p, const CompletionParams&) override {
    auto shape = detail::parse_prompt(p);
    auto gold = detail::gold_fields(shape);
    Completion c;
    c.text = detail::render_continuation(shape.variant, gold);
    c.backend_id = id();
    return c;
  }
  std::string id() const override { return "oracle"; }
};

enum class FaultClass { CarryFlip, DigitLookup, SpuriousFinalCarry, ScanDropDirection };

inline std::string_view fault_name(FaultClass f) {
  switch (f) {
    case FaultClass::CarryFlip: return "carry-flip";
    case FaultClass::DigitLookup: return "digit-lookup";
    case FaultClass::SpuriousFinalCarry: return "spurious-final-carry";
    case FaultClass::ScanDropDirection: return "scan-drop-direction";
  }
  return "";
}

inline std::optional<FaultClass> fault_from_name(std::string_view s) {
  if (s == "carry-flip") return FaultClass::CarryFlip;
  if (s == "digit-lookup") return FaultClass::DigitLookup;
  if (s == "spurious-final-carry") return FaultClass::SpuriousFinalCarry;
  if (s == "scan-drop-direction") return FaultClass::ScanDropDirection;
  return std::nullopt;
}

struct FaultSpec {
  FaultClass fault_class = FaultClass::CarryFlip;
  double rate = 1.0;  // probability of corrupting a given completion
  std::uint64_t seed = 0;
};

namespace detail {

// A carry chain walked with optional corruptions, rendered through the same
// templates as the gold rationale.
struct ChainCorruption {
  std::optional<int> override_pos;  // position of the substituted digit
  bool override_in_a = false;
  int override_digit = 0;
  std::optional<int> carry_flip_pos;
  bool force_spurious_final = false;
};

inline GoldFields corrupted_addition_fields(std::uint64_t a, std::uint64_t b,
                                            const ChainCorruption& c) {
  int na = tasks::digit_count(a);
  int nb = tasks::digit_count(b);
  int m = std::max(na, nb);
  auto [length_line, scope_line] = rationale::render_length_scope_lines(na, nb);

  std::string explanation = length_line + '\n' + scope_line;
  std::vector<int> result_digits(static_cast<std::size_t>(m), 0);
  int carry = 0;
  for (int pos = 0; pos < m; ++pos) {
    int da = tasks::digit_at(a, pos);
    int db = tasks::digit_at(b, pos);
    if (c.override_pos && *c.override_pos == pos) {
      (c.override_in_a ? da : db) = c.override_digit;
    }
    int carry_in = pos == 0 ? 0 : carry;
    int sum = carry_in + da + db;
    int carry_out = sum > 9 ? 1 : 0;
    if (c.carry_flip_pos && *c.carry_flip_pos == pos) carry_out = 1 - carry_out;
    int result = sum % 10;
    result_digits[static_cast<std::size_t>(pos)] = result;
    explanation += '\n' + rationale::render_carry_step(pos, carry_in, da, db, sum, carry_out,
                                                       result, pos == 0);
    carry = carry_out;
  }
  bool final_line = carry == 1 || c.force_spurious_final;
  if (final_line) explanation += '\n' + rationale::render_final_carry_line(m);

  std::string output;
  if (final_line) output = std::string(1, markup::position_letter(m)) + " 1";
  for (int pos = m - 1; pos >= 0; --pos) {
    if (!output.empty()) output += ' ';
    output += markup::position_letter(pos);
    output += ' ';
    output += static_cast<char>('0' + result_digits[static_cast<std::size_t>(pos)]);
  }
  return {explanation, output};
}

}  // namespace detail

// Gold completions with one deliberate mistake, mirroring the failure modes
// seen in real transcripts: a flipped carry, a mis-read operand digit, a
// remaining-carry line that should not be there, or a SCAN clause that lost
// its turn token.
class FaultyBackend : public CompletionBackend {
 public:
  explicit FaultyBackend(FaultSpec spec) : spec_(spec) {}

  Completion complete(const prompt::RenderedPrompt& p, const CompletionParams&) override {
    auto shape = detail::parse_prompt(p);
    std::mt19937_64 rng(spec_.seed ^ util::fnv1a64(p.text));
    bool inject = util::uniform01(rng) < spec_.rate;

    Completion c;
    c.backend_id = id();
    if (!inject) {
      c.text = detail::render_continuation(shape.variant, detail::gold_fields(shape));
      return c;
    }

    std::optional<detail::GoldFields> fields;
    if (shape.task == tasks::Task::Addition && spec_.fault_class != FaultClass::ScanDropDirection)
      fields = corrupt_addition(shape, rng);
    else if (shape.task == tasks::Task::Scan &&
             spec_.fault_class == FaultClass::ScanDropDirection)
      fields = corrupt_scan(shape, rng);
    if (!fields) fields = detail::gold_fields(shape);  // fault not applicable here
    c.text = detail::render_continuation(shape.variant, *fields);
    return c;
  }

  std::string id() const override { return "faulty:" + std::string(fault_name(spec_.fault_class)); }

 private:
  std::optional<detail::GoldFields> corrupt_addition(const detail::PromptShape& shape,
                                                     std::mt19937_64& rng) {
    auto [a, b] = tasks::parse_addition_instruction(shape.instruction);
    int m = std::max(tasks::digit_count(a), tasks::digit_count(b));
    detail::ChainCorruption c;
    switch (spec_.fault_class) {
      case FaultClass::CarryFlip:
        c.carry_flip_pos = static_cast<int>(util::bounded_uniform(rng, 0, m - 1));
        break;
      case FaultClass::DigitLookup: {
        int pos = static_cast<int>(util::bounded_uniform(rng, 0, m - 1));
        bool in_a = util::bounded_uniform(rng, 0, 1) == 1;
        int truth = tasks::digit_at(in_a ? a : b, pos);
        int wrong = static_cast<int>(util::bounded_uniform(rng, 0, 8));
        if (wrong >= truth) ++wrong;
        c.override_pos = pos;
        c.override_in_a = in_a;
        c.override_digit = wrong;
        break;
      }
      case FaultClass::SpuriousFinalCarry: {
        if (tasks::digit_count(a + b) != m) return std::nullopt;  // already carries out
        c.force_spurious_final = true;
        break;
      }
      case FaultClass::ScanDropDirection:
        return std::nullopt;
    }
    return detail::corrupted_addition_fields(a, b, c);
  }

  std::optional<detail::GoldFields> corrupt_scan(const detail::PromptShape& shape,
                                                 std::mt19937_64& rng) {
    scan::CommandAst ast;
    try {
      ast = scan::parse_command(shape.instruction);
    } catch (const scan::ParseError& e) {
      throw BackendError(BackendErrorKind::OracleParse, e.what());
    }
    auto sa = scan::interpret(ast);

    // an eligible clause still performs a primitive after losing its turn
    std::vector<std::size_t> eligible;  // indices into sa.subsequences
    for (std::size_t i = 0; i < ast.phrases.size(); ++i) {
      const auto& ph = ast.phrases[i];
      if (ph.direction == scan::Direction::None || ph.primitive == scan::Primitive::Turn)
        continue;
      std::size_t sub = i;
      if (ast.combiner == scan::Combiner::After) sub = 1 - i;
      eligible.push_back(sub);
    }
    if (eligible.empty()) return std::nullopt;

    std::size_t victim = eligible[util::bounded_uniform(rng, 0, eligible.size() - 1)];
    for (auto& unit : sa.subsequences[victim].units) {
      std::erase_if(unit, [](scan::Action a) {
        return a == scan::Action::Left || a == scan::Action::Right;
      });
    }
    detail::GoldFields g;
    g.explanation = rationale::gen_scan_rationale(ast, sa).text();
    g.output = shape.variant == prompt::Variant::RationaleOnly
                   ? scan::actions_to_string(scan::flatten(sa))
                   : markup::encode_scan_markup(sa);
    return g;
  }

  FaultSpec spec_;
};

}  // namespace rmt::llm
