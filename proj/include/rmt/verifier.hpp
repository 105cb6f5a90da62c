// verifier.hpp -- scoring and failure classification.
//
// Every completion string yields a Verdict; nothing here throws on model
// output.  SCAN is scored on the markup-stripped action sequence.  Addition
// is scored on the decoded output value; when wrong and the explanation
// parses as carry steps, the steps run against exact arithmetic and the
// verdict names the earliest causal fault, with class precedence
// digit-lookup > carry > final-carry > wrong-answer.

#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "rmt/markup.hpp"
#include "rmt/prompt.hpp"
#include "rmt/scan.hpp"
#include "rmt/tasks.hpp"

namespace rmt::verifier {

enum class ErrorClass {
  None,
  WrongAnswer,
  Format,
  CarryError,
  DigitLookupError,
  SpuriousFinalCarry,
  MissingFinalCarry,
  ClauseError,
  Truncated,
  Loop,
};

inline std::string_view error_class_name(ErrorClass e) {
  switch (e) {
    case ErrorClass::None: return "none";
    case ErrorClass::WrongAnswer: return "wrong_answer";
    case ErrorClass::Format: return "format";
    case ErrorClass::CarryError: return "carry_error";
    case ErrorClass::DigitLookupError: return "digit_lookup_error";
    case ErrorClass::SpuriousFinalCarry: return "spurious_final_carry";
    case ErrorClass::MissingFinalCarry: return "missing_final_carry";
    case ErrorClass::ClauseError: return "clause_error";
    case ErrorClass::Truncated: return "truncated";
    case ErrorClass::Loop: return "loop";
  }
  return "unknown";
}

struct Verdict {
  bool correct = false;
  std::string extracted_output;  // raw Output field, as found
  std::string stripped_answer;   // markup-free answer ("JUMP JUMP" / "3088")
  ErrorClass error_class = ErrorClass::WrongAnswer;
  std::optional<int> first_bad_step;  // 0-based place value of the offending step
};

struct Fields {
  std::optional<std::string> explanation;
  std::optional<std::string> output_line;  // text after the Output: label, one line
};

namespace detail {

inline std::optional<std::string> nonempty(std::string s) {
  if (s.empty()) return std::nullopt;
  return s;
}

inline std::string first_line(std::string_view s) {
  auto nl = s.find('\n');
  return util::trim(nl == std::string_view::npos ? s : s.substr(0, nl));
}

}  // namespace detail

// Total: absence of a field is encoded in the result, never thrown.
inline Fields extract_fields(const std::string& completion, prompt::Variant variant) {
  Fields f;
  if (variant == prompt::Variant::MarkupOnly) {
    std::string_view rest = completion;
    auto pos = completion.find("Output:");
    if (pos != std::string::npos) rest = std::string_view(completion).substr(pos + 7);
    f.output_line = detail::nonempty(detail::first_line(rest));
    return f;
  }
  if (variant == prompt::Variant::Inverted) {
    auto epos = completion.find("Explanation:");
    std::string_view head = std::string_view(completion).substr(0, epos);
    if (auto opos = head.find("Output:"); opos != std::string_view::npos)
      head = head.substr(opos + 7);
    f.output_line = detail::nonempty(detail::first_line(head));
    if (epos != std::string::npos)
      f.explanation = detail::nonempty(util::trim(completion.substr(epos + 12)));
    return f;
  }
  // full / rationale-only: explanation text up to the first Output: label
  auto opos = completion.find("Output:");
  if (opos == std::string::npos) {
    f.explanation = detail::nonempty(util::trim(completion));
    return f;
  }
  f.explanation = detail::nonempty(util::trim(completion.substr(0, opos)));
  f.output_line =
      detail::nonempty(detail::first_line(std::string_view(completion).substr(opos + 7)));
  return f;
}

namespace detail {

// Loop heuristic: the stripped sequence overshoots the ground truth and ends
// in at least three repeats of one short block, all past the expected length.
inline bool looks_like_loop(const std::vector<scan::Action>& stripped,
                            const std::vector<scan::Action>& gt) {
  if (stripped.size() <= gt.size()) return false;
  std::size_t overshoot = stripped.size() - gt.size();
  for (std::size_t block = 1; block <= 8; ++block) {
    if (overshoot < 3 * block || stripped.size() < 3 * block) continue;
    auto tail = stripped.end();
    bool repeats = std::equal(tail - block, tail, tail - 2 * block) &&
                   std::equal(tail - block, tail, tail - 3 * block);
    if (repeats) return true;
  }
  return false;
}

}  // namespace detail

inline Verdict check_scan(const std::string& completion, const std::vector<scan::Action>& gt,
                          prompt::Variant variant) {
  Verdict v;
  auto fields = extract_fields(completion, variant);
  if (!fields.output_line) {
    v.error_class = ErrorClass::Truncated;
    return v;
  }
  v.extracted_output = *fields.output_line;
  std::vector<scan::Action> stripped;
  try {
    stripped = markup::strip_scan_markup(*fields.output_line);
  } catch (const markup::ForeignToken&) {
    v.error_class = ErrorClass::Format;
    return v;
  }
  v.stripped_answer = scan::actions_to_string(stripped);
  if (stripped == gt) {
    v.correct = true;
    v.error_class = ErrorClass::None;
  } else if (detail::looks_like_loop(stripped, gt)) {
    v.error_class = ErrorClass::Loop;
  } else {
    v.error_class = ErrorClass::WrongAnswer;
  }
  return v;
}

struct ParsedCarryStep {
  int position = 0;  // 0-based, from the claimed position letter
  bool first = false;
  int carry_in = 0;
  int digit_a = 0;  // the "which are" claim
  int digit_b = 0;
  int addend_carry = 0;  // the "That is" rendering
  int addend_a = 0;
  int addend_b = 0;
  int sum = 0;
  int comparison_value = 0;  // spaced digits joined ("1 1" -> 11)
  bool says_greater = false;
  int carry_out = 0;
  int result_position = 0;
  int result_digit = 0;
  int line_index = 0;
};

namespace detail {

inline const std::regex& first_step_re() {
  static const std::regex re(
      R"(^We sum the digits in position ([A-Z]), which are ([A-Z]) (\d) and ([A-Z]) (\d)\. )"
      R"(That is (\d) \+ (\d), which equals to (\d+)\. )"
      R"(Because ([\d ]+) is (greater than|less than or equal to) 9, )"
      R"(this results in carry (\d) and ([A-Z]) (\d)\.$)");
  return re;
}

inline const std::regex& chain_step_re() {
  static const std::regex re(
      R"(^This carry (\d) is summed with digits in position ([A-Z]), )"
      R"(which are ([A-Z]) (\d) and ([A-Z]) (\d)\. )"
      R"(That is (\d) \+ (\d) \+ (\d), which equals to (\d+)\. )"
      R"(Because ([\d ]+) is (greater than|less than or equal to) 9, )"
      R"(this results in carry (\d) and ([A-Z]) (\d)\.$)");
  return re;
}

inline const std::regex& final_carry_re() {
  static const std::regex re(R"(^This remaining carry results in ([A-Z]) 1\.$)");
  return re;
}

inline int joined_digits(std::string digits_maybe_spaced) {
  std::string joined;
  for (char c : digits_maybe_spaced)
    if (c != ' ') joined += c;
  return std::stoi(joined);
}

}  // namespace detail

// Template-matching per line; non-matching lines are skipped.
inline std::vector<ParsedCarryStep> parse_addition_steps(const std::string& explanation) {
  std::vector<ParsedCarryStep> steps;
  auto lines = util::split_lines(explanation);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    std::string line = util::trim(lines[i]);
    ParsedCarryStep s;
    s.line_index = static_cast<int>(i);
    if (std::regex_match(line, m, detail::first_step_re())) {
      s.first = true;
      s.position = m[1].str()[0] - 'A';
      s.digit_a = std::stoi(m[3]);
      s.digit_b = std::stoi(m[5]);
      s.addend_a = std::stoi(m[6]);
      s.addend_b = std::stoi(m[7]);
      s.sum = std::stoi(m[8]);
      s.comparison_value = detail::joined_digits(m[9]);
      s.says_greater = m[10] == "greater than";
      s.carry_out = std::stoi(m[11]);
      s.result_position = m[12].str()[0] - 'A';
      s.result_digit = std::stoi(m[13]);
      steps.push_back(s);
    } else if (std::regex_match(line, m, detail::chain_step_re())) {
      s.carry_in = std::stoi(m[1]);
      s.position = m[2].str()[0] - 'A';
      s.digit_a = std::stoi(m[4]);
      s.digit_b = std::stoi(m[6]);
      s.addend_carry = std::stoi(m[7]);
      s.addend_a = std::stoi(m[8]);
      s.addend_b = std::stoi(m[9]);
      s.sum = std::stoi(m[10]);
      s.comparison_value = detail::joined_digits(m[11]);
      s.says_greater = m[12] == "greater than";
      s.carry_out = std::stoi(m[13]);
      s.result_position = m[14].str()[0] - 'A';
      s.result_digit = std::stoi(m[15]);
      steps.push_back(s);
    }
  }
  return steps;
}

inline bool has_final_carry_line(const std::string& explanation) {
  for (const auto& line : util::split_lines(explanation)) {
    std::smatch m;
    std::string t = util::trim(line);
    if (std::regex_match(t, m, detail::final_carry_re())) return true;
  }
  return false;
}

namespace detail {

// A step whose internal arithmetic or narration is inconsistent.
inline bool carry_step_violated(const ParsedCarryStep& s,
                                const std::optional<int>& prev_carry_out) {
  int cin = s.first ? 0 : s.carry_in;
  if (!s.first && s.addend_carry != s.carry_in) return true;
  if (s.addend_a != s.digit_a || s.addend_b != s.digit_b) return true;
  if (s.sum != cin + s.digit_a + s.digit_b) return true;
  if (s.comparison_value != s.sum) return true;
  if (s.says_greater != (s.sum > 9)) return true;
  if (s.carry_out != (s.sum > 9 ? 1 : 0)) return true;
  if (s.result_digit != s.sum % 10) return true;
  if (s.result_position != s.position) return true;
  if (!s.first && prev_carry_out && s.carry_in != *prev_carry_out) return true;
  return false;
}

}  // namespace detail

inline Verdict check_addition(const std::string& completion, const tasks::AdditionProblem& problem,
                              prompt::Variant variant) {
  Verdict v;
  auto fields = extract_fields(completion, variant);
  if (!fields.output_line) {
    v.error_class = ErrorClass::Truncated;
    return v;
  }
  v.extracted_output = *fields.output_line;

  std::optional<markup::BigValue> value;
  std::string trimmed = util::trim(*fields.output_line);
  if (util::is_all_digits(trimmed)) {
    markup::BigValue acc = 0;
    for (char c : trimmed) acc = acc * 10 + static_cast<markup::BigValue>(c - '0');
    value = acc;
  } else {
    try {
      value = markup::decode_number_markup(trimmed);
    } catch (const markup::MalformedMarkup&) {
      v.error_class = ErrorClass::Format;
      return v;
    }
  }
  v.stripped_answer = markup::decimal_string(*value);
  if (*value == static_cast<markup::BigValue>(problem.answer)) {
    v.correct = true;
    v.error_class = ErrorClass::None;
    return v;
  }

  v.error_class = ErrorClass::WrongAnswer;
  if (!fields.explanation) return v;
  auto steps = parse_addition_steps(*fields.explanation);
  if (steps.empty()) return v;

  // class precedence: digit lookup first, anywhere in the chain
  for (const auto& s : steps) {
    if (s.digit_a != tasks::digit_at(problem.a, s.position) ||
        s.digit_b != tasks::digit_at(problem.b, s.position)) {
      v.error_class = ErrorClass::DigitLookupError;
      v.first_bad_step = s.position;
      return v;
    }
  }
  std::optional<int> prev;
  for (const auto& s : steps) {
    if (detail::carry_step_violated(s, prev)) {
      v.error_class = ErrorClass::CarryError;
      v.first_bad_step = s.position;
      return v;
    }
    prev = s.carry_out;
  }
  bool final_line = has_final_carry_line(*fields.explanation);
  if (final_line && steps.back().carry_out == 0) {
    v.error_class = ErrorClass::SpuriousFinalCarry;
    return v;
  }
  if (!final_line && steps.back().carry_out == 1) {
    v.error_class = ErrorClass::MissingFinalCarry;
    return v;
  }
  return v;
}

}  // namespace rmt::verifier
