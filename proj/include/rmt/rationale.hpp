// rationale.hpp -- templated step-by-step explanations for both tasks.
//
// The addition rationale walks the carry chain one position at a time; the
// SCAN rationale splits the instruction into sub-instructions and states how
// many repetition units each one expands to.  Template text is a bit-exact
// contract (golden-file tested), so edit with care.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rmt/markup.hpp"
#include "rmt/scan.hpp"
#include "rmt/tasks.hpp"

namespace rmt::rationale {

struct CarryStep {
  int position = 0;  // 0-based place value, A = 0
  int carry_in = 0;  // meaningless for the first step (no carry term rendered)
  int digit_a = 0;
  int digit_b = 0;
  int sum = 0;
  int carry_out = 0;
  int result_digit = 0;
  bool first = false;
  std::string rendered;
};

struct AdditionRationale {
  std::string length_line;
  std::string scope_line;
  std::vector<CarryStep> steps;
  std::optional<std::string> final_carry_line;
  std::string output_line;

  // Everything before the Output line; this is the prompt's Explanation field.
  std::string explanation_text() const {
    std::string out = length_line + '\n' + scope_line;
    for (const auto& s : steps) out += '\n' + s.rendered;
    if (final_carry_line) out += '\n' + *final_carry_line;
    return out;
  }

  std::string text() const { return explanation_text() + '\n' + output_line; }
};

namespace detail {

// Sums above nine are written digit by digit ("1 0"), the model's counting
// anchor; small sums stay plain.
inline std::string comparison_value(int sum) {
  std::string plain = std::to_string(sum);
  if (sum <= 9) return plain;
  std::string spaced;
  for (char c : plain) {
    if (!spaced.empty()) spaced += ' ';
    spaced += c;
  }
  return spaced;
}

inline std::string comparison_clause(int sum, bool spaced) {
  std::string value = spaced ? comparison_value(sum) : std::to_string(sum);
  if (sum > 9) return "Because " + value + " is greater than 9";
  return "Because " + value + " is less than or equal to 9";
}

inline std::string positions_list(int count) {
  std::string out;
  for (int i = 0; i < count; ++i) {
    if (i > 0) out += ", ";
    out += markup::position_letter(i);
  }
  return out;
}

}  // namespace detail

// The carry-step sentence.  Shared with the fault-injecting backend, which
// renders deliberately inconsistent values through the same template.
inline std::string render_carry_step(int position, int carry_in, int digit_a, int digit_b,
                                     int sum, int carry_out, int result_digit, bool first) {
  char letter = markup::position_letter(position);
  std::string line;
  if (first) {
    line = std::string("We sum the digits in position ") + letter + ", which are " + letter +
           " " + std::to_string(digit_a) + " and " + letter + " " + std::to_string(digit_b) +
           ". That is " + std::to_string(digit_a) + " + " + std::to_string(digit_b);
  } else {
    line = "This carry " + std::to_string(carry_in) + " is summed with digits in position " +
           letter + ", which are " + letter + " " + std::to_string(digit_a) + " and " + letter +
           " " + std::to_string(digit_b) + ". That is " + std::to_string(carry_in) + " + " +
           std::to_string(digit_a) + " + " + std::to_string(digit_b);
  }
  line += ", which equals to " + std::to_string(sum) + ". " +
          detail::comparison_clause(sum, /*spaced=*/true) + ", this results in carry " +
          std::to_string(carry_out) + " and " + letter + " " + std::to_string(result_digit) + ".";
  return line;
}

inline std::string render_final_carry_line(int position) {
  return std::string("This remaining carry results in ") + markup::position_letter(position) +
         " 1.";
}

inline std::pair<std::string, std::string> render_length_scope_lines(int na, int nb) {
  std::string length = std::string("This first number goes until position ") +
                       markup::position_letter(na - 1) +
                       ", whereas the second goes until position " +
                       markup::position_letter(nb - 1) + ".";
  std::string head;
  if (nb > na)
    head = "The second number is the longest";
  else if (na > nb)
    head = "The first number is the longest";
  else
    head = "Both numbers have equal length";
  std::string scope =
      head + ", so we sum digits in positions " + detail::positions_list(std::max(na, nb)) + ".";
  return {length, scope};
}

inline AdditionRationale gen_addition_rationale(const tasks::AdditionProblem& p) {
  using tasks::digit_at;
  int na = tasks::digit_count(p.a);
  int nb = tasks::digit_count(p.b);
  int m = std::max(na, nb);

  AdditionRationale r;
  std::tie(r.length_line, r.scope_line) = render_length_scope_lines(na, nb);

  int carry = 0;
  for (int pos = 0; pos < m; ++pos) {
    CarryStep step;
    step.position = pos;
    step.first = pos == 0;
    step.carry_in = carry;
    step.digit_a = digit_at(p.a, pos);
    step.digit_b = digit_at(p.b, pos);
    step.sum = (step.first ? 0 : carry) + step.digit_a + step.digit_b;
    step.carry_out = step.sum > 9 ? 1 : 0;
    step.result_digit = step.sum % 10;
    step.rendered = render_carry_step(pos, step.carry_in, step.digit_a, step.digit_b, step.sum,
                                      step.carry_out, step.result_digit, step.first);
    carry = step.carry_out;
    r.steps.push_back(std::move(step));
  }

  if (carry == 1) r.final_carry_line = render_final_carry_line(m);
  r.output_line = "Output: " + markup::encode_number_markup(p.answer);
  return r;
}

// Markup-free explanation used by the rationale-only prompt variant: no
// positional letters, no spaced-digit renderings.  The Output field (the
// plain decimal answer) is not part of the returned text.
inline std::string gen_addition_explanation_plain(const tasks::AdditionProblem& p) {
  using tasks::digit_at;
  int na = tasks::digit_count(p.a);
  int nb = tasks::digit_count(p.b);
  int m = std::max(na, nb);

  std::string out = "This first number has " + std::to_string(na) +
                    (na == 1 ? " digit" : " digits") + ", whereas the second has " +
                    std::to_string(nb) + (nb == 1 ? " digit" : " digits") + ".";
  out += '\n';
  if (nb > na)
    out += "The second number is the longest";
  else if (na > nb)
    out += "The first number is the longest";
  else
    out += "Both numbers have equal length";
  out += ", so we sum digits across " + std::to_string(m) +
         (m == 1 ? " position." : " positions.");

  int carry = 0;
  for (int pos = 0; pos < m; ++pos) {
    int da = digit_at(p.a, pos), db = digit_at(p.b, pos);
    int sum = (pos == 0 ? 0 : carry) + da + db;
    int carry_out = sum > 9 ? 1 : 0;
    out += '\n';
    if (pos == 0) {
      out += "We sum the last digits of each number, which are " + std::to_string(da) + " and " +
             std::to_string(db) + ". That is " + std::to_string(da) + " + " + std::to_string(db);
    } else {
      out += "This carry " + std::to_string(carry) + " is summed with the next digits, which are " +
             std::to_string(da) + " and " + std::to_string(db) + ". That is " +
             std::to_string(carry) + " + " + std::to_string(da) + " + " + std::to_string(db);
    }
    out += ", which equals to " + std::to_string(sum) + ". " +
           detail::comparison_clause(sum, /*spaced=*/false) + ", this results in carry " +
           std::to_string(carry_out) + " and digit " + std::to_string(sum % 10) + ".";
    carry = carry_out;
  }
  if (carry == 1) out += "\nThis remaining carry results in a leading 1.";
  return out;
}

struct ScanRationale {
  std::optional<std::string> split_line;
  std::optional<std::string> enumeration_line;
  std::vector<std::string> clause_lines;  // one per sub-instruction, execution order

  std::string text() const {
    std::string out;
    if (split_line) out += *split_line + '\n';
    if (enumeration_line) out += *enumeration_line + '\n';
    for (std::size_t i = 0; i < clause_lines.size(); ++i) {
      if (i > 0) out += '\n';
      out += clause_lines[i];
    }
    return out;
  }
};

namespace detail {

inline std::string unit_string(const scan::SubSequence& sub) {
  std::string out;
  if (sub.units.empty()) return out;
  for (std::size_t i = 0; i < sub.units[0].size(); ++i) {
    if (i > 0) out += ' ';
    out += scan::to_token(sub.units[0][i]);
  }
  return out;
}

inline std::string render_clause(int number, const scan::Phrase& p,
                                 const scan::SubSequence& sub) {
  std::string unit = unit_string(sub);
  int reps = scan::repetition_count(p.repetition);
  std::string rep_word = p.repetition == scan::Repetition::Twice ? "twice" : "thrice";
  std::string head = std::to_string(number) + ") \"" + p.text + "\"";

  if (p.manner == scan::Manner::Around) {
    std::string line = head + ". The word \"around\" results in 4 repetitions, therefore, \"" +
                       p.base_text + "\" results in 4 " + unit + " commands.";
    if (p.repetition != scan::Repetition::Once)
      line += "\nBecause of the word \"" + rep_word + "\", \"" + p.text + "\" results in " +
              std::to_string(reps) + " x 4 = " + std::to_string(reps * 4) + " " + unit +
              " commands.";
    return line;
  }
  if (p.repetition != scan::Repetition::Once) {
    return head + ". The word \"" + rep_word + "\" results in " + std::to_string(reps) +
           " repetitions, therefore, \"" + p.text + "\" results in " + std::to_string(reps) + " " +
           unit + " commands.";
  }
  return head + " results in 1 " + unit + " command.";
}

}  // namespace detail

// `sa` is normally interpret(ast); the fault injector hands in a corrupted
// structure on purpose, and the clause text follows whatever it is given.
inline ScanRationale gen_scan_rationale(const scan::CommandAst& ast,
                                        const scan::StructuredActions& sa) {
  ScanRationale r;
  if (ast.combiner == scan::Combiner::Single) {
    r.clause_lines.push_back(detail::render_clause(1, ast.phrases.at(0), sa.subsequences.at(0)));
    return r;
  }
  const auto& p0 = ast.phrases.at(0);
  const auto& p1 = ast.phrases.at(1);
  if (ast.combiner == scan::Combiner::And) {
    r.split_line = "Because of the word \"and\", the instruction can be divided in two "
                   "sub-instructions:";
    r.enumeration_line = "1) \"" + p0.text + "\" and 2) \"" + p1.text + "\"";
    r.clause_lines.push_back(detail::render_clause(1, p0, sa.subsequences.at(0)));
    r.clause_lines.push_back(detail::render_clause(2, p1, sa.subsequences.at(1)));
  } else {
    r.split_line = "The word \"after\" results in the inversion of the two sub-instructions:";
    r.enumeration_line = "2) \"" + p0.text + "\" and 1) \"" + p1.text + "\".";
    // execution order: the second phrase runs first
    r.clause_lines.push_back(detail::render_clause(1, p1, sa.subsequences.at(0)));
    r.clause_lines.push_back(detail::render_clause(2, p0, sa.subsequences.at(1)));
  }
  return r;
}

}  // namespace rmt::rationale
