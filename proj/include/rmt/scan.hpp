// scan.hpp -- the SCAN command language: grammar, parser, interpreter.
//
// Commands compose a primitive (walk/look/run/jump/turn) with an optional
// manner (opposite/around), direction (left/right) and repetition
// (twice/thrice); two commands join with "and" or "after".  Interpretation
// keeps the repetition structure: a StructuredActions value is a list of
// sub-sequences (one per top-level phrase, in execution order), each a list
// of repetition units of atomic actions.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmt/util.hpp"

namespace rmt::scan {

enum class Action { Walk, Look, Run, Jump, Left, Right };

inline std::string_view to_token(Action a) {
  switch (a) {
    case Action::Walk: return "WALK";
    case Action::Look: return "LOOK";
    case Action::Run: return "RUN";
    case Action::Jump: return "JUMP";
    case Action::Left: return "LEFT";
    case Action::Right: return "RIGHT";
  }
  return "";
}

inline std::optional<Action> action_from_token(std::string_view tok) {
  if (tok == "WALK") return Action::Walk;
  if (tok == "LOOK") return Action::Look;
  if (tok == "RUN") return Action::Run;
  if (tok == "JUMP") return Action::Jump;
  if (tok == "LEFT") return Action::Left;
  if (tok == "RIGHT") return Action::Right;
  return std::nullopt;
}

enum class Primitive { Walk, Look, Run, Jump, Turn };
enum class Direction { None, Left, Right };
enum class Manner { Plain, Around, Opposite };
enum class Repetition { Once, Twice, Thrice };
enum class Combiner { Single, And, After };

struct Phrase {
  Primitive primitive = Primitive::Walk;
  Direction direction = Direction::None;
  Manner manner = Manner::Plain;
  Repetition repetition = Repetition::Once;
  std::string text;       // phrase as written, e.g. "look around left thrice"
  std::string base_text;  // phrase minus the repetition word, e.g. "look around left"
};

struct CommandAst {
  Combiner combiner = Combiner::Single;
  std::vector<Phrase> phrases;  // textual order; one for Single, two otherwise
  std::string source_text;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t token_index)
      : std::runtime_error(msg + " (token " + std::to_string(token_index) + ")"),
        token_index_(token_index) {}
  std::size_t token_index() const { return token_index_; }

 private:
  std::size_t token_index_;
};

class UnknownToken : public std::runtime_error {
 public:
  explicit UnknownToken(const std::string& tok)
      : std::runtime_error("unknown action token: " + tok) {}
};

inline int repetition_count(Repetition r) {
  switch (r) {
    case Repetition::Once: return 1;
    case Repetition::Twice: return 2;
    case Repetition::Thrice: return 3;
  }
  return 1;
}

namespace detail {

inline std::optional<Primitive> primitive_word(std::string_view w) {
  if (w == "walk") return Primitive::Walk;
  if (w == "look") return Primitive::Look;
  if (w == "run") return Primitive::Run;
  if (w == "jump") return Primitive::Jump;
  if (w == "turn") return Primitive::Turn;
  return std::nullopt;
}

inline Action primitive_action(Primitive p) {
  switch (p) {
    case Primitive::Walk: return Action::Walk;
    case Primitive::Look: return Action::Look;
    case Primitive::Run: return Action::Run;
    case Primitive::Jump: return Action::Jump;
    case Primitive::Turn: break;
  }
  throw std::logic_error("turn has no primitive action");
}

struct Cursor {
  const std::vector<std::string>& toks;
  std::size_t pos = 0;
  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const { return toks[pos]; }
};

inline Phrase parse_phrase(Cursor& c) {
  if (c.done()) throw ParseError("expected a command word", c.pos);
  auto prim = primitive_word(c.peek());
  if (!prim) throw ParseError("expected a primitive, got '" + c.peek() + "'", c.pos);
  Phrase p;
  p.primitive = *prim;
  std::size_t start = c.pos;
  ++c.pos;
  if (!c.done() && (c.peek() == "opposite" || c.peek() == "around")) {
    p.manner = c.peek() == "opposite" ? Manner::Opposite : Manner::Around;
    ++c.pos;
  }
  if (!c.done() && (c.peek() == "left" || c.peek() == "right")) {
    p.direction = c.peek() == "left" ? Direction::Left : Direction::Right;
    ++c.pos;
  }
  if (p.manner != Manner::Plain && p.direction == Direction::None)
    throw ParseError("'around'/'opposite' require a direction", c.pos);
  if (p.primitive == Primitive::Turn && p.direction == Direction::None)
    throw ParseError("bare 'turn' requires a direction", c.pos);
  std::size_t base_end = c.pos;
  if (!c.done() && (c.peek() == "twice" || c.peek() == "thrice")) {
    p.repetition = c.peek() == "twice" ? Repetition::Twice : Repetition::Thrice;
    ++c.pos;
  }
  std::vector<std::string> words(c.toks.begin() + static_cast<long>(start),
                                 c.toks.begin() + static_cast<long>(c.pos));
  p.text = util::join(words, " ");
  words.resize(base_end - start);
  p.base_text = util::join(words, " ");
  return p;
}

}  // namespace detail

inline CommandAst parse_command(std::string_view text) {
  auto toks = util::split_ws(text);
  detail::Cursor c{toks};
  CommandAst ast;
  ast.source_text = util::join(toks, " ");
  ast.phrases.push_back(detail::parse_phrase(c));
  if (!c.done()) {
    if (c.peek() == "and")
      ast.combiner = Combiner::And;
    else if (c.peek() == "after")
      ast.combiner = Combiner::After;
    else
      throw ParseError("expected 'and'/'after' or end, got '" + c.peek() + "'", c.pos);
    ++c.pos;
    ast.phrases.push_back(detail::parse_phrase(c));
    if (!c.done())
      throw ParseError("trailing input '" + c.peek() + "'", c.pos);
  }
  return ast;
}

using Unit = std::vector<Action>;

struct SubSequence {
  std::vector<Unit> units;
};

// Sub-sequences in execution order ("after" swaps its phrases).
struct StructuredActions {
  std::vector<SubSequence> subsequences;
};

// Unit boundaries: each around-iteration is one unit; otherwise each
// twice/thrice iteration is one unit; otherwise the whole phrase is one unit.
inline SubSequence interpret_phrase(const Phrase& p) {
  Action turn = p.direction == Direction::Left ? Action::Left : Action::Right;
  int reps = repetition_count(p.repetition);
  SubSequence sub;
  if (p.manner == Manner::Around) {
    Unit iter;
    iter.push_back(turn);
    if (p.primitive != Primitive::Turn) iter.push_back(detail::primitive_action(p.primitive));
    for (int r = 0; r < reps * 4; ++r) sub.units.push_back(iter);
    return sub;
  }
  Unit base;
  if (p.manner == Manner::Opposite) {
    base.push_back(turn);
    base.push_back(turn);
  } else if (p.direction != Direction::None) {
    base.push_back(turn);
  }
  if (p.primitive != Primitive::Turn) base.push_back(detail::primitive_action(p.primitive));
  for (int r = 0; r < reps; ++r) sub.units.push_back(base);
  return sub;
}

inline StructuredActions interpret(const CommandAst& ast) {
  StructuredActions sa;
  if (ast.combiner == Combiner::After) {
    sa.subsequences.push_back(interpret_phrase(ast.phrases.at(1)));
    sa.subsequences.push_back(interpret_phrase(ast.phrases.at(0)));
  } else {
    for (const auto& p : ast.phrases) sa.subsequences.push_back(interpret_phrase(p));
  }
  return sa;
}

inline std::vector<Action> flatten(const StructuredActions& sa) {
  std::vector<Action> out;
  for (const auto& sub : sa.subsequences)
    for (const auto& unit : sub.units)
      out.insert(out.end(), unit.begin(), unit.end());
  return out;
}

// Official dataset vocabulary <-> the plain one used everywhere else.
inline std::string official_token(Action a) {
  switch (a) {
    case Action::Left: return "I_TURN_LEFT";
    case Action::Right: return "I_TURN_RIGHT";
    default: return "I_" + std::string(to_token(a));
  }
}

inline std::vector<Action> map_official_tokens(const std::vector<std::string>& tokens) {
  std::vector<Action> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t == "I_TURN_LEFT") {
      out.push_back(Action::Left);
    } else if (t == "I_TURN_RIGHT") {
      out.push_back(Action::Right);
    } else if (t.size() > 2 && t.rfind("I_", 0) == 0) {
      auto a = action_from_token(std::string_view(t).substr(2));
      if (!a) throw UnknownToken(t);
      out.push_back(*a);
    } else {
      throw UnknownToken(t);
    }
  }
  return out;
}

inline std::string actions_to_string(const std::vector<Action>& actions) {
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i > 0) out += ' ';
    out += to_token(actions[i]);
  }
  return out;
}

inline std::vector<Action> actions_from_string(std::string_view text) {
  std::vector<Action> out;
  for (const auto& tok : util::split_ws(text)) {
    auto a = action_from_token(tok);
    if (!a) throw UnknownToken(tok);
    out.push_back(*a);
  }
  return out;
}

// Every command the grammar generates, in a fixed order.  The full set has
// 20,910 entries: 102 simple phrases plus 102*102 each for "and"/"after".
inline std::vector<std::string> enumerate_all_commands() {
  static const std::array<std::string_view, 5> prims{"walk", "look", "run", "jump", "turn"};
  static const std::array<std::string_view, 3> manners{"", "opposite", "around"};
  static const std::array<std::string_view, 2> dirs{"left", "right"};
  static const std::array<std::string_view, 3> reps{"", "twice", "thrice"};

  std::vector<std::string> phrases;
  for (auto prim : prims) {
    for (auto manner : manners) {
      for (int d = -1; d < 2; ++d) {
        if (d < 0 && (!manner.empty() || prim == "turn")) continue;
        for (auto rep : reps) {
          std::string s(prim);
          if (!manner.empty()) s += " " + std::string(manner);
          if (d >= 0) s += " " + std::string(dirs[static_cast<std::size_t>(d)]);
          if (!rep.empty()) s += " " + std::string(rep);
          phrases.push_back(s);
        }
      }
    }
  }

  std::vector<std::string> out = phrases;
  for (const char* conj : {" and ", " after "})
    for (const auto& a : phrases)
      for (const auto& b : phrases) out.push_back(a + conj + b);
  return out;
}

}  // namespace rmt::scan
