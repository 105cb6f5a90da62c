#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "rmt/rationale.hpp"

using namespace rmt;

namespace {

std::string read_file(const std::string& name) {
  std::ifstream in(std::string(RMT_DATA_DIR) + "/golden/" + name);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("rationale") {

TEST_CASE("addition transcript, short pair (780 + 2308)") {
  auto r = rationale::gen_addition_rationale(tasks::make_addition_problem(780, 2308));
  CHECK(r.text() + "\n" == read_file("addition_example5.txt"));
  CHECK(r.output_line == "Output: D 3 C 0 B 8 A 8");
  CHECK_FALSE(r.final_carry_line.has_value());
}

TEST_CASE("addition transcript, equal-length pair with final carry") {
  auto r = rationale::gen_addition_rationale(
      tasks::make_addition_problem(20796475162ull, 92175644614ull));
  CHECK(r.text() + "\n" == read_file("addition_example6.txt"));
  REQUIRE(r.final_carry_line.has_value());
  CHECK(*r.final_carry_line == "This remaining carry results in L 1.");
  CHECK(r.output_line == "Output: L 1 K 1 J 2 I 9 H 7 G 2 F 1 E 1 D 9 C 7 B 7 A 6");
  CHECK(r.steps.size() == 11);
}

TEST_CASE("addition zero case") {
  auto r = rationale::gen_addition_rationale(tasks::make_addition_problem(0, 0));
  REQUIRE(r.steps.size() == 1);
  CHECK(r.steps[0].rendered.find("That is 0 + 0, which equals to 0.") != std::string::npos);
  CHECK_FALSE(r.final_carry_line.has_value());
  CHECK(r.output_line == "Output: A 0");
}

TEST_CASE("addition scope line variants") {
  auto r = rationale::gen_addition_rationale(tasks::make_addition_problem(912, 64));
  CHECK(r.scope_line == "The first number is the longest, so we sum digits in positions A, B, C.");
  r = rationale::gen_addition_rationale(tasks::make_addition_problem(64, 912));
  CHECK(r.scope_line ==
        "The second number is the longest, so we sum digits in positions A, B, C.");
  r = rationale::gen_addition_rationale(tasks::make_addition_problem(47, 31));
  CHECK(r.scope_line == "Both numbers have equal length, so we sum digits in positions A, B.");
}

TEST_CASE("addition rationale invariants over random problems") {
  auto problems = tasks::sample_balanced_addition({300, 1, 14, 5});
  for (const auto& p : problems) {
    auto r = rationale::gen_addition_rationale(p);
    CHECK(r.steps.size() ==
          static_cast<std::size_t>(std::max(tasks::digit_count(p.a), tasks::digit_count(p.b))));
    int prev_carry = 0;
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
      const auto& s = r.steps[k];
      CHECK(s.sum == (k == 0 ? 0 : prev_carry) + s.digit_a + s.digit_b);
      CHECK(s.carry_out == (s.sum > 9 ? 1 : 0));
      CHECK(s.result_digit == s.sum % 10);
      prev_carry = s.carry_out;
    }
    CHECK(r.final_carry_line.has_value() == (prev_carry == 1));
    // the Output line decodes back to the exact answer
    auto payload = r.output_line.substr(std::string("Output: ").size());
    CHECK(markup::decode_number_markup(payload) == p.answer);
  }
}

TEST_CASE("markup-free addition explanation") {
  auto text = rationale::gen_addition_explanation_plain(tasks::make_addition_problem(780, 2308));
  CHECK(text.find("This first number has 3 digits, whereas the second has 4 digits.") !=
        std::string::npos);
  CHECK(text.find("Output:") == std::string::npos);
  // no positional letters anywhere
  for (const auto& tok : util::split_ws(text)) {
    bool single_upper = tok.size() == 1 && tok[0] >= 'A' && tok[0] <= 'Z';
    CHECK_FALSE(single_upper);
  }
  auto carry = rationale::gen_addition_explanation_plain(tasks::make_addition_problem(88, 939));
  CHECK(carry.find("Because 17 is greater than 9") != std::string::npos);
  CHECK(carry.find("This remaining carry results in a leading 1.") != std::string::npos);
}

TEST_CASE("scan rationale, and-combined around clauses") {
  auto ast = scan::parse_command("run around right and look around right twice");
  auto r = rationale::gen_scan_rationale(ast, scan::interpret(ast));
  CHECK(r.text() + "\n" == read_file("scan_and_example.txt"));
  CHECK(r.clause_lines.size() == 2);
}

TEST_CASE("scan rationale, after-combined clauses") {
  auto ast = scan::parse_command("run right thrice after look around left thrice");
  auto r = rationale::gen_scan_rationale(ast, scan::interpret(ast));
  CHECK(r.text() + "\n" == read_file("scan_after_corrected.txt"));
}

TEST_CASE("scan rationale, single phrase with around and repetition") {
  auto ast = scan::parse_command("turn around right twice");
  auto r = rationale::gen_scan_rationale(ast, scan::interpret(ast));
  CHECK_FALSE(r.split_line.has_value());
  CHECK(r.text() ==
        "1) \"turn around right twice\". The word \"around\" results in 4 repetitions, "
        "therefore, \"turn around right\" results in 4 RIGHT commands.\n"
        "Because of the word \"twice\", \"turn around right twice\" results in "
        "2 x 4 = 8 RIGHT commands.");
}

TEST_CASE("scan rationale, plain phrases") {
  auto ast = scan::parse_command("walk");
  auto r = rationale::gen_scan_rationale(ast, scan::interpret(ast));
  CHECK_FALSE(r.split_line.has_value());
  REQUIRE(r.clause_lines.size() == 1);
  CHECK(r.clause_lines[0] == "1) \"walk\" results in 1 WALK command.");

  ast = scan::parse_command("jump opposite left");
  r = rationale::gen_scan_rationale(ast, scan::interpret(ast));
  CHECK(r.clause_lines[0] == "1) \"jump opposite left\" results in 1 LEFT LEFT JUMP command.");

  ast = scan::parse_command("run right thrice");
  r = rationale::gen_scan_rationale(ast, scan::interpret(ast));
  CHECK(r.clause_lines[0] ==
        "1) \"run right thrice\". The word \"thrice\" results in 3 repetitions, therefore, "
        "\"run right thrice\" results in 3 RIGHT RUN commands.");
}

TEST_CASE("scan rationale clause count equals sub-sequence count") {
  auto commands = scan::enumerate_all_commands();
  std::mt19937_64 rng(41);
  for (int i = 0; i < 400; ++i) {
    const auto& cmd = commands[util::bounded_uniform(rng, 0, commands.size() - 1)];
    auto ast = scan::parse_command(cmd);
    auto sa = scan::interpret(ast);
    auto r = rationale::gen_scan_rationale(ast, sa);
    CHECK(r.clause_lines.size() == sa.subsequences.size());
    CHECK((r.split_line.has_value()) == (ast.combiner != scan::Combiner::Single));
  }
}

}  // TEST_SUITE
