#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace spr {

// Identifier of the assumption variable in simple-logic formulas.
inline constexpr std::string_view kAssumptionVariable = "PA";

// Fuzzy-logic expression over child propositions and the assumption variable.
// AND and OR are binary (left-associative chains nest to the left).
struct Formula {
  enum class Op { Var, Not, And, Or };

  Op op = Op::Var;
  std::string name;               // Var only
  std::vector<Formula> operands;  // 1 for Not, 2 for And/Or

  static Formula var(std::string name);
  static Formula negate(Formula operand);
  static Formula conj(Formula left, Formula right);
  static Formula disj(Formula left, Formula right);

  friend bool operator==(const Formula&, const Formula&) = default;
};

using Assignment = std::map<std::string, double, std::less<>>;

// Grammar (case-insensitive keywords, precedence NOT > AND > OR):
//   expr   := term ("OR" term)*
//   term   := factor ("AND" factor)*
//   factor := "NOT" factor | "(" expr ")" | identifier
// Identifiers are proposition ids or "PA". Throws spr::ParseError.
Formula parse_formula(std::string_view text);

// Minimal-parenthesis rendering; parse_formula(to_string(f)) == f.
std::string to_string(const Formula& f);

// A AND B = AB, A OR B = A + B - AB, NOT A = 1 - A. Repeated variables are
// substituted as-is. Throws Error(UnboundVariable).
double eval_formula(const Formula& f, const Assignment& assignment);

// d f / d `variable` at `assignment` by the chain rule over the AST.
double formula_partial(const Formula& f, const Assignment& assignment, std::string_view variable);

std::set<std::string, std::less<>> formula_variables(const Formula& f);

// Number of occurrences of each variable.
std::map<std::string, int, std::less<>> variable_occurrences(const Formula& f);

}  // namespace spr
