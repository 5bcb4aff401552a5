#include "spr/synthesis/formula.hpp"

#include <cctype>

#include "spr/core/node_id.hpp"
#include "spr/error.hpp"

namespace spr {

Formula Formula::var(std::string name) {
  Formula f;
  f.op = Op::Var;
  f.name = std::move(name);
  return f;
}

Formula Formula::negate(Formula operand) {
  Formula f;
  f.op = Op::Not;
  f.operands.push_back(std::move(operand));
  return f;
}

Formula Formula::conj(Formula left, Formula right) {
  Formula f;
  f.op = Op::And;
  f.operands.push_back(std::move(left));
  f.operands.push_back(std::move(right));
  return f;
}

Formula Formula::disj(Formula left, Formula right) {
  Formula f;
  f.op = Op::Or;
  f.operands.push_back(std::move(left));
  f.operands.push_back(std::move(right));
  return f;
}

namespace {

enum class TokenKind { LParen, RParen, And, Or, Not, Ident, End };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_'; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(') {
      tokens.push_back({TokenKind::LParen, "(", i++});
      continue;
    }
    if (c == ')') {
      tokens.push_back({TokenKind::RParen, ")", i++});
      continue;
    }
    if (!is_word_char(c))
      throw ParseError("unexpected character '" + std::string(1, c) + "'", tokens.size() + 1, i);
    std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    std::string word(text.substr(start, i - start));
    std::string up = upper(word);
    if (up == "AND") {
      tokens.push_back({TokenKind::And, word, start});
    } else if (up == "OR") {
      tokens.push_back({TokenKind::Or, word, start});
    } else if (up == "NOT") {
      tokens.push_back({TokenKind::Not, word, start});
    } else if (word == kAssumptionVariable || NodeId::is_valid(word)) {
      tokens.push_back({TokenKind::Ident, word, start});
    } else {
      throw ParseError("unknown token '" + word + "'", tokens.size() + 1, start);
    }
  }
  tokens.push_back({TokenKind::End, "", text.size()});
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Formula parse() {
    Formula f = expr();
    if (peek().kind != TokenKind::End) fail("unexpected trailing token");
    return f;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    std::string shown = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(what + " at " + shown, pos_ + 1, t.offset);
  }

  Formula expr() {
    Formula left = term();
    while (peek().kind == TokenKind::Or) {
      ++pos_;
      left = Formula::disj(std::move(left), term());
    }
    return left;
  }

  Formula term() {
    Formula left = factor();
    while (peek().kind == TokenKind::And) {
      ++pos_;
      left = Formula::conj(std::move(left), factor());
    }
    return left;
  }

  Formula factor() {
    switch (peek().kind) {
      case TokenKind::Not:
        ++pos_;
        return Formula::negate(factor());
      case TokenKind::LParen: {
        ++pos_;
        Formula inner = expr();
        if (peek().kind != TokenKind::RParen) fail("expected ')'");
        ++pos_;
        return inner;
      }
      case TokenKind::Ident:
        return Formula::var(tokens_[pos_++].text);
      default:
        fail("expected operand");
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

int precedence(Formula::Op op) {
  switch (op) {
    case Formula::Op::Or: return 1;
    case Formula::Op::And: return 2;
    case Formula::Op::Not: return 3;
    case Formula::Op::Var: return 4;
  }
  return 0;
}

void render(const Formula& f, std::string& out) {
  switch (f.op) {
    case Formula::Op::Var:
      out += f.name;
      return;
    case Formula::Op::Not: {
      out += "NOT ";
      const Formula& x = f.operands[0];
      bool paren = precedence(x.op) < precedence(Formula::Op::Not);
      if (paren) out += '(';
      render(x, out);
      if (paren) out += ')';
      return;
    }
    case Formula::Op::And:
    case Formula::Op::Or: {
      const Formula& l = f.operands[0];
      const Formula& r = f.operands[1];
      // Left-associative: a right operand at the same level needs parentheses.
      bool lp = precedence(l.op) < precedence(f.op);
      bool rp = precedence(r.op) <= precedence(f.op);
      if (lp) out += '(';
      render(l, out);
      if (lp) out += ')';
      out += f.op == Formula::Op::And ? " AND " : " OR ";
      if (rp) out += '(';
      render(r, out);
      if (rp) out += ')';
      return;
    }
  }
}

struct ValueAndPartial {
  double value;
  double partial;
};

ValueAndPartial forward(const Formula& f, const Assignment& a, std::string_view variable) {
  switch (f.op) {
    case Formula::Op::Var: {
      auto it = a.find(f.name);
      if (it == a.end()) throw Error(ErrorCode::UnboundVariable, "no value for '" + f.name + "'");
      return {it->second, f.name == variable ? 1.0 : 0.0};
    }
    case Formula::Op::Not: {
      auto x = forward(f.operands[0], a, variable);
      return {1.0 - x.value, -x.partial};
    }
    case Formula::Op::And: {
      auto l = forward(f.operands[0], a, variable);
      auto r = forward(f.operands[1], a, variable);
      return {l.value * r.value, l.partial * r.value + l.value * r.partial};
    }
    case Formula::Op::Or: {
      auto l = forward(f.operands[0], a, variable);
      auto r = forward(f.operands[1], a, variable);
      return {l.value + r.value - l.value * r.value, l.partial * (1.0 - r.value) + r.partial * (1.0 - l.value)};
    }
  }
  return {0.0, 0.0};
}

void count(const Formula& f, std::map<std::string, int, std::less<>>& out) {
  if (f.op == Formula::Op::Var) {
    ++out[f.name];
    return;
  }
  for (const auto& o : f.operands) count(o, out);
}

}  // namespace

Formula parse_formula(std::string_view text) { return Parser(tokenize(text)).parse(); }

std::string to_string(const Formula& f) {
  std::string out;
  render(f, out);
  return out;
}

double eval_formula(const Formula& f, const Assignment& assignment) { return forward(f, assignment, {}).value; }

double formula_partial(const Formula& f, const Assignment& assignment, std::string_view variable) {
  return forward(f, assignment, variable).partial;
}

std::map<std::string, int, std::less<>> variable_occurrences(const Formula& f) {
  std::map<std::string, int, std::less<>> out;
  count(f, out);
  return out;
}

std::set<std::string, std::less<>> formula_variables(const Formula& f) {
  std::set<std::string, std::less<>> out;
  for (const auto& [name, n] : variable_occurrences(f)) out.insert(name);
  return out;
}

}  // namespace spr
