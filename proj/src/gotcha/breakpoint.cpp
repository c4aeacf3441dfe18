#include "gotcha/breakpoint.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

#include "got/error.hpp"

namespace gotcha {

using got::Error;
using got::ErrorCode;
using got::Value;

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Predicate parse() {
    Predicate pred;
    if (ident() != "exists") fail("expected 'exists'");
    expect('(');
    pred.type_name = ident();
    skip_space();
    if (peek() == ',') {
      ++pos_;
      pred.clauses.push_back(clause());
      for (;;) {
        skip_space();
        auto save = pos_;
        if (peek() == ')') break;
        if (ident() != "and") {
          pos_ = save;
          fail("expected 'and' or ')'");
        }
        pred.clauses.push_back(clause());
      }
    }
    expect(')');
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return pred;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::invalid_argument,
                "breakpoint '" + std::string(text_) + "': " + what + " at column " + std::to_string(pos_ + 1));
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string ident() {
    skip_space();
    auto start = pos_;
    auto is_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_rest = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    if (!is_start(peek())) fail("expected a name");
    while (pos_ < text_.size() && is_rest(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Clause clause() {
    Clause c;
    c.dim = ident();
    c.op = op();
    c.literal = literal();
    return c;
  }

  CompareOp op() {
    skip_space();
    auto rest = text_.substr(pos_);
    auto take = [&](std::string_view tok, CompareOp o) {
      if (rest.substr(0, tok.size()) != tok) return false;
      pos_ += tok.size();
      parsed_op_ = o;
      return true;
    };
    if (take("==", CompareOp::eq) || take("!=", CompareOp::ne) || take("<=", CompareOp::le) ||
        take(">=", CompareOp::ge) || take("<", CompareOp::lt) || take(">", CompareOp::gt)) {
      return parsed_op_;
    }
    fail("expected a comparison operator");
  }

  Value literal() {
    skip_space();
    char c = peek();
    if (c == '"' || c == '\'') return string_literal(c);
    if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return number();
    auto word = ident();
    if (word == "true" || word == "True") return true;
    if (word == "false" || word == "False") return false;
    fail("expected a literal, got '" + word + "'");
  }

  Value string_literal(char quote) {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != quote) {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        char e = text_[pos_++];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += c;
      }
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Value number() {
    auto start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    bool is_float = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' || c == 'e' || c == 'E') {
        is_float = true;
        ++pos_;
        if ((c == 'e' || c == 'E') && (peek() == '-' || peek() == '+')) ++pos_;
      } else {
        break;
      }
    }
    std::string tok(text_.substr(start, pos_ - start));
    if (tok.empty() || tok == "-" || tok == "+") fail("expected a number");
    if (!is_float) {
      std::int64_t v = 0;
      const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto [end, ec] = std::from_chars(first, tok.data() + tok.size(), v);
      if (ec != std::errc() || end != tok.data() + tok.size()) fail("bad integer '" + tok + "'");
      return v;
    }
    char* end = nullptr;
    double d = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) fail("bad number '" + tok + "'");
    return d;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  CompareOp parsed_op_ = CompareOp::eq;
};

template <typename T>
bool compare(const T& a, CompareOp op, const T& b) {
  switch (op) {
    case CompareOp::eq: return a == b;
    case CompareOp::ne: return a != b;
    case CompareOp::lt: return a < b;
    case CompareOp::le: return a <= b;
    case CompareOp::gt: return a > b;
    case CompareOp::ge: return a >= b;
  }
  return false;
}

bool is_number(const Value& v) { return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v); }

double as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

}  // namespace

Predicate parse_predicate(std::string_view text) { return Parser(text).parse(); }

bool clause_holds(const Clause& clause, const got::ObjectState& obj) {
  auto it = obj.dims.find(clause.dim);
  if (it == obj.dims.end()) return false;
  const Value& v = it->second;
  if (std::holds_alternative<std::int64_t>(v) && std::holds_alternative<std::int64_t>(clause.literal)) {
    return compare(std::get<std::int64_t>(v), clause.op, std::get<std::int64_t>(clause.literal));
  }
  if (is_number(v) && is_number(clause.literal)) return compare(as_double(v), clause.op, as_double(clause.literal));
  if (v.index() != clause.literal.index()) return false;
  if (const auto* s = std::get_if<std::string>(&v)) return compare(*s, clause.op, std::get<std::string>(clause.literal));
  return compare(std::get<bool>(v), clause.op, std::get<bool>(clause.literal));
}

bool evaluate(const Predicate& pred, const got::State& state) {
  const auto* objs = state.objects(pred.type_name);
  if (objs == nullptr) return false;
  for (const auto& [_, obj] : *objs) {
    bool all = true;
    for (const auto& c : pred.clauses) {
      if (!clause_holds(c, obj)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

}  // namespace gotcha
