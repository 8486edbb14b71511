#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>

#include "bulwark/errors.hpp"
#include "bulwark/ilp.hpp"

namespace bulwark {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest decimal form that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void append_terms(std::ostringstream& out, const IlpModel& model,
                  const std::vector<std::pair<int, double>>& terms) {
  bool first = true;
  for (const auto& [idx, coef] : terms) {
    double magnitude = std::abs(coef);
    if (first) {
      if (coef < 0) out << "- ";
      first = false;
    } else {
      out << (coef < 0 ? " - " : " + ");
    }
    out << fmt_double(magnitude) << ' ' << model.vars[static_cast<std::size_t>(idx)].name;
  }
  if (first) out << "0 zero";  // never produced by build_model; keeps the line parseable
}

}  // namespace

std::string export_lp(const IlpModel& model) {
  std::ostringstream out;
  out << (model.maximize ? "Maximize\n" : "Minimize\n");
  out << " obj: ";
  append_terms(out, model, model.objective);
  out << "\nSubject To\n";
  for (const auto& row : model.constraints) {
    bool has_lo = row.lo != -kInf;
    bool has_hi = row.hi != kInf;
    if (has_lo && has_hi && row.lo == row.hi) {
      out << ' ' << row.name << ": ";
      append_terms(out, model, row.terms);
      out << " = " << fmt_double(row.lo) << '\n';
    } else {
      if (has_lo) {
        out << ' ' << row.name << (has_hi ? "_lo" : "") << ": ";
        append_terms(out, model, row.terms);
        out << " >= " << fmt_double(row.lo) << '\n';
      }
      if (has_hi) {
        out << ' ' << row.name << (has_lo ? "_hi" : "") << ": ";
        append_terms(out, model, row.terms);
        out << " <= " << fmt_double(row.hi) << '\n';
      }
    }
  }
  out << "Binary\n";
  for (const auto& var : model.vars) out << ' ' << var.name << '\n';
  out << "End\n";
  return out.str();
}

namespace {

struct Token {
  enum Kind { Word, Number, Plus, Minus, Cmp, Colon } kind;
  std::string text;
  double number = 0.0;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\\') {  // comment to end of line
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '+') {
      tokens.push_back({Token::Plus, "+"});
      ++i;
    } else if (c == '-') {
      tokens.push_back({Token::Minus, "-"});
      ++i;
    } else if (c == ':') {
      tokens.push_back({Token::Colon, ":"});
      ++i;
    } else if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      ++i;
      if (i < text.size() && text[i] == '=') {
        op += '=';
        ++i;
      }
      tokens.push_back({Token::Cmp, op});
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = i;
      while (i < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
              text[i] == 'e' || text[i] == 'E' ||
              ((text[i] == '+' || text[i] == '-') &&
               (text[i - 1] == 'e' || text[i - 1] == 'E')))) {
        ++i;
      }
      Token t{Token::Number, text.substr(start, i - start)};
      t.number = std::strtod(t.text.c_str(), nullptr);
      tokens.push_back(std::move(t));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i;
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) ||
                                 text[i] == '_' || text[i] == '.')) {
        ++i;
      }
      tokens.push_back({Token::Word, text.substr(start, i - start)});
    } else {
      fail(Errc::ParseError, std::string("unexpected character '") + c + "' in LP text");
    }
  }
  return tokens;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Parser {
  std::vector<Token> tokens;
  std::size_t pos = 0;

  bool done() const { return pos >= tokens.size(); }
  const Token& peek() const {
    if (done()) fail(Errc::ParseError, "unexpected end of LP text");
    return tokens[pos];
  }
  Token next() {
    Token t = peek();
    ++pos;
    return t;
  }
  bool peek_word(const std::string& w) const {
    return !done() && tokens[pos].kind == Token::Word && lower(tokens[pos].text) == w;
  }

  // name resolution is deferred: expressions may mention vars before Binary
  std::vector<std::pair<std::string, double>> parse_expr() {
    std::vector<std::pair<std::string, double>> terms;
    bool expect_term = true;
    while (!done()) {
      const Token& t = peek();
      if (t.kind == Token::Cmp) break;
      if (t.kind == Token::Word && !expect_term) {
        // section keyword follows an expression (e.g. "Subject", "Binary")
        std::string w = lower(t.text);
        if (w == "subject" || w == "st" || w == "s.t." || w == "binary" || w == "bin" ||
            w == "end" || w == "general" || w == "bounds") {
          break;
        }
      }
      double sign = 1.0;
      while (!done() && (peek().kind == Token::Plus || peek().kind == Token::Minus)) {
        if (next().kind == Token::Minus) sign = -sign;
      }
      double coef = 1.0;
      if (!done() && peek().kind == Token::Number) coef = next().number;
      if (!done() && peek().kind == Token::Word) {
        // a row label like "name:" would have been consumed by the caller
        terms.push_back({next().text, sign * coef});
      } else {
        // bare constant in an expression is not produced by export_lp
        fail(Errc::ParseError, "expected a variable name in LP expression");
      }
      expect_term = false;
      if (done() || (peek().kind != Token::Plus && peek().kind != Token::Minus)) break;
    }
    return terms;
  }
};

}  // namespace

IlpModel parse_lp(const std::string& text) {
  Parser p{tokenize(text)};
  IlpModel model;

  if (p.done()) fail(Errc::ParseError, "empty LP text");
  std::string head = lower(p.next().text);
  if (head == "maximize" || head == "max" || head == "maximise") {
    model.maximize = true;
  } else if (head == "minimize" || head == "min" || head == "minimise") {
    model.maximize = false;
  } else {
    fail(Errc::ParseError, "LP text must start with Minimize or Maximize");
  }

  // objective: optional "obj:" label
  std::vector<std::pair<std::string, double>> objective_terms;
  if (p.peek().kind == Token::Word && p.pos + 1 < p.tokens.size() &&
      p.tokens[p.pos + 1].kind == Token::Colon) {
    p.next();
    p.next();
  }
  objective_terms = p.parse_expr();

  if (!(p.peek_word("subject") || p.peek_word("st") || p.peek_word("s.t."))) {
    fail(Errc::ParseError, "expected 'Subject To' section");
  }
  p.next();
  if (p.peek_word("to")) p.next();

  struct RawRow {
    std::string name;
    std::vector<std::pair<std::string, double>> terms;
    double lo, hi;
  };
  std::vector<RawRow> rows;
  int anon = 0;
  while (!p.done() && !p.peek_word("binary") && !p.peek_word("bin") && !p.peek_word("end")) {
    std::string name;
    if (p.peek().kind == Token::Word && p.pos + 1 < p.tokens.size() &&
        p.tokens[p.pos + 1].kind == Token::Colon) {
      name = p.next().text;
      p.next();
    } else {
      name = "row_" + std::to_string(++anon);
    }
    auto terms = p.parse_expr();
    Token cmp = p.next();
    if (cmp.kind != Token::Cmp) fail(Errc::ParseError, "expected <=, >= or = in row " + name);
    double sign = 1.0;
    while (p.peek().kind == Token::Plus || p.peek().kind == Token::Minus) {
      if (p.next().kind == Token::Minus) sign = -sign;
    }
    Token rhs = p.next();
    if (rhs.kind != Token::Number) fail(Errc::ParseError, "expected a number in row " + name);
    double value = sign * rhs.number;
    RawRow row{name, std::move(terms), -kInf, kInf};
    if (cmp.text == "<=" || cmp.text == "<") {
      row.hi = value;
    } else if (cmp.text == ">=" || cmp.text == ">") {
      row.lo = value;
    } else {
      row.lo = row.hi = value;
    }
    rows.push_back(std::move(row));
  }

  if (!(p.peek_word("binary") || p.peek_word("bin"))) {
    fail(Errc::ParseError, "expected 'Binary' section");
  }
  p.next();
  while (!p.done() && !p.peek_word("end")) {
    Token t = p.next();
    if (t.kind != Token::Word) fail(Errc::ParseError, "expected a variable name in Binary");
    BinaryVar var;
    var.name = t.text;
    // roles are recovered from the naming convention
    if (t.text.size() > 1 && t.text[0] == 'm') {
      var.role = VarRole::ManifestSelect;
      var.manifest = std::strtoll(t.text.c_str() + 1, nullptr, 10);
    } else if (t.text.size() > 1 && t.text[0] == 'f') {
      var.role = VarRole::GuardProtected;
      var.manifest = std::strtoll(t.text.c_str() + 1, nullptr, 10);
    } else if (t.text.rfind("e_", 0) == 0) {
      var.role = VarRole::ArcActive;
      const char* s = t.text.c_str() + 2;
      char* rest = nullptr;
      var.protector = std::strtoll(s, &rest, 10);
      if (rest && *rest == '_') var.manifest = std::strtoll(rest + 1, nullptr, 10);
    }
    model.vars.push_back(std::move(var));
  }

  auto resolve = [&](const std::vector<std::pair<std::string, double>>& named) {
    std::vector<std::pair<int, double>> terms;
    for (const auto& [name, coef] : named) {
      if (name == "zero" && coef == 0.0) continue;  // empty-expression placeholder
      int idx = model.var_index(name);
      if (idx < 0) fail(Errc::ParseError, "variable '" + name + "' is not declared Binary");
      terms.push_back({idx, coef});
    }
    return terms;
  };
  model.objective = resolve(objective_terms);
  for (auto& row : rows) {
    LinearConstraint c;
    c.name = row.name;
    c.terms = resolve(row.terms);
    c.lo = row.lo;
    c.hi = row.hi;
    model.constraints.push_back(std::move(c));
  }
  return model;
}

namespace {

// name-keyed, split, sorted view used for structural comparison
struct CanonicalRow {
  std::vector<std::pair<std::string, double>> terms;  // sorted by name
  double lo, hi;
  auto operator<=>(const CanonicalRow&) const = default;
};

std::vector<CanonicalRow> canonical_rows(const IlpModel& model) {
  std::vector<CanonicalRow> out;
  for (const auto& row : model.constraints) {
    std::vector<std::pair<std::string, double>> terms;
    std::map<std::string, double> merged;
    for (const auto& [idx, coef] : row.terms) {
      merged[model.vars[static_cast<std::size_t>(idx)].name] += coef;
    }
    for (const auto& [name, coef] : merged) {
      if (coef != 0.0) terms.push_back({name, coef});
    }
    bool has_lo = row.lo != -kInf;
    bool has_hi = row.hi != kInf;
    if (has_lo && has_hi && row.lo != row.hi) {
      out.push_back({terms, row.lo, kInf});
      out.push_back({terms, -kInf, row.hi});
    } else {
      out.push_back({std::move(terms), row.lo, row.hi});
    }
  }
  std::ranges::sort(out);
  return out;
}

}  // namespace

bool models_equivalent(const IlpModel& a, const IlpModel& b) {
  if (a.maximize != b.maximize) return false;

  std::set<std::string> names_a, names_b;
  for (const auto& v : a.vars) names_a.insert(v.name);
  for (const auto& v : b.vars) names_b.insert(v.name);
  if (names_a != names_b) return false;

  auto objective_map = [](const IlpModel& m) {
    std::map<std::string, double> obj;
    for (const auto& [idx, coef] : m.objective) {
      obj[m.vars[static_cast<std::size_t>(idx)].name] += coef;
    }
    std::erase_if(obj, [](const auto& kv) { return kv.second == 0.0; });
    return obj;
  };
  if (objective_map(a) != objective_map(b)) return false;
  return canonical_rows(a) == canonical_rows(b);
}

}  // namespace bulwark
