#include "fluidinv/parser.hpp"

#include <algorithm>
#include <cctype>

namespace fluidinv {

namespace {

const std::vector<std::pair<std::string, std::string>>& unicode_aliases() {
  static const std::vector<std::pair<std::string, std::string>> a = {
      {"ρ", "rho"},   {"ε", "eps"},   {"λ", "lam"},  {"ξ", "xi"},
      {"μ", "mu"},    {"η", "eta"},   {"ζ", "zeta"}, {"γ", "gamma"},
      {"χ", "chi"},   {"ς", "sig"},   {"τ", "tau"},  {"α", "alpha"},
      {"β", "beta"},  {"κ", "kappa"}, {"·", "*"},    {"−", "-"},
      {"₀", "0"},     {"₁", "1"},     {"₂", "2"},    {"₃", "3"},
      {"₄", "4"},     {"₅", "5"},     {"₆", "6"},    {"₇", "7"},
      {"₈", "8"},     {"₉", "9"},     {"²", "^2"},   {"³", "^3"},
  };
  return a;
}

std::string ascii_only(const std::string& s) {
  std::string r;
  for (std::size_t i = 0; i < s.size();) {
    bool hit = false;
    if (static_cast<unsigned char>(s[i]) >= 0x80) {
      for (auto& [u, a] : unicode_aliases()) {
        if (s.compare(i, u.size(), u) == 0) {
          r += a;
          i += u.size();
          hit = true;
          break;
        }
      }
    }
    if (!hit) r += s[i++];
  }
  return r;
}

enum class Tok { Num, Ident, Op, End };

struct Token {
  Tok kind;
  std::string text;
  Q num;
  int line, col;
};

std::vector<Token> lex(const std::string& raw) {
  std::string s = ascii_only(raw);
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto adv = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      adv(1);
      continue;
    }
    int l0 = line, c0 = col;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      std::string ip = s.substr(i, j - i), fp;
      if (j < s.size() && s[j] == '.') {
        std::size_t k = j + 1;
        while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
        fp = s.substr(j + 1, k - j - 1);
        j = k;
      }
      mpz_class n(ip + fp), d = 1;
      for (std::size_t k = 0; k < fp.size(); ++k) d *= 10;
      Q q(n, d);
      q.canonicalize();
      out.push_back({Tok::Num, s.substr(i, j - i), q, l0, c0});
      adv(j - i);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      if (j + 1 < s.size() && s[j] == '_' && std::isalpha(static_cast<unsigned char>(s[j + 1]))) {
        ++j;
        while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      }
      out.push_back({Tok::Ident, s.substr(i, j - i), Q(0), l0, c0});
      adv(j - i);
      continue;
    }
    if (std::string("+-*/^(),[]").find(c) != std::string::npos) {
      out.push_back({Tok::Op, std::string(1, c), Q(0), l0, c0});
      adv(1);
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", l0, c0);
  }
  out.push_back({Tok::End, "", Q(0), line, col});
  return out;
}

bool is_number_suffix(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const Alphabet& a) : t_(std::move(toks)), a_(a) {}

  Expr expr() {
    Expr r = term();
    while (peek_op("+") || peek_op("-")) {
      bool minus = next().text == "-";
      Expr rhs = term();
      r = minus ? r - rhs : r + rhs;
    }
    return r;
  }

  Expr term() {
    Expr r = factor();
    while (peek_op("*") || peek_op("/")) {
      if (field_mode_ && peek_op("*") && is_deriv(pos_ + 1)) break;
      bool div = next().text == "/";
      if (div) {
        for (auto& [b, e] : divisor()) {
          auto n = e.as_const();
          if (n && n->get_den() == 1 && sgn(*n) > 0 && *n < 64) {
            for (long k = n->get_num().get_si(); k > 0; --k) r = r / b;
          } else {
            r = r / pow(b, e);
          }
        }
        continue;
      }
      r = r * factor();
    }
    return r;
  }

  // A printed denominator (f1^k1*f2^k2) is divided out factor by factor so
  // that its factored form survives; anything else is a single factor.
  std::vector<std::pair<Expr, Expr>> divisor() {
    std::size_t save = pos_;
    if (peek_op("(")) {
      next();
      std::vector<std::pair<Expr, Expr>> fs;
      while (true) {
        if (peek_op("-") || peek_op("+")) break;
        fs.push_back(powered());
        if (peek_op("*")) {
          next();
          continue;
        }
        if (peek_op(")")) {
          next();
          if (!peek_op("^")) return fs;
        }
        break;
      }
      pos_ = save;
    }
    if (peek_op("-") || peek_op("+")) return {{factor(), Expr(1)}};
    return {powered()};
  }

  std::pair<Expr, Expr> powered() {
    Expr b = base();
    if (peek_op("^")) {
      next();
      return {b, factor()};
    }
    return {b, Expr(1)};
  }

  Expr factor() {
    if (peek_op("-")) {
      next();
      return -factor();
    }
    if (peek_op("+")) {
      next();
      return factor();
    }
    Expr b = base();
    if (peek_op("^")) {
      next();
      Expr e = factor();
      return pow(b, e);
    }
    return b;
  }

  Expr base() {
    const Token& tk = cur();
    if (tk.kind == Tok::Num) {
      next();
      return Expr(tk.num);
    }
    if (tk.kind == Tok::Op && tk.text == "(") {
      next();
      Expr e = expr();
      expect(")");
      return e;
    }
    if (tk.kind == Tok::Ident) {
      Token id = next();
      bool call = peek_op("(") || peek_op("[");
      if (call) return call_expr(id);
      return Expr::var(resolve(id));
    }
    throw ParseError(tk.kind == Tok::End ? "unexpected end of input" : "unexpected '" + tk.text + "'", tk.line,
                     tk.col);
  }

  // field := sign? fterm (('+'|'-') fterm)*
  FieldCoeffs field() {
    field_mode_ = true;
    FieldCoeffs out;
    bool first = true;
    while (true) {
      bool minus = false;
      if (peek_op("+") || peek_op("-")) {
        minus = next().text == "-";
      } else if (!first) {
        break;
      }
      first = false;
      Expr coeff(1);
      if (!is_deriv(pos_)) {
        coeff = term();
        if (!peek_op("*") || !is_deriv(pos_ + 1)) {
          const Token& tk = cur();
          throw ParseError("expected '*d/d<coordinate>'", tk.line, tk.col);
        }
        next();
      }
      std::string q = take_deriv();
      if (minus) coeff = -coeff;
      auto it = out.find(q);
      if (it == out.end())
        out.emplace(q, coeff);
      else
        it->second += coeff;
      if (cur().kind == Tok::End) break;
    }
    if (cur().kind != Tok::End) {
      const Token& tk = cur();
      throw ParseError("trailing input '" + tk.text + "'", tk.line, tk.col);
    }
    return out;
  }

  void finish() {
    if (cur().kind != Tok::End) {
      const Token& tk = cur();
      throw ParseError("trailing input '" + tk.text + "'", tk.line, tk.col);
    }
  }

 private:
  const Token& cur() const { return t_[pos_]; }
  Token next() { return t_[pos_++]; }
  bool peek_op(const char* s) const { return cur().kind == Tok::Op && cur().text == s; }
  void expect(const char* s) {
    if (!peek_op(s)) {
      const Token& tk = cur();
      throw ParseError(std::string("expected '") + s + "'", tk.line, tk.col);
    }
    next();
  }

  bool is_deriv(std::size_t p) const {
    return p + 2 < t_.size() && t_[p].kind == Tok::Ident && t_[p].text == "d" && t_[p + 1].kind == Tok::Op &&
           t_[p + 1].text == "/" && t_[p + 2].kind == Tok::Ident && t_[p + 2].text.size() > 1 &&
           t_[p + 2].text[0] == 'd';
  }

  std::string take_deriv() {
    next();
    next();
    Token q = next();
    Token stripped = q;
    stripped.text = q.text.substr(1);
    return resolve(stripped);
  }

  std::string resolve(const Token& id) {
    const std::string& n = id.text;
    auto us = n.find('_');
    std::string name = n;
    if (us != std::string::npos) name = n.substr(0, us) + "_" + normalize_index(n.substr(us + 1));
    if (a_.open) return name;
    if (a_.names.count(n)) return n;
    auto in = [](const std::vector<std::string>& v, const std::string& s) {
      return std::find(v.begin(), v.end(), s) != v.end();
    };
    if (us == std::string::npos) {
      if (in(a_.independents, n) || in(a_.dependents, n)) return n;
    } else {
      std::string b = n.substr(0, us), idx = n.substr(us + 1);
      bool ok = in(a_.dependents, b);
      for (char c : idx) ok = ok && in(a_.independents, std::string(1, c));
      if (ok && static_cast<int>(idx.size()) > a_.max_order)
        throw UnknownIdentifier("jet coordinate '" + n + "' exceeds order " + std::to_string(a_.max_order) +
                                " of the bundle");
      if (ok) return name;
    }
    throw UnknownIdentifier("unknown identifier '" + n + "' at " + std::to_string(id.line) + ":" +
                            std::to_string(id.col) + "; declared alphabet: " + a_.describe());
  }

  std::vector<Expr> args() {
    expect("(");
    std::vector<Expr> r{expr()};
    while (peek_op(",")) {
      next();
      r.push_back(expr());
    }
    expect(")");
    return r;
  }

  Expr call_expr(const Token& id) {
    const std::string& n = id.text;
    static const std::set<std::string> elem{"sin", "cos", "tan", "cot", "exp", "ln"};
    if (elem.count(n)) {
      auto a = args();
      if (a.size() != 1) throw ParseError(n + " takes one argument", id.line, id.col);
      if (n == "sin") return sin(a[0]);
      if (n == "cos") return cos(a[0]);
      if (n == "tan") return tan(a[0]);
      if (n == "cot") return cot(a[0]);
      if (n == "exp") return exp(a[0]);
      return ln(a[0]);
    }
    // one-argument symbols with an order suffix: F, F1, F2, ...
    for (auto& f : a_.functions) {
      if (n.compare(0, f.size(), f) == 0 && (n.size() == f.size() || is_number_suffix(n.substr(f.size())))) {
        if (peek_op("[")) break;
        int ord = n.size() == f.size() ? 0 : std::stoi(n.substr(f.size()));
        auto a = args();
        if (a.size() != 1) throw ParseError(n + " takes one argument", id.line, id.col);
        return fn(f, ord, a[0]);
      }
    }
    if (a_.multi.count(n) || a_.open) {
      std::vector<int> orders;
      if (peek_op("[")) {
        next();
        while (true) {
          const Token& tk = cur();
          if (tk.kind != Tok::Num || tk.num.get_den() != 1) throw ParseError("expected derivative order", tk.line, tk.col);
          orders.push_back(static_cast<int>(tk.num.get_num().get_si()));
          next();
          if (peek_op(",")) {
            next();
            continue;
          }
          break;
        }
        expect("]");
      }
      auto a = args();
      if (orders.empty()) orders.assign(a.size(), 0);
      if (orders.size() != a.size()) throw ParseError("derivative orders do not match arguments", id.line, id.col);
      if (a.size() == 1 && !a_.multi.count(n)) return fn(n, orders[0], a[0]);
      return fn(n, orders, a);
    }
    throw UnknownIdentifier("unknown function '" + n + "' at " + std::to_string(id.line) + ":" +
                            std::to_string(id.col) + "; declared alphabet: " + a_.describe());
  }

  std::vector<Token> t_;
  std::size_t pos_ = 0;
  const Alphabet& a_;
  bool field_mode_ = false;
};

}  // namespace

std::string Alphabet::describe() const {
  if (open) return "(open)";
  std::string s;
  auto add = [&](const std::string& x) {
    if (!s.empty()) s += ", ";
    s += x;
  };
  for (auto& x : independents) add(x);
  for (auto& x : dependents) add(x + (max_order > 0 ? " (jets to order " + std::to_string(max_order) + ")" : ""));
  for (auto& x : names) add(x);
  for (auto& x : functions) add(x + "(.)");
  for (auto& x : multi) add(x + "(..)");
  return s;
}

std::string normalize_index(const std::string& idx) {
  std::string r = idx;
  std::sort(r.begin(), r.end(), [](char a, char b) {
    if (a == b) return false;
    if (a == 't') return true;
    if (b == 't') return false;
    return a < b;
  });
  return r;
}

Expr parse_expr(const SourceText& src, const Alphabet& alpha) {
  Parser p(lex(src.text), alpha);
  Expr e = p.expr();
  p.finish();
  return e;
}

Expr parse_expr(const std::string& text, const Alphabet& alpha) { return parse_expr(SourceText{text}, alpha); }

std::string print_expr(const Expr& e) { return e.str(); }

FieldCoeffs parse_field(const SourceText& src, const Alphabet& alpha) {
  Parser p(lex(src.text), alpha);
  FieldCoeffs f = p.field();
  for (auto& [q, c] : f) {
    for (auto& v : variables(c)) {
      auto us = v.find('_');
      if (us == std::string::npos) continue;
      std::string b = v.substr(0, us);
      bool dep = alpha.open || std::find(alpha.dependents.begin(), alpha.dependents.end(), b) != alpha.dependents.end();
      if (dep) throw NotAPointField("coefficient of d/d" + q + " contains jet coordinate " + v);
    }
  }
  for (auto it = f.begin(); it != f.end();) {
    if (it->second.is_zero_form())
      it = f.erase(it);
    else
      ++it;
  }
  return f;
}

FieldCoeffs parse_field(const std::string& text, const Alphabet& alpha) { return parse_field(SourceText{text}, alpha); }

std::string print_field(const FieldCoeffs& f) {
  std::string s;
  for (auto& [q, c] : f) {
    std::string cs = c.str();
    std::string piece;
    bool neg = false;
    if (cs == "1") {
      piece = "d/d" + q;
    } else if (cs == "-1") {
      piece = "d/d" + q;
      neg = true;
    } else {
      bool simple = c.rf().num.terms.size() == 1 && c.rf().den.empty();
      if (simple && cs[0] == '-') {
        neg = true;
        cs = (-c).str();
      }
      piece = (simple ? cs : "(" + cs + ")") + "*d/d" + q;
    }
    if (s.empty())
      s = neg ? "-" + piece : piece;
    else
      s += (neg ? " - " : " + ") + piece;
  }
  return s.empty() ? "0" : s;
}

}  // namespace fluidinv
