#pragma once
/// Text grammar for expressions and point vector fields.
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | base ('^' factor)?
///   base   := number | ident | '(' expr ')' | func '(' args ')'
///
/// Identifiers with an underscore index (u_xt) are jet coordinates; the
/// index is stored sorted with t first. tan/cot are rewritten through sin/cos.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fluidinv/expr.hpp"

namespace fluidinv {

struct SourceText {
  std::string text;
  std::string origin = "<input>";
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " at " + std::to_string(line) + ":" + std::to_string(col)),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_, col_;
};

class UnknownIdentifier : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotAPointField : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Declared names. An open alphabet accepts every identifier.
struct Alphabet {
  bool open = false;
  std::set<std::string> names;         // parameters and plain symbols
  std::vector<std::string> independents;  // t first
  std::vector<std::string> dependents;
  int max_order = 2;
  std::set<std::string> functions{"F"};  // one-argument symbols F, F1, F2, ...
  std::set<std::string> multi{"E"};      // several arguments, E[i,j](a,b)

  static Alphabet any() {
    Alphabet a;
    a.open = true;
    return a;
  }
  std::string describe() const;
};

// jet index normalisation: letters sorted with t first
std::string normalize_index(const std::string& idx);

Expr parse_expr(const SourceText& src, const Alphabet& alpha = Alphabet::any());
Expr parse_expr(const std::string& text, const Alphabet& alpha = Alphabet::any());
std::string print_expr(const Expr& e);

// coefficient per coordinate name
using FieldCoeffs = std::map<std::string, Expr>;
FieldCoeffs parse_field(const SourceText& src, const Alphabet& alpha);
FieldCoeffs parse_field(const std::string& text, const Alphabet& alpha);
std::string print_field(const FieldCoeffs& f);

}  // namespace fluidinv
