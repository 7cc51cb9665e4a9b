#pragma once
/// Exact expressions over the rationals.
///
/// An Expr is always stored in normal form: a Laurent polynomial in interned
/// atoms divided by a product of canonical polynomial factors. sin/cos are
/// reduced modulo sin^2+cos^2-1, exp atoms and powers with a common base are
/// merged inside every monomial.

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidinv {

using Q = mpq_class;

class Expr;
struct Atom;
struct Factor;
using AtomP = const Atom*;
using FactorP = const Factor*;

enum class AtomKind : std::uint8_t { Var, Sin, Cos, Exp, Ln, Pow, Fn, Base };

struct Mono {
  // sorted by atom order, free atoms before unit atoms, no zero exponents
  std::vector<std::pair<AtomP, int>> f;
  bool operator==(const Mono& o) const { return f == o.f; }
};

struct Term {
  Mono m;
  Q c;
};

struct Poly {
  std::vector<Term> terms;  // strictly decreasing monomial order
  bool zero() const { return terms.empty(); }
};

struct RatFun {
  Poly num;
  std::vector<std::pair<FactorP, int>> den;  // sorted by factor key
};

class Expr {
 public:
  Expr();
  Expr(long v);  // NOLINT
  Expr(const Q& v);  // NOLINT
  explicit Expr(std::shared_ptr<const RatFun> p) : p_(std::move(p)) {}

  static Expr var(const std::string& name);
  static Expr rational(long n, long d) { return Expr(Q(n, d)); }

  const RatFun& rf() const { return *p_; }
  bool is_zero_form() const { return p_->num.zero(); }
  bool is_const() const;
  std::optional<Q> as_const() const;
  bool is_polynomial() const { return p_->den.empty(); }
  // the variable atom if this Expr is exactly one variable
  AtomP as_var() const;

  Expr operator-() const;
  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(const Expr& o);
  Expr& operator/=(const Expr& o);

  // structural identity of normal forms
  bool same(const Expr& o) const;
  std::string str() const;

 private:
  std::shared_ptr<const RatFun> p_;
};

Expr operator+(Expr a, const Expr& b);
Expr operator-(Expr a, const Expr& b);
Expr operator*(Expr a, const Expr& b);
Expr operator/(Expr a, const Expr& b);

Expr pow(const Expr& b, long n);
Expr pow(const Expr& b, const Expr& e);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr tan(const Expr& a);
Expr cot(const Expr& a);
Expr exp(const Expr& a);
Expr ln(const Expr& a);
// n-th formal derivative of an undetermined one-argument function
Expr fn(const std::string& name, int order, const Expr& arg);
// undetermined function of several arguments with partial derivative orders
Expr fn(const std::string& name, const std::vector<int>& orders,
        const std::vector<Expr>& args);

struct Atom {
  AtomKind kind;
  std::string name;         // Var, Fn
  std::vector<int> orders;  // Fn
  std::vector<Expr> args;   // Sin/Cos/Exp/Ln: {a}; Pow: {base, exponent}; Fn
  std::string key;
  std::uint64_t prefix = 0;
  std::vector<AtomP> vars;  // variables this atom depends on, sorted
  bool unit() const { return kind == AtomKind::Exp || kind == AtomKind::Pow; }
  bool laurent() const { return kind != AtomKind::Sin && kind != AtomKind::Cos; }
};

struct Factor {
  Poly p;
  std::string key;
  std::uint64_t prefix = 0;
  bool lead_unique = false;  // leading free part carries a single term
};

bool atom_less(AtomP a, AtomP b);
AtomP var_atom(const std::string& name);

class UnsupportedForm : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class PoleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class Inconclusive : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Expr differentiate(const Expr& e, const std::string& v);
Expr differentiate(const Expr& e, AtomP v);
Expr normalize(const Expr& e);

// variable names occurring anywhere in e (including inside atoms)
std::set<std::string> variables(const Expr& e);
std::vector<AtomP> variable_atoms(const Expr& e);
bool depends_on(const Expr& e, AtomP v);

// simultaneous substitution of variables
Expr substitute(const Expr& e, const std::map<std::string, Expr>& s);
Expr substitute(const Expr& e, const std::map<AtomP, Expr>& s);
// replace every one-argument opaque function `name` of order n at a by image(n, a)
Expr substitute_function(const Expr& e, const std::string& name,
                         const std::function<Expr(int, const Expr&)>& image);

// numerator and denominator as separate polynomial Exprs
Expr numerator(const Expr& e);
Expr denominator(const Expr& e);

struct EvalPolicy {
  std::uint64_t seed = 1;
};

// Exact evaluation. Variables come from the assignment; transcendental atoms
// receive deterministic rational samples keyed by (atom, seed), except that
// sin/cos share tau (assignment key "tau:" + angle) and powers whose exponent
// evaluates to an integer are computed exactly.
Q eval_at(const Expr& e, const std::map<std::string, Q>& assignment,
          const EvalPolicy& pol = {});
double eval_double(const Expr& e, const std::map<std::string, double>& a);

// value and gradient with respect to a fixed list of seeds
struct Dual {
  Q v;
  std::vector<Q> g;
};
Dual eval_dual(const Expr& e, const std::map<std::string, Dual>& assignment,
               std::size_t nseeds, const EvalPolicy& pol = {});

enum class ZeroVerdict { Certified, Probable, Nonzero };
struct ZeroResult {
  ZeroVerdict verdict;
  std::map<std::string, Q> witness;  // only for Nonzero
  Q value;                           // value at the witness
};
struct ZeroOptions {
  int samples = 16;
  std::uint64_t seed = 12345;
  int budget = 400;
};
ZeroResult is_zero(const Expr& e, const ZeroOptions& opt = {});
inline bool certified_zero(const Expr& e) { return e.is_zero_form(); }

// a canonical rational sample in [-range, range] with small denominator
Q sample_rational(std::uint64_t h, int range = 9, int maxden = 8);
std::uint64_t hash_str(const std::string& s, std::uint64_t seed);

std::size_t term_count(const Expr& e);

}  // namespace fluidinv
