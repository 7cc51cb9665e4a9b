#pragma once
// Representation-level helpers shared by the kernel sources.

#include <unordered_map>

#include "fluidinv/expr.hpp"

namespace fluidinv {

struct MonoHash {
  std::size_t operator()(const Mono& m) const;
};

std::string atom_key(AtomKind k, const std::string& name, const std::vector<int>& orders,
                     const std::vector<Expr>& args);
AtomP intern_atom(AtomKind k, const std::string& name, std::vector<int> orders,
                  std::vector<Expr> args);
FactorP intern_factor(Poly p);
bool factor_less(FactorP a, FactorP b);

AtomP sin_atom(const Expr& a);
AtomP cos_atom(const Expr& a);
AtomP exp_atom(const Expr& a);
AtomP pow_family(AtomP powatom);
// canonical factors of base^e where base is an atom or a prime base
std::vector<std::pair<AtomP, int>> pow_factors(const Expr& base, const Expr& e);

int mono_cmp(const Mono& a, const Mono& b);
int free_cmp(const Mono& a, const Mono& b);
void canon_units(Mono& m);
Mono mono_mul(const Mono& a, const Mono& b);
Mono mono_pow(const Mono& a, int n);
bool mono_has_kind(const Mono& m, AtomKind k);

Poly poly_from_map(std::unordered_map<Mono, Q, MonoHash>&& acc);
Poly poly_const(const Q& c);
Poly poly_atom(AtomP a, int e);
Poly poly_add(const Poly& a, const Poly& b, const Q& sb);
Poly poly_scale(const Poly& a, const Q& c);
Poly poly_mul_term(const Poly& a, const Mono& m, const Q& c);
Poly poly_mul(const Poly& a, const Poly& b);
Poly poly_pow(const Poly& a, int n);
bool poly_has_kind(const Poly& p, AtomKind k);
Poly trig_reduce(const Poly& p);
std::string poly_str(const Poly& p);
std::string coef_str(const Q& c);

// build a normal form from a numerator and a list of denominator factors
Expr make_expr(Poly num, std::vector<std::pair<FactorP, int>> den);
Expr poly_expr(Poly p);
Expr atom_expr(AtomP a, int e = 1);

}  // namespace fluidinv
