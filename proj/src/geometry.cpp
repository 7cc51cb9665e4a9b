#include "fluidinv/geometry.hpp"

#include <functional>

namespace fluidinv {

namespace {

Expr V(const std::string& n) { return Expr::var(n); }

Matrix diag(const std::vector<Expr>& d) {
  Matrix m(d.size(), std::vector<Expr>(d.size(), Expr(0)));
  for (std::size_t i = 0; i < d.size(); ++i) m[i][i] = d[i];
  return m;
}

Expr partial(const Expr& e, const MetricChart& m, std::size_t i) {
  return differentiate(e, m.coords[i]);
}

}  // namespace

std::vector<std::string> chart_names() { return {"plane", "sphere", "layer", "space3"}; }

MetricChart chart(const std::string& name) {
  MetricChart m;
  m.name = name;
  if (name == "plane") {
    m.coords = {"x", "y"};
    m.g = diag({1, 1});
    m.gravity = {0, 0};
    m.sqrt_det = 1;
  } else if (name == "sphere") {
    m.coords = {"x", "y"};
    Expr sy = sin(V("y"));
    m.g = diag({sy * sy, 1});
    m.gravity = {0, 0};
    m.sqrt_det = sy;
  } else if (name == "layer") {
    m.coords = {"x", "y", "z"};
    Expr q = V("x") * V("x") + V("y") * V("y") + 1;
    Expr c = 4 * pow(q, -2);
    m.g = diag({c, c, 1});
    m.gravity = {0, 0, V("g")};
    m.sqrt_det = c;
  } else if (name == "space3") {
    m.coords = {"x", "y", "z"};
    m.g = diag({1, 1, 1});
    m.gravity = {0, 0, V("g")};
    m.sqrt_det = 1;
  } else {
    throw GeometryError("unknown chart '" + name + "'");
  }
  return m;
}

Expr determinant(const Matrix& a) {
  std::size_t n = a.size();
  if (n == 1) return a[0][0];
  if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  Expr d(0);
  for (std::size_t j = 0; j < n; ++j) {
    if (a[0][j].is_zero_form()) continue;
    Matrix minor;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<Expr> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != j) row.push_back(a[i][k]);
      minor.push_back(row);
    }
    Expr t = a[0][j] * determinant(minor);
    d += (j % 2 == 0) ? t : -t;
  }
  return d;
}

Matrix inverse(const Matrix& a) {
  std::size_t n = a.size();
  Expr det = determinant(a);
  if (det.is_zero_form()) throw GeometryError("matrix is not invertible");
  Matrix inv(n, std::vector<Expr>(n, Expr(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Expr cof;
      if (n == 1) {
        cof = 1;
      } else {
        Matrix minor;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == j) continue;
          std::vector<Expr> row;
          for (std::size_t c = 0; c < n; ++c)
            if (c != i) row.push_back(a[r][c]);
          minor.push_back(row);
        }
        cof = determinant(minor);
      }
      inv[i][j] = ((i + j) % 2 == 0 ? cof : -cof) / det;
    }
  return inv;
}

Christoffel christoffel(const MetricChart& m) {
  std::size_t n = m.dim();
  Matrix gi = inverse(m.g);
  Christoffel G(n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n, Expr(0))));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Expr s(0);
        for (std::size_t l = 0; l < n; ++l) {
          if (gi[k][l].is_zero_form()) continue;
          s += gi[k][l] * (partial(m.g[j][l], m, i) + partial(m.g[i][l], m, j) -
                           partial(m.g[i][j], m, l));
        }
        G[k][i][j] = s / 2;
      }
  return G;
}

std::vector<Expr> metricity_residuals(const MetricChart& m, const Christoffel& G) {
  std::size_t n = m.dim();
  std::vector<Expr> out;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Expr r = partial(m.g[i][j], m, k);
        for (std::size_t l = 0; l < n; ++l) r -= G[l][k][i] * m.g[l][j] + G[l][k][j] * m.g[i][l];
        out.push_back(r);
      }
  return out;
}

Expr inner(const SymTensor2& a, const SymTensor2& b, const Matrix& gi) {
  std::size_t n = a.size();
  Expr s(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        if (gi[i][k].is_zero_form()) continue;
        for (std::size_t l = 0; l < n; ++l) {
          if (gi[j][l].is_zero_form()) continue;
          s += a[i][j] * b[k][l] * gi[i][k] * gi[j][l];
        }
      }
  return s;
}

SymTensor2 rate_of_deformation(const std::vector<Expr>& u, const MetricChart& m,
                               const JetBundle& b) {
  std::size_t n = m.dim();
  if (u.size() != n) throw GeometryError("velocity has the wrong number of components");
  std::vector<std::vector<Expr>> du(n, std::vector<Expr>(n));  // du[i][k] = D_i u^k
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) du[i][k] = total_derivative(u[k], m.coords[i], b);
  SymTensor2 d(n, std::vector<Expr>(n, Expr(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      Expr s(0);
      for (std::size_t k = 0; k < n; ++k)
        s += u[k] * partial(m.g[i][j], m, k) + m.g[k][j] * du[i][k] + m.g[i][k] * du[j][k];
      d[i][j] = d[j][i] = s / 2;
    }
  return d;
}

SymTensor2 viscous_stress(const SymTensor2& d, const MetricChart& m, const Expr& eta,
                          const Expr& zeta) {
  std::size_t n = m.dim();
  Matrix gi = inverse(m.g);
  Expr tr = inner(d, m.g, gi);
  Expr gg = inner(m.g, m.g, gi);
  SymTensor2 s(n, std::vector<Expr>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s[i][j] = 2 * eta * (d[i][j] - tr / gg * m.g[i][j]) + zeta * tr * m.g[i][j];
  return s;
}

Expr dissipation(const SymTensor2& sigma, const SymTensor2& d, const MetricChart& m) {
  return inner(sigma, d, inverse(m.g));
}

Expr laplace_beltrami(const Expr& f, const MetricChart& m, const JetBundle& b) {
  std::size_t n = m.dim();
  Matrix gi = inverse(m.g);
  std::vector<Expr> df(n);
  for (std::size_t j = 0; j < n; ++j) df[j] = total_derivative(f, m.coords[j], b);
  Expr s(0);
  for (std::size_t i = 0; i < n; ++i) {
    Expr flux(0);
    for (std::size_t j = 0; j < n; ++j)
      if (!gi[i][j].is_zero_form()) flux += m.sqrt_det * gi[i][j] * df[j];
    s += total_derivative(flux, m.coords[i], b);
  }
  return s / m.sqrt_det;
}

std::vector<Expr> divergence_sym2(const SymTensor2& sigma, const MetricChart& m,
                                  const JetBundle& b) {
  std::size_t n = m.dim();
  Matrix gi = inverse(m.g);
  Christoffel G = christoffel(m);
  // nabla_k sigma_ij
  auto cov = [&](std::size_t k, std::size_t i, std::size_t j) {
    Expr r = total_derivative(sigma[i][j], m.coords[k], b);
    for (std::size_t l = 0; l < n; ++l) r -= G[l][k][i] * sigma[l][j] + G[l][k][j] * sigma[i][l];
    return r;
  };
  std::vector<Expr> low(n, Expr(0));  // g^{jk} nabla_k sigma_ij
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (!gi[j][k].is_zero_form()) low[i] += gi[j][k] * cov(k, i, j);
  std::vector<Expr> out(n, Expr(0));
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < n; ++i)
      if (!gi[l][i].is_zero_form()) out[l] += gi[l][i] * low[i];
  return out;
}

StateSurface generic_state() {
  StateSurface st;
  st.name = "generic";
  Expr rho = V("rho"), s = V("s");
  st.energy = fn("E", {0, 0}, {rho, s});
  st.pressure = rho * rho * fn("E", {1, 0}, {rho, s});
  st.temperature = fn("E", {0, 1}, {rho, s});
  return st;
}

StateSurface free_state() {
  StateSurface st;
  st.name = "free";
  st.pressure = V("p");
  st.temperature = V("T");
  st.free = true;
  return st;
}

std::vector<std::string> PDESystem::free_coordinates(int k) const {
  std::vector<std::string> out;
  for (auto& c : bundle.coordinates(k))
    if (!is_principal(c)) out.push_back(c);
  return out;
}

Expr PDESystem::reduce(const Expr& e) const {
  std::map<std::string, Expr> sub;
  for (auto& v : variables(e)) {
    int o = bundle.jet_order(v);
    if (o > bundle.order)
      throw GeometryError("on-shell reduction needs order " + std::to_string(o) + " but solved forms stop at " +
                          std::to_string(bundle.order) + " (" + v + ")");
    auto it = solved.find(v);
    if (it != solved.end()) sub.emplace(v, it->second);
  }
  return sub.empty() ? e : substitute(e, sub);
}

std::vector<Expr> PDESystem::residuals() const {
  std::vector<Expr> out;
  for (std::size_t a = 0; a < equations.size(); ++a) out.push_back(reduce(equations[a]));
  return out;
}

Expr state_pressure(const PDESystem& s) { return s.state.pressure; }
Expr state_temperature(const PDESystem& s) { return s.state.temperature; }

namespace {

Expr with_params(const Expr& e, const StateSurface& st) {
  if (st.params.empty()) return e;
  std::map<std::string, Expr> sub;
  for (auto& [k, v] : st.params) sub.emplace(k, Expr(v));
  return substitute(e, sub);
}

// the equation is linear in c; returns c - E / E_c
Expr solve_for(const Expr& eq, const std::string& c) {
  Expr coef = differentiate(eq, c);
  if (coef.is_zero_form()) throw GeometryError("equation does not contain " + c);
  if (!differentiate(coef, c).is_zero_form()) throw GeometryError("equation is not linear in " + c);
  return Expr::var(c) - eq / coef;
}

}  // namespace

PDESystem build_system(const MetricChart& m, const std::string& kind, const StateSurface& st0,
                       int order) {
  if (kind != "euler" && kind != "navier_stokes")
    throw GeometryError("unknown system kind '" + kind + "'");
  PDESystem S;
  S.chart = m;
  S.kind = kind;
  S.state = st0;
  const StateSurface& st = S.state;
  std::size_t n = m.dim();
  static const std::vector<std::string> vel = {"u", "v", "w"};
  S.bundle.indep = {"t"};
  for (auto& c : m.coords) S.bundle.indep.push_back(c);
  for (std::size_t i = 0; i < n; ++i) S.bundle.dep.push_back(vel[i]);
  if (st.free) {
    S.bundle.dep.push_back("p");
    S.bundle.dep.push_back("rho");
    S.bundle.dep.push_back("T");
    S.bundle.dep.push_back("s");
  } else {
    S.bundle.dep.push_back("rho");
    S.bundle.dep.push_back("s");
  }
  S.bundle.order = order;
  const JetBundle& B = S.bundle;
  bool ns = kind == "navier_stokes";

  Expr P = with_params(st.pressure, st), Th = with_params(st.temperature, st);
  if (Th.is_zero_form()) throw DegenerateState("temperature vanishes identically");
  for (auto& v : variables(P))
    if (B.jet_order(v) > 0) throw GeometryError("state depends on derivatives");
  for (auto& v : variables(Th))
    if (B.jet_order(v) > 0) throw GeometryError("state depends on derivatives");

  Expr rho = V("rho"), chi = V("chi");
  std::vector<Expr> u;
  for (std::size_t i = 0; i < n; ++i) u.push_back(V(vel[i]));
  Matrix gi = inverse(m.g);
  Christoffel G = christoffel(m);
  auto D = [&](const Expr& e, std::size_t i) { return total_derivative(e, m.coords[i], B); };
  auto Dt = [&](const Expr& e) { return total_derivative(e, "t", B); };

  std::vector<Expr> visc(n, Expr(0));
  Expr phi(0);
  if (ns) {
    SymTensor2 d = rate_of_deformation(u, m, B);
    SymTensor2 sp = viscous_stress(d, m, V("eta"), V("zeta"));
    visc = divergence_sym2(sp, m, B);
    phi = dissipation(sp, d, m);
  }

  // momentum
  for (std::size_t l = 0; l < n; ++l) {
    Expr e = Dt(u[l]);
    for (std::size_t j = 0; j < n; ++j) e += u[j] * D(u[l], j);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (!G[l][j][k].is_zero_form()) e += G[l][j][k] * u[j] * u[k];
    for (std::size_t j = 0; j < n; ++j)
      if (!gi[l][j].is_zero_form()) e += gi[l][j] * D(P, j) / rho;
    e -= m.gravity[l];
    if (ns) e -= visc[l] / rho;
    S.equations.push_back(e);
    std::string idx = ns ? std::string(2, m.coords[l][0]) : "t";
    S.principal.push_back(JetBundle::jet_name(vel[l], idx));
  }
  // continuity
  {
    Expr div(0);
    for (std::size_t j = 0; j < n; ++j) div += D(m.sqrt_det * u[j], j);
    Expr e = Dt(rho) + rho * div / m.sqrt_det;
    for (std::size_t j = 0; j < n; ++j) e += u[j] * D(rho, j);
    S.equations.push_back(e);
    S.principal.push_back("rho_t");
  }
  // heat
  {
    Expr sdot = Dt(V("s"));
    for (std::size_t j = 0; j < n; ++j) sdot += u[j] * D(V("s"), j);
    Expr lap = laplace_beltrami(Th, m, B);
    Expr e = ns ? rho * Th * sdot - phi + chi * lap : Th * sdot - chi / rho * lap;
    S.equations.push_back(e);
    std::string pick;
    std::string xx = std::string(2, m.coords[0][0]);
    for (auto& c : {JetBundle::jet_name("s", xx), JetBundle::jet_name("T", xx),
                    JetBundle::jet_name("rho", xx), std::string("s_t")}) {
      if (B.jet_order(c) < 0) continue;
      if (!differentiate(e, c).is_zero_form()) {
        pick = c;
        break;
      }
    }
    if (pick.empty()) throw DegenerateState("heat equation has no solvable principal term");
    S.principal.push_back(pick);
  }
  S.params = {"chi"};
  if (ns) {
    S.params.insert("eta");
    S.params.insert("zeta");
  }
  for (auto& gv : m.gravity)
    for (auto& v : variables(gv)) S.params.insert(v);
  auto add_params = [&](const Expr& e) {
    for (auto& v : variables(e))
      if (B.jet_order(v) < 0 && !B.is_indep(v)) S.params.insert(v);
  };
  add_params(P);
  add_params(Th);

  // solved forms and their prolongations up to the bundle order
  std::map<std::string, Expr> raw;
  for (std::size_t a = 0; a < S.equations.size(); ++a) {
    const std::string& c = S.principal[a];
    Expr rhs = solve_for(S.equations[a], c);
    std::string d, idx;
    B.split(c, d, idx);
    int base = static_cast<int>(idx.size());
    for (int extra = 0; base + extra <= order; ++extra)
      for (auto& J : B.multi_indices(extra)) {
        std::string name = JetBundle::jet_name(d, idx + J);
        if (raw.count(name)) continue;
        raw.emplace(name, extra == 0 ? rhs : total_derivative_multi(rhs, J, B));
      }
  }
  // resolve to a fixed point
  std::map<std::string, int> state;  // 1 = in progress, 2 = done
  std::function<const Expr&(const std::string&)> resolve = [&](const std::string& c) -> const Expr& {
    auto& r = raw.at(c);
    if (state[c] == 2) return r;
    if (state[c] == 1) throw GeometryError("cyclic solved forms through " + c);
    state[c] = 1;
    std::map<std::string, Expr> sub;
    for (auto& v : variables(r)) {
      if (B.jet_order(v) > order)
        throw GeometryError("solved form for " + c + " needs " + v + " beyond order " + std::to_string(order));
      if (raw.count(v)) sub.emplace(v, resolve(v));
    }
    if (!sub.empty()) r = substitute(r, sub);
    state[c] = 2;
    return r;
  };
  for (auto& [c, r] : raw) resolve(c);
  S.solved = std::move(raw);
  return S;
}

}  // namespace fluidinv
