#include "fluidinv/linalg.hpp"

namespace fluidinv {

std::vector<std::size_t> rref(QMatrix& m) {
  std::vector<std::size_t> piv;
  if (m.empty()) return piv;
  std::size_t rows = m.size(), cols = m[0].size(), r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t p = r;
    while (p < rows && sgn(m[p][c]) == 0) ++p;
    if (p == rows) continue;
    std::swap(m[p], m[r]);
    Q inv = 1 / m[r][c];
    for (auto& x : m[r]) x *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || sgn(m[i][c]) == 0) continue;
      Q f = m[i][c];
      for (std::size_t j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    piv.push_back(c);
    ++r;
  }
  return piv;
}

std::size_t rank(QMatrix m) { return rref(m).size(); }

std::vector<std::vector<Q>> nullspace(QMatrix m, std::size_t ncols) {
  auto piv = rref(m);
  std::vector<bool> is_piv(ncols, false);
  for (auto c : piv) is_piv[c] = true;
  std::vector<std::vector<Q>> out;
  for (std::size_t f = 0; f < ncols; ++f) {
    if (is_piv[f]) continue;
    std::vector<Q> v(ncols, Q(0));
    v[f] = 1;
    for (std::size_t i = 0; i < piv.size(); ++i) v[piv[i]] = -m[i][f];
    out.push_back(v);
  }
  return out;
}

}  // namespace fluidinv
