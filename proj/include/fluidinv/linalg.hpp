#pragma once
// Exact linear algebra over Q.

#include <vector>

#include "fluidinv/expr.hpp"

namespace fluidinv {

using QMatrix = std::vector<std::vector<Q>>;

// reduced row echelon form in place; returns pivot columns
std::vector<std::size_t> rref(QMatrix& m);
std::size_t rank(QMatrix m);
// basis of {x : m x = 0}, ncols given for empty matrices
std::vector<std::vector<Q>> nullspace(QMatrix m, std::size_t ncols);

}  // namespace fluidinv
