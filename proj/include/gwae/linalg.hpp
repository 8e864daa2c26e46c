#pragma once

#include <cstddef>
#include <vector>

namespace gwae {

// Symmetric eigendecomposition by cyclic Jacobi rotations.
// a is n*n row-major and is not modified. On return eigenvalues are ascending
// in w and eigenvectors are the COLUMNS of v (v[i*n+j] = component i of
// eigenvector j), with a = v * diag(w) * v^T.
void jacobi_eigen(const std::vector<double>& a, std::size_t n, std::vector<double>& w,
                  std::vector<double>& v);

// Convenience wrappers over flat row-major matrices.
std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                            std::size_t n, std::size_t k, std::size_t m);
std::vector<double> mat_transpose(const std::vector<double>& a, std::size_t r, std::size_t c);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

}  // namespace gwae
