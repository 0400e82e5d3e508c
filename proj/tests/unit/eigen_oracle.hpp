#pragma once

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace oracle {

// Cyclic Jacobi rotations on the real symmetric 6x6 embedding [[Re, -Im], [Im, Re]]
// of a Hermitian 3x3 matrix. Each eigenvalue appears twice; returns one of each
// pair, ascending.
std::array<double, 3> hermitian_eigenvalues(const Eigen::Matrix3cd& h);

// Eigenvalues of a real symmetric matrix by cyclic Jacobi, ascending.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a);

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Nodes by Newton iteration on the Legendre recurrence.
const GaussLegendre& gauss_legendre(int n);

double integrate(const std::function<double(double)>& f, double a, double b, int n = 10000);

}  // namespace oracle
