#include "dlqr/problems.hpp"

namespace dlqr::problems {

ProblemInstance example1() {
  Matrix A(2, 2);
  A << -0.97, 0.0, 3.88, 0.97;
  Matrix B(2, 1);
  B << 2.0, -1.0;
  Matrix Q(2, 2);
  Q << 2.0, 0.0, 0.0, 3.0;
  Matrix R(1, 1);
  R << 5.0;
  return ProblemInstance(A, B, Q, R);
}

ProblemInstance scalar_unit() {
  const Matrix one = Matrix::Ones(1, 1);
  return ProblemInstance(one, one, one, one);
}

}  // namespace dlqr::problems
