#pragma once

/**
 * @file
 * @brief Dense matrix exponential by scaling and squaring.
 *
 * Higham's algorithm (SIAM J. Matrix Anal. Appl. 26(4), 2005): pick the
 * lowest diagonal Pade degree m in {3, 5, 7, 9, 13} whose backward-error
 * bound theta_m covers ||A||_1, otherwise scale by 2^-s to reach theta_13,
 * evaluate r_m = (V - U)^-1 (V + U) and square s times.
 */

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

#include "hympc/types.hpp"

namespace hympc {

namespace detail {

inline void pade3(const Matrix & A, Matrix & U, Matrix & V)
{
  static constexpr double b[] = {120.0, 60.0, 12.0, 1.0};
  const Matrix I = Matrix::Identity(A.rows(), A.cols());
  const Matrix A2 = A * A;
  U = A * (b[3] * A2 + b[1] * I);
  V = b[2] * A2 + b[0] * I;
}

inline void pade5(const Matrix & A, Matrix & U, Matrix & V)
{
  static constexpr double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  const Matrix I = Matrix::Identity(A.rows(), A.cols());
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  U = A * (b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[4] * A4 + b[2] * A2 + b[0] * I;
}

inline void pade7(const Matrix & A, Matrix & U, Matrix & V)
{
  static constexpr double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
  const Matrix I = Matrix::Identity(A.rows(), A.cols());
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  U = A * (b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

inline void pade9(const Matrix & A, Matrix & U, Matrix & V)
{
  static constexpr double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                 2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  const Matrix I = Matrix::Identity(A.rows(), A.cols());
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  const Matrix A8 = A6 * A2;
  U = A * (b[9] * A8 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[8] * A8 + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

inline void pade13(const Matrix & A, Matrix & U, Matrix & V)
{
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  const Matrix I = Matrix::Identity(A.rows(), A.cols());
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

}  // namespace detail

/**
 * @brief exp(A) for a square matrix.
 *
 * exp(0) is returned as the exact identity. Throws std::overflow_error when
 * the result has non-finite entries.
 */
inline Matrix expm(const Matrix & A)
{
  if (A.rows() != A.cols()) { throw std::invalid_argument("expm: matrix must be square"); }
  if (!A.allFinite()) { throw std::overflow_error("expm: non-finite input"); }
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();

  Matrix U, V;
  int squarings = 0;
  if (norm1 < 1.495585217958292e-2) {
    detail::pade3(A, U, V);
  } else if (norm1 < 2.539398330063230e-1) {
    detail::pade5(A, U, V);
  } else if (norm1 < 9.504178996162932e-1) {
    detail::pade7(A, U, V);
  } else if (norm1 < 2.097847961257068e0) {
    detail::pade9(A, U, V);
  } else {
    constexpr double theta13 = 5.371920351148152e0;
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    detail::pade13(A * std::ldexp(1.0, -squarings), U, V);
  }

  Matrix result = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) { result = result * result; }
  if (!result.allFinite()) { throw std::overflow_error("expm: result overflowed"); }
  return result;
}

}  // namespace hympc
