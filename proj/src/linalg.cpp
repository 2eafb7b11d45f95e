#include "dlqr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dlqr/errors.hpp"

namespace dlqr::linalg {

Matrix make_matrix(int rows, int cols, std::span<const double> row_major) {
  if (rows < 0 || cols < 0 ||
      row_major.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("make_matrix: expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " entries, got " +
                         std::to_string(row_major.size()));
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = row_major[i * cols + j];
  }
  require_finite(m, "make_matrix");
  return m;
}

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite matrix entry");
  }
}

void require_square(const Matrix& m, std::string_view what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix is " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected square");
  }
}

SymMatrix::SymMatrix(const Matrix& m) {
  require_square(m, "SymMatrix");
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(int dim) {
  return SymMatrix(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::zero(int dim) { return SymMatrix(Matrix::Zero(dim, dim)); }

SymMatrix SymMatrix::checked(const Matrix& m, double tol) {
  require_square(m, "SymMatrix::checked");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw DomainError("SymMatrix::checked: matrix is not symmetric");
  }
  return SymMatrix(m);
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  return SymMatrix(m_ + o.m_);
}
SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  return SymMatrix(m_ - o.m_);
}
SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(m_ * s); }

double frobenius(const Matrix& m) { return m.norm(); }

namespace {

// Diagonal similarity by powers of two so row and column norms are
// comparable. Eigenvalues are unchanged exactly.
void balance(Matrix& a) {
  constexpr double kRadix = 2.0;
  constexpr double kSqrdx = kRadix * kRadix;
  const int n = static_cast<int>(a.rows());
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j != i) {
          c += std::abs(a(j, i));
          r += std::abs(a(i, j));
        }
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kSqrdx;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kSqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        a.row(i) *= g;
        a.col(i) *= f;
      }
    }
  }
}

void reduce_to_hessenberg(Matrix& a) {
  const int n = static_cast<int>(a.rows());
  for (int k = 0; k + 2 < n; ++k) {
    const int len = n - k - 1;
    Vector v = a.block(k + 1, k, len, 1);
    const double alpha = v.norm();
    if (alpha == 0.0) continue;
    v(0) += (v(0) >= 0.0 ? alpha : -alpha);
    const double vnorm = v.norm();
    if (vnorm == 0.0) continue;
    v /= vnorm;
    // H = I - 2 v v^T applied from both sides.
    Eigen::RowVectorXd w = v.transpose() * a.block(k + 1, k, len, n - k);
    a.block(k + 1, k, len, n - k).noalias() -= 2.0 * v * w;
    Vector u = a.block(0, k + 1, n, len) * v;
    a.block(0, k + 1, n, len).noalias() -= 2.0 * u * v.transpose();
    for (int i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

double sign_of(double magnitude, double reference) {
  return reference >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

// Francis double-shift QR on an upper Hessenberg matrix (EISPACK hqr).
std::vector<std::complex<double>> hessenberg_qr(Matrix& a) {
  const int n = static_cast<int>(a.rows());
  const double eps = std::numeric_limits<double>::epsilon();
  const int max_sweeps = 30 * n;
  std::vector<std::complex<double>> w(n);

  double anorm = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  }

  int nn = n - 1;
  int total_sweeps = 0;
  double t = 0.0;
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0, x = 0.0, y = 0.0, z = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l > 0; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= eps * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        w[nn--] = x + t;
      } else {
        y = a(nn - 1, nn - 1);
        double ww = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + ww;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            w[nn - 1] = w[nn] = x + z;
            if (z != 0.0) w[nn] = x - ww / z;
          } else {
            w[nn - 1] = {x + p, -z};
            w[nn] = std::conj(w[nn - 1]);
          }
          nn -= 2;
        } else {
          if (++total_sweeps > max_sweeps) {
            throw ConvergenceError(
                "eigenvalues: QR iteration did not converge within " +
                std::to_string(max_sweeps) + " sweeps");
          }
          if (its == 10 || its == 20) {
            // Exceptional shift.
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            ww = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - ww) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) +
                               std::abs(a(m + 1, m + 1)));
            if (u <= eps * v) break;
          }
          for (int i = m; i < nn - 1; ++i) {
            a(i + 2, i) = 0.0;
            if (i != m) a(i + 2, i - 1) = 0.0;
          }
          for (int k = m; k < nn; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k + 1 != nn) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k + 1 != nn) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k + 1 != nn) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l + 1 < nn);
  }
  return w;
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
  require_square(m, "eigenvalues");
  require_finite(m, "eigenvalues");
  if (m.rows() == 0) return {};
  Matrix a = m;
  balance(a);
  reduce_to_hessenberg(a);
  return hessenberg_qr(a);
}

double spectral_radius(const Matrix& m) {
  double rho = 0.0;
  for (const auto& lambda : eigenvalues(m)) rho = std::max(rho, std::abs(lambda));
  return rho;
}

std::vector<double> eigenvalues_sym(const SymMatrix& sym) {
  Matrix a = sym.dense();
  const int n = sym.dim();
  const double scale = a.norm();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off == 0.0 || std::sqrt(off) <= 1e-17 * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = a(i, i);
  std::sort(out.begin(), out.end());
  return out;
}

double min_eig_sym(const SymMatrix& m) {
  if (m.dim() == 0) return std::numeric_limits<double>::infinity();
  return eigenvalues_sym(m).front();
}

double max_eig_sym(const SymMatrix& m) {
  if (m.dim() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues_sym(m).back();
}

double default_pd_margin(const SymMatrix& m) {
  return 1e-9 * (1.0 + frobenius(m.dense()));
}

bool is_pd(const SymMatrix& m, double margin) {
  if (m.dim() == 0) return true;
  const Matrix shifted =
      m.dense() - margin * Matrix::Identity(m.dim(), m.dim());
  Eigen::LLT<Matrix> llt(shifted);
  return llt.info() == Eigen::Success;
}

Matrix solve_linear(const Matrix& m, const Matrix& rhs) {
  require_square(m, "solve_linear");
  if (rhs.rows() != m.rows()) {
    throw DimensionError("solve_linear: right-hand side has " +
                         std::to_string(rhs.rows()) + " rows, expected " +
                         std::to_string(m.rows()));
  }
  Eigen::PartialPivLU<Matrix> lu(m);
  const double threshold = 1e-13 * frobenius(m);
  const auto& packed = lu.matrixLU();
  for (int i = 0; i < packed.rows(); ++i) {
    if (!(std::abs(packed(i, i)) > threshold)) {
      throw SingularityError("solve_linear: numerically singular matrix");
    }
  }
  return lu.solve(rhs);
}

double condition_number(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix unvec(const Vector& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("unvec: length mismatch");
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace dlqr::linalg
