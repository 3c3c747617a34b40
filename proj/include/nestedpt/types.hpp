// SPDX-License-Identifier: Apache-2.0
//
// Common scalar, vector and matrix aliases plus the work counter shared by
// every matrix-vector product in the library.

#ifndef NESTEDPT_TYPES_HPP
#define NESTEDPT_TYPES_HPP

#include <atomic>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace nestedpt
{

using cplx = std::complex<double>;
using Index = Eigen::Index;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;

// Raised when user supplied parameters are inconsistent.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical kernel cannot complete (singular factor, quadrature
// budget exhausted, Krylov stagnation).
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Scalar multiply-adds performed by dense and compressed matvecs. Used as a
// machine independent cost measure in scaling studies.
namespace touches
{
inline std::atomic<std::uint64_t> &counter()
{
  static std::atomic<std::uint64_t> c{0};
  return c;
}
inline void add(std::uint64_t n) { counter().fetch_add(n, std::memory_order_relaxed); }
inline std::uint64_t get() { return counter().load(std::memory_order_relaxed); }
inline void reset() { counter().store(0, std::memory_order_relaxed); }
}  // namespace touches

}  // namespace nestedpt

#endif  // NESTEDPT_TYPES_HPP
