#include "paraseq/tensor.hpp"

#include <Eigen/Dense>

namespace paraseq::detail {

namespace {
template <class Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using Map = Eigen::Map<RowMat<Real>>;
template <class Real>
using CMap = Eigen::Map<const RowMat<Real>>;
}  // namespace

// C[m,n] = A[m,k] * B[k,n]
template <class Real>
void mm_nn(const Real* a, const Real* b, Real* c, int m, int k, int n, bool accumulate) {
  CMap<Real> A(a, m, k);
  CMap<Real> B(b, k, n);
  Map<Real> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

// C[M,N] = A^T * B with A stored [K,M], B stored [K,N]
template <class Real>
void mm_tn(const Real* a, const Real* b, Real* c, int m, int k, int n, bool accumulate) {
  CMap<Real> A(a, k, m);
  CMap<Real> B(b, k, n);
  Map<Real> C(c, m, n);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

// C[M,N] = A * B^T with A stored [M,K], B stored [N,K]
template <class Real>
void mm_nt(const Real* a, const Real* b, Real* c, int m, int k, int n, bool accumulate) {
  CMap<Real> A(a, m, k);
  CMap<Real> B(b, n, k);
  Map<Real> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

template void mm_nn<float>(const float*, const float*, float*, int, int, int, bool);
template void mm_nn<double>(const double*, const double*, double*, int, int, int, bool);
template void mm_tn<float>(const float*, const float*, float*, int, int, int, bool);
template void mm_tn<double>(const double*, const double*, double*, int, int, int, bool);
template void mm_nt<float>(const float*, const float*, float*, int, int, int, bool);
template void mm_nt<double>(const double*, const double*, double*, int, int, int, bool);

}  // namespace paraseq::detail
