#pragma once

#include <Eigen/Core>

#include "sept/types.hpp"

namespace sept {

// Ranking scores accumulate in double with strict left-to-right order, then
// round once to float. Independent reimplementations of the same loop produce
// the same bits, which is what makes rankings reproducible across runs,
// thread counts, and the exact/rerank code paths.
template <class A, class B>
double dot_accum(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const Eigen::Index n = a.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += static_cast<double>(a(i)) * static_cast<double>(b(i));
  }
  return acc;
}

template <class A, class B>
double l2_sqr_accum(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const Eigen::Index n = a.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(a(i)) - static_cast<double>(b(i));
    acc += d * d;
  }
  return acc;
}

// Higher-is-better score under the metric: cosine -> inner product,
// l2 -> negated squared distance.
template <class A, class B>
double metric_score(Metric m, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return m == Metric::cosine ? dot_accum(a, b) : -l2_sqr_accum(a, b);
}

// Four-lane unrolled squared distance. Still a fixed summation order (hence
// deterministic), but a different order than l2_sqr_accum, so results are not
// bit-compatible with it. Used where distances are consumed internally
// (k-means, coarse probing) and the ~4x shorter dependency chain matters.
template <class A, class B>
double l2_sqr_unrolled(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const Eigen::Index n = a.size();
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = static_cast<double>(a(i)) - static_cast<double>(b(i));
    const double d1 = static_cast<double>(a(i + 1)) - static_cast<double>(b(i + 1));
    const double d2 = static_cast<double>(a(i + 2)) - static_cast<double>(b(i + 2));
    const double d3 = static_cast<double>(a(i + 3)) - static_cast<double>(b(i + 3));
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
  }
  for (; i < n; ++i) {
    const double d = static_cast<double>(a(i)) - static_cast<double>(b(i));
    acc0 += d * d;
  }
  return (acc0 + acc1) + (acc2 + acc3);
}

}  // namespace sept
