#pragma once

#include "oocnmf/matrix.hpp"

// Serial reference implementations of the hot kernels. They perform the
// exact same arithmetic per output element as the OpenMP versions in
// kernels.hpp (which parallelize over independent outputs only), so the two
// must agree bit-for-bit. Tests assert this; bench/ compares their speed.

namespace oocnmf::refk {

void matmul_acc(MatrixRef a, MatrixRef b, DenseMatrix& acc);
DenseMatrix matmul(MatrixRef a, const DenseMatrix& b);

void matmul_ta_acc(MatrixRef w, MatrixRef a, DenseMatrix& acc);
void gram_acc(MatrixRef a, DenseMatrix& acc);

void hadamard_update(DenseMatrix& target, const DenseMatrix& numer,
                     const DenseMatrix& denom, double epsilon);

DenseMatrix transpose(const DenseMatrix& a);

} // namespace oocnmf::refk
