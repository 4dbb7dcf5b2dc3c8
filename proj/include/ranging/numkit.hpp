#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ranging {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Dense row-major complex matrix. Just enough for the estimators in this
/// project; deliberately not a general linear-algebra type.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<Complex>& data() const { return data_; }
    std::vector<Complex>& data() { return data_; }

    ComplexMatrix adjoint() const;

    static ComplexMatrix identity(std::size_t n);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
double frobenius_norm(const ComplexMatrix& a);

/// Result of hermitian_eig. Eigenvalues sorted non-increasing, eigenvector
/// column m pairs with eigenvalues[m]. Each column has unit norm and its
/// largest-magnitude entry is made real positive so fixtures are stable.
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    ComplexMatrix eigenvectors;
};

/// Thrown when the Jacobi iteration does not reach its off-diagonal target
/// within the sweep cap. Carries the last off-diagonal Frobenius residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Handle for the counter-based generator: the pair (seed, stream) fully
/// determines the sample sequence, and draws are random-access (sample i
/// depends only on i), so disjoint streams are order-independent.
struct SeededStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// Unitary DFT (1/sqrt(N) both directions). Length must be a power of two.
ComplexVector dft(const ComplexVector& x, bool inverse = false);

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps. The
/// input is symmetrized as (A + A^H)/2 first; convergence when the
/// off-diagonal Frobenius norm drops below 1e-12 * ||A||_F, hard cap 100
/// sweeps.
EigenDecomposition hermitian_eig(const ComplexMatrix& a);

/// n i.i.d. circularly symmetric complex Gaussians with total variance
/// `variance` per entry (variance/2 per real component).
ComplexVector sample_cgaussian(const SeededStream& stream, std::size_t n, double variance);

/// n i.i.d. uniform doubles in [0, 1).
std::vector<double> sample_uniform(const SeededStream& stream, std::size_t n);

} // namespace ranging
