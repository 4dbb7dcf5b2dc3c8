#include "ranging/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

namespace ranging {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Philox4x32-10 block cipher. Counter words: (block lo/hi, stream lo/hi),
// key words: (seed lo/hi). One block yields 128 bits.
struct PhiloxBlock {
    std::uint32_t w[4];
};

PhiloxBlock philox4x32(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
    std::uint32_t c0 = static_cast<std::uint32_t>(block);
    std::uint32_t c1 = static_cast<std::uint32_t>(block >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(seed);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c0;
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c2;
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return PhiloxBlock{{c0, c1, c2, c3}};
}

std::uint64_t join64(std::uint32_t hi, std::uint32_t lo) {
    return (std::uint64_t{hi} << 32) | lo;
}

// 53-bit mantissa in [0, 1).
double u01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1p-53; }

// (0, 1]: safe as a log() argument.
double u01_open_zero(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
}

// Forward twiddles exp(-2*pi*i*k/n), k < n/2, cached per length. The cache
// is thread_local so concurrent trials never share mutable state.
const ComplexVector& twiddles(std::size_t n) {
    thread_local std::unordered_map<std::size_t, ComplexVector> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    ComplexVector w(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        w[k] = Complex(std::cos(ang), std::sin(ang));
    }
    return cache.emplace(n, std::move(w)).first->second;
}

} // namespace

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    ComplexMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const Complex aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

double frobenius_norm(const ComplexMatrix& a) {
    double acc = 0.0;
    for (const Complex& v : a.data()) acc += std::norm(v);
    return std::sqrt(acc);
}

ComplexVector dft(const ComplexVector& x, bool inverse) {
    const std::size_t n = x.size();
    if (!is_pow2(n))
        throw std::invalid_argument("dft: length " + std::to_string(n) +
                                    " is not a power of two");
    ComplexVector y = x;
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(y[i], y[j]);
    }
    const ComplexVector& tw = twiddles(std::max<std::size_t>(n, 2));
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            for (std::size_t k = 0; k < half; ++k) {
                Complex w = tw[k * step];
                if (inverse) w = std::conj(w);
                const Complex u = y[base + k];
                const Complex v = y[base + k + half] * w;
                y[base + k] = u + v;
                y[base + k + half] = u - v;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Complex& v : y) v *= scale;
    return y;
}

EigenDecomposition hermitian_eig(const ComplexMatrix& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("hermitian_eig: matrix is not square");
    const std::size_t n = a.rows();

    // Work on the symmetrized copy (A + A^H)/2.
    ComplexMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            h(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));

    ComplexMatrix v = ComplexMatrix::identity(n);
    const double target = 1e-12 * frobenius_norm(h);

    auto off_norm = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) acc += std::norm(h(i, j));
        return std::sqrt(acc);
    };

    constexpr int kMaxSweeps = 100;
    double off = off_norm();
    int sweep = 0;
    for (; sweep < kMaxSweeps && off > target; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const Complex b = h(p, q);
                const double ab = std::abs(b);
                if (ab == 0.0) continue;
                const Complex phase = b / ab;
                const double alpha = h(p, p).real();
                const double gamma = h(q, q).real();
                const double tau = (gamma - alpha) / (2.0 * ab);
                const double t = std::copysign(1.0, tau) / (std::abs(tau) + std::hypot(1.0, tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // Unitary plane rotation: U = diag(phase, 1) * [[c, s], [-s, c]]
                // restricted to rows/cols (p, q).
                const Complex upp = c * phase;
                const Complex upq = s * phase;
                const Complex uqp = -s;
                const Complex uqq = c;
                // Columns: H <- H U, V <- V U.
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex hp = h(i, p), hq = h(i, q);
                    h(i, p) = hp * upp + hq * uqp;
                    h(i, q) = hp * upq + hq * uqq;
                    const Complex vp = v(i, p), vq = v(i, q);
                    v(i, p) = vp * upp + vq * uqp;
                    v(i, q) = vp * upq + vq * uqq;
                }
                // Rows: H <- U^H H.
                for (std::size_t j = 0; j < n; ++j) {
                    const Complex hp = h(p, j), hq = h(q, j);
                    h(p, j) = std::conj(upp) * hp + std::conj(uqp) * hq;
                    h(q, j) = std::conj(upq) * hp + std::conj(uqq) * hq;
                }
                h(p, q) = 0.0;
                h(q, p) = 0.0;
            }
        }
        off = off_norm();
    }
    if (off > target)
        throw ConvergenceError("hermitian_eig: Jacobi sweeps did not converge, off-diagonal "
                               "residual " + std::to_string(off), off);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return h(i, i).real() > h(j, j).real();
    });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        out.eigenvalues[col] = h(src, src).real();
        // Phase convention: largest-magnitude component real positive.
        std::size_t imax = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = std::abs(v(i, src));
            if (m > best) {
                best = m;
                imax = i;
            }
        }
        Complex rot = 1.0;
        if (best > 0.0) rot = std::conj(v(imax, src)) / best;
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, col) = v(i, src) * rot;
    }
    return out;
}

ComplexVector sample_cgaussian(const SeededStream& stream, std::size_t n, double variance) {
    if (!(variance > 0.0))
        throw std::invalid_argument("sample_cgaussian: variance must be > 0");
    ComplexVector out(n);
    const double scale = std::sqrt(variance);
    for (std::size_t i = 0; i < n; ++i) {
        const PhiloxBlock blk = philox4x32(stream.seed, stream.stream, i);
        const double u1 = u01_open_zero(join64(blk.w[0], blk.w[1]));
        const double u2 = u01(join64(blk.w[2], blk.w[3]));
        // Box-Muller folded to unit total variance (1/2 per component), so
        // rescaling by sqrt(variance) is exact across variances.
        const double r = std::sqrt(-std::log(u1));
        const double ang = kTwoPi * u2;
        out[i] = scale * Complex(r * std::cos(ang), r * std::sin(ang));
    }
    return out;
}

std::vector<double> sample_uniform(const SeededStream& stream, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PhiloxBlock blk = philox4x32(stream.seed, stream.stream, i >> 1);
        const bool hi = (i & 1) != 0;
        out[i] = u01(join64(blk.w[hi ? 2 : 0], blk.w[hi ? 3 : 1]));
    }
    return out;
}

} // namespace ranging
