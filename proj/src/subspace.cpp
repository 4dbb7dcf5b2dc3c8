#include "ranging/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ranging {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDenominatorFloor = 1e-12;
constexpr double kEigenvalueFloor = 1e-15;

} // namespace

std::vector<int> DetectionResult::detected_codes() const {
    std::vector<int> out;
    out.reserve(detected.size());
    for (const CodeEstimate& e : detected) out.push_back(e.code_index);
    return out;
}

CorrelationEstimate sample_correlation(const SubchannelObservation& obs) {
    const int m = obs.blocks();
    const int qv = obs.bin_count();
    if (qv < 1) throw std::invalid_argument("sample_correlation: observation has no snapshots");

    CorrelationEstimate out;
    out.snapshots = qv;
    out.r_hat = ComplexMatrix(static_cast<std::size_t>(m), static_cast<std::size_t>(m));

    // Upper triangle accumulated, then mirrored, so r_hat is Hermitian
    // bit-for-bit.
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            Complex acc = 0.0;
            for (int col = 0; col < qv; ++col) acc += obs.y(i, col) * std::conj(obs.y(j, col));
            acc /= static_cast<double>(qv);
            out.r_hat(i, j) = acc;
            if (i != j) out.r_hat(j, i) = std::conj(acc);
        }

    // Forward-backward average r_tilde = (r_hat + J r_hat^T J)/2; entry-wise
    // this is (r_hat(i,j) + r_hat(m-1-j, m-1-i))/2.
    out.r_tilde = ComplexMatrix(static_cast<std::size_t>(m), static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            out.r_tilde(i, j) = 0.5 * (out.r_hat(i, j) + out.r_hat(m - 1 - j, m - 1 - i));
    return out;
}

int mdl_order(const std::vector<double>& eigenvalues, int snapshots, int m) {
    if (static_cast<int>(eigenvalues.size()) != m)
        throw std::invalid_argument("mdl_order: need exactly m eigenvalues");
    if (snapshots < 1) throw std::invalid_argument("mdl_order: snapshots must be >= 1");
    for (int i = 0; i + 1 < m; ++i)
        if (eigenvalues[i] < eigenvalues[i + 1])
            throw std::invalid_argument("mdl_order: eigenvalues must be non-increasing");

    std::vector<double> lam(eigenvalues.begin(), eigenvalues.end());
    for (double& v : lam) v = std::max(v, kEigenvalueFloor);

    int best_k = 0;
    double best_f = 0.0;
    for (int k = 0; k <= m - 1; ++k) {
        const int tail = m - k;
        double log_sum = 0.0;
        double arith = 0.0;
        for (int i = k; i < m; ++i) {
            log_sum += std::log(lam[i]);
            arith += lam[i];
        }
        arith /= tail;
        const double log_rho = log_sum / tail - std::log(arith);
        const double f = 0.5 * k * (2 * m - k) * std::log(static_cast<double>(snapshots)) -
                         snapshots * tail * log_rho;
        if (k == 0 || f < best_f) { // ties keep the smaller k
            best_f = f;
            best_k = k;
        }
    }
    return best_k;
}

NoiseSubspace noise_subspace(const CorrelationEstimate& corr, int n_t) {
    const EigenDecomposition ed = hermitian_eig(corr.r_tilde);
    NoiseSubspace out;
    out.eigenvalues = ed.eigenvalues;
    out.eigenvectors = ed.eigenvectors;
    out.k_hat = mdl_order(ed.eigenvalues, corr.snapshots,
                          static_cast<int>(ed.eigenvalues.size()));
    out.n_t = n_t;
    return out;
}

double music_spectrum(const ComplexVector& code, const NoiseSubspace& noise, double omega) {
    const int m = noise.dimension();
    if (noise.k_hat >= m)
        throw std::invalid_argument("music_spectrum: no noise subspace (k_hat == m)");
    if (static_cast<int>(code.size()) != m)
        throw std::invalid_argument("music_spectrum: code length must equal m");

    // Denominator sum_{i>k_hat} |c^H Gamma^H(omega) s_i|^2 with
    // Gamma(omega) = diag{exp(j*blk*omega*n_t)}.
    double den = 0.0;
    for (int col = noise.k_hat; col < m; ++col) {
        Complex acc = 0.0;
        for (int blk = 0; blk < m; ++blk) {
            const double ang = -static_cast<double>(blk) * omega * noise.n_t;
            const Complex rot(std::cos(ang), std::sin(ang));
            acc += std::conj(code[blk]) * rot * noise.eigenvectors(blk, col);
        }
        den += std::norm(acc);
    }
    return 1.0 / std::max(den, kDenominatorFloor);
}

CfoEstimate estimate_cfo(const ComplexVector& code, const NoiseSubspace& noise,
                         const CfoSearch& search, int n) {
    if (search.eps_bound < 0.0 || search.eps_step <= 0.0)
        throw std::invalid_argument("estimate_cfo: bound must be >= 0 and step > 0");

    const int half = static_cast<int>(std::floor(search.eps_bound / search.eps_step + 0.5));
    const int points = 2 * half + 1;
    const double eps_to_omega = kTwoPi / n;

    std::vector<double> log_psi(points);
    int best = 0;
    for (int i = 0; i < points; ++i) {
        const double eps = (i - half) * search.eps_step;
        const double psi = music_spectrum(code, noise, eps * eps_to_omega);
        log_psi[i] = std::log(psi);
        if (log_psi[i] > log_psi[best]) best = i; // ties keep the smaller grid index
    }

    double eps_hat = (best - half) * search.eps_step;
    if (search.refine && best > 0 && best + 1 < points) {
        const double y0 = log_psi[best - 1];
        const double y1 = log_psi[best];
        const double y2 = log_psi[best + 1];
        const double curvature = y0 - 2.0 * y1 + y2;
        if (curvature < 0.0) {
            double delta = 0.5 * (y0 - y2) / curvature;
            delta = std::clamp(delta, -0.5, 0.5);
            eps_hat += delta * search.eps_step;
        }
    }
    eps_hat = std::clamp(eps_hat, -search.eps_bound, search.eps_bound);

    CfoEstimate out;
    out.omega_hat = eps_hat * eps_to_omega;
    out.peak = music_spectrum(code, noise, out.omega_hat);
    return out;
}

DetectionResult detect_codes(const SubchannelObservation& obs, const CodeBook& codebook,
                             const CfoSearch& search, const RangingPlan& plan) {
    if (codebook.size() != plan.m - 1)
        throw std::invalid_argument("detect_codes: codebook size must be m-1");

    const CorrelationEstimate corr = sample_correlation(obs);
    const NoiseSubspace noise = noise_subspace(corr, plan.n_t());

    DetectionResult out;
    out.k_hat = noise.k_hat;
    if (noise.k_hat == 0) return out;

    std::vector<CodeEstimate> all;
    all.reserve(static_cast<std::size_t>(codebook.size()));
    for (int k = 1; k <= codebook.size(); ++k) {
        const CfoEstimate est = estimate_cfo(codebook.code(k), noise, search, plan.n);
        CodeEstimate ce;
        ce.code_index = k;
        ce.omega_hat = est.omega_hat;
        ce.eps_hat = est.omega_hat * plan.n / kTwoPi;
        ce.peak = est.peak;
        all.push_back(ce);
    }

    // k_hat largest peaks; equal peaks resolve toward the smaller code index.
    std::stable_sort(all.begin(), all.end(),
                     [](const CodeEstimate& a, const CodeEstimate& b) { return a.peak > b.peak; });
    const int take = std::min<int>(noise.k_hat, static_cast<int>(all.size()));
    out.detected.assign(all.begin(), all.begin() + take);
    std::sort(out.detected.begin(), out.detected.end(),
              [](const CodeEstimate& a, const CodeEstimate& b) {
                  return a.code_index < b.code_index;
              });
    return out;
}

} // namespace ranging
