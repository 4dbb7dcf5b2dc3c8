#include "ranging/timing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ranging {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxCondition = 1e10;

// Gauss-Jordan inverse with partial pivoting; only ever used for the tiny
// K x K code Gramian.
ComplexMatrix invert_small(ComplexMatrix a) {
    const std::size_t n = a.rows();
    ComplexMatrix inv = ComplexMatrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::abs(a(row, col)) > std::abs(a(pivot, col))) pivot = row;
        if (std::abs(a(pivot, col)) == 0.0)
            throw std::runtime_error("invert_small: singular matrix");
        if (pivot != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(pivot, j), a(col, j));
                std::swap(inv(pivot, j), inv(col, j));
            }
        const Complex d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            const Complex f = a(row, col);
            if (f == Complex(0.0, 0.0)) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(row, j) -= f * a(col, j);
                inv(row, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

void check_user(const DecoupledSignatures& sig, int user) {
    if (user < 0 || user >= sig.users())
        throw std::out_of_range("timing: user index out of range");
}

} // namespace

DecoupledSignatures decouple_signatures(const SubchannelObservation& obs,
                                        const DetectionResult& detection,
                                        const CodeBook& codebook, const RangingPlan& plan,
                                        int l_rx) {
    const int k = static_cast<int>(detection.detected.size());
    if (k < 1) throw std::invalid_argument("decouple: no detected codes");
    if (l_rx <= 0) l_rx = plan.l;
    if (l_rx > plan.q)
        throw std::invalid_argument("decouple: receiver window l_rx must not exceed q");
    const int m = obs.blocks();
    const int qv = obs.bin_count();
    if (qv != plan.q * plan.v)
        throw std::invalid_argument("decouple: observation does not match the plan");

    // C = [Gamma(w_1)c_1 ... Gamma(w_K)c_K].
    ComplexMatrix c(static_cast<std::size_t>(m), static_cast<std::size_t>(k));
    for (int u = 0; u < k; ++u) {
        const CodeEstimate& est = detection.detected[u];
        const ComplexVector& code = codebook.code(est.code_index);
        for (int blk = 0; blk < m; ++blk) {
            const double ang = blk * est.omega_hat * plan.n_t();
            c(blk, u) = Complex(std::cos(ang), std::sin(ang)) * code[blk];
        }
    }

    const ComplexMatrix gram = matmul(c.adjoint(), c);
    const EigenDecomposition ge = hermitian_eig(gram);
    const double lam_max = ge.eigenvalues.front();
    const double lam_min = ge.eigenvalues.back();
    if (!(lam_min > 0.0) || lam_max / lam_min > kMaxCondition) {
        // Name the closest pair of rotated codes.
        int worst_a = detection.detected[0].code_index;
        int worst_b = detection.detected[k > 1 ? 1 : 0].code_index;
        double worst = -1.0;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                const double corr = std::abs(gram(i, j)) /
                                    std::sqrt(gram(i, i).real() * gram(j, j).real());
                if (corr > worst) {
                    worst = corr;
                    worst_a = detection.detected[i].code_index;
                    worst_b = detection.detected[j].code_index;
                }
            }
        throw DecouplingError("decouple: code matrix is rank deficient, codes " +
                                  std::to_string(worst_a) + " and " + std::to_string(worst_b) +
                                  " are indistinguishable at the estimated CFOs",
                              worst_a, worst_b);
    }
    const ComplexMatrix gram_inv = invert_small(gram);

    DecoupledSignatures sig;
    sig.q = plan.q;
    sig.v = plan.v;
    sig.n = plan.n;
    sig.l_rx = l_rx;
    sig.bins = obs.bins;
    sig.code_indices.reserve(k);
    sig.omega_hats.reserve(k);
    for (const CodeEstimate& est : detection.detected) {
        sig.code_indices.push_back(est.code_index);
        sig.omega_hats.push_back(est.omega_hat);
    }
    sig.freq.assign(k, ComplexMatrix(static_cast<std::size_t>(plan.q),
                                     static_cast<std::size_t>(plan.v)));

    // Per-bin LS solve: S_hat(bin) = gram_inv * C^H * Y(bin).
    ComplexVector chy(static_cast<std::size_t>(k));
    for (int col = 0; col < qv; ++col) {
        for (int u = 0; u < k; ++u) {
            Complex acc = 0.0;
            for (int blk = 0; blk < m; ++blk) acc += std::conj(c(blk, u)) * obs.y(blk, col);
            chy[u] = acc;
        }
        const int q_idx = col / plan.v;
        const int nu = col % plan.v;
        for (int u = 0; u < k; ++u) {
            Complex acc = 0.0;
            for (int w = 0; w < k; ++w) acc += gram_inv(u, w) * chy[w];
            sig.freq[u](q_idx, nu) = acc;
        }
    }

    // Unnormalized Q-point inverse DFT across subbands for every (user, nu).
    const double root_q = std::sqrt(static_cast<double>(plan.q));
    sig.time.assign(k, ComplexMatrix(static_cast<std::size_t>(plan.v),
                                     static_cast<std::size_t>(plan.q)));
    ComplexVector column(static_cast<std::size_t>(plan.q));
    for (int u = 0; u < k; ++u)
        for (int nu = 0; nu < plan.v; ++nu) {
            for (int q_idx = 0; q_idx < plan.q; ++q_idx) column[q_idx] = sig.freq[u](q_idx, nu);
            const ComplexVector idft = dft(column, /*inverse=*/true);
            for (int l = 0; l < plan.q; ++l) sig.time[u](nu, l) = idft[l] * root_q;
        }
    return sig;
}

double lste_metric(const DecoupledSignatures& sig, int user, int theta) {
    check_user(sig, user);
    if (theta < 0) throw std::invalid_argument("lste_metric: theta must be >= 0");
    const ComplexMatrix& t = sig.time[user];
    double acc = 0.0;
    for (int l = theta; l < theta + sig.l_rx; ++l) {
        Complex inner = 0.0;
        for (int nu = 0; nu < sig.v; ++nu) {
            const double ang = kTwoPi * static_cast<double>(l) * nu / sig.n;
            inner += t(nu, l % sig.q) * Complex(std::cos(ang), std::sin(ang));
        }
        acc += std::norm(inner);
    }
    return acc;
}

TimingResult lste_estimate(const DecoupledSignatures& sig, int user, int theta_max) {
    check_user(sig, user);
    if (theta_max < 0) throw std::invalid_argument("lste_estimate: theta_max must be >= 0");
    TimingResult out;
    double best = -1.0;
    for (int theta = 0; theta <= theta_max; ++theta) {
        const double val = lste_metric(sig, user, theta);
        if (val > best) {
            best = val;
            out.theta_hat = theta;
        }
    }
    return out;
}

double rcte_energy_metric(const DecoupledSignatures& sig, int user, int beta) {
    check_user(sig, user);
    if (beta < 0 || beta >= sig.q)
        throw std::invalid_argument("rcte_energy_metric: beta outside [0, q)");
    const ComplexMatrix& t = sig.time[user];
    double acc = 0.0;
    for (int l = beta; l < beta + sig.l_rx; ++l)
        for (int nu = 0; nu < sig.v; ++nu) acc += std::norm(t(nu, l % sig.q));
    return acc;
}

double rcte_cross_metric(const DecoupledSignatures& sig, int user, int beta, int p) {
    check_user(sig, user);
    if (beta < 0 || beta >= sig.q)
        throw std::invalid_argument("rcte_cross_metric: beta outside [0, q)");
    if (p < 0) throw std::invalid_argument("rcte_cross_metric: p must be >= 0");
    const ComplexMatrix& t = sig.time[user];
    double acc = 0.0;
    for (int l = beta; l < beta + sig.l_rx; ++l)
        for (int nu = 0; nu + 1 < sig.v; ++nu)
            for (int d = 1; d < sig.v - nu; ++d) {
                const double ang =
                    -kTwoPi * d * (static_cast<double>(l) + static_cast<double>(p) * sig.q) /
                    sig.n;
                const Complex cross = t(nu, l % sig.q) * std::conj(t(nu + d, l % sig.q)) *
                                      Complex(std::cos(ang), std::sin(ang));
                acc += 2.0 * cross.real();
            }
    return acc;
}

TimingResult rcte_estimate(const DecoupledSignatures& sig, int user, int theta_max,
                           RcteMode mode) {
    check_user(sig, user);
    if (theta_max < 0) throw std::invalid_argument("rcte_estimate: theta_max must be >= 0");
    if (sig.v < 2)
        throw std::invalid_argument(
            "rcte_estimate: v == 1 leaves the integer part ambiguous (metric is q-periodic)");
    if (mode == RcteMode::closed_form_v2 && sig.v != 2)
        throw std::invalid_argument("rcte_estimate: closed form requires v == 2");

    const ComplexMatrix& t = sig.time[user];

    // Fractional part from the nu-summed energy profile.
    int beta_hat = 0;
    double best1 = -1.0;
    for (int beta = 0; beta < sig.q; ++beta) {
        const double acc = rcte_energy_metric(sig, user, beta);
        if (acc > best1) {
            best1 = acc;
            beta_hat = beta;
        }
    }

    // Integer part p in {0, ..., floor(theta_max/q)}, further limited so that
    // beta_hat + p*q stays inside [0, theta_max].
    const int p_count = theta_max / sig.q + 1;
    const int p_max = std::min(p_count - 1, (theta_max - beta_hat) / sig.q);

    int p_hat = 0;
    if (mode == RcteMode::generic) {
        double best2 = 0.0;
        bool first = true;
        for (int p = 0; p <= p_max; ++p) {
            const double val = rcte_cross_metric(sig, user, beta_hat, p);
            if (first || val > best2) {
                first = false;
                best2 = val;
                p_hat = p;
            }
        }
    } else {
        Complex acc = 0.0;
        for (int l = beta_hat; l < beta_hat + sig.l_rx; ++l) {
            const double ang = -kTwoPi * static_cast<double>(l) / sig.n;
            acc += t(0, l % sig.q) * std::conj(t(1, l % sig.q)) *
                   Complex(std::cos(ang), std::sin(ang));
        }
        const double phi = std::arg(acc);
        const long rounded = std::lround(static_cast<double>(sig.n) * phi / (kTwoPi * sig.q));
        p_hat = static_cast<int>(std::clamp<long>(rounded, 0, p_max));
    }

    TimingResult out;
    out.beta_hat = beta_hat;
    out.p_hat = p_hat;
    out.theta_hat = beta_hat + p_hat * sig.q;
    return out;
}

CirEstimate estimate_cir(const DecoupledSignatures& sig, int user, int theta_hat) {
    check_user(sig, user);
    if (theta_hat < 0) throw std::invalid_argument("estimate_cir: theta must be >= 0");
    CirEstimate out;
    out.taps.assign(static_cast<std::size_t>(sig.l_rx), Complex(0.0, 0.0));
    const double scale = 1.0 / (static_cast<double>(sig.q) * sig.v);
    for (int l = 0; l < sig.l_rx; ++l) {
        Complex acc = 0.0;
        for (int q_idx = 0; q_idx < sig.q; ++q_idx)
            for (int nu = 0; nu < sig.v; ++nu) {
                const int bin = sig.bins[static_cast<std::size_t>(q_idx) * sig.v + nu];
                const double ang = kTwoPi * static_cast<double>(l + theta_hat) * bin / sig.n;
                acc += Complex(std::cos(ang), std::sin(ang)) * sig.freq[user](q_idx, nu);
            }
        out.taps[l] = acc * scale;
    }
    return out;
}

double flm_metric(const SubchannelObservation& obs, const ComplexVector& code) {
    const int m = obs.blocks();
    if (static_cast<int>(code.size()) != m)
        throw std::invalid_argument("flm_metric: code length must equal the block count");
    double z = 0.0;
    for (int col = 0; col < obs.bin_count(); ++col) {
        Complex acc = 0.0;
        for (int blk = 0; blk < m; ++blk) acc += std::conj(code[blk]) * obs.y(blk, col);
        z += std::norm(acc);
    }
    return z / (static_cast<double>(m) * m);
}

std::vector<int> flm_detect(const SubchannelObservation& obs, const CodeBook& codebook,
                            double noise_var_est, double threshold_factor) {
    if (!(noise_var_est > 0.0))
        throw std::invalid_argument("flm_detect: noise variance estimate must be > 0");
    const double threshold =
        threshold_factor * obs.bin_count() * noise_var_est / obs.blocks();
    std::vector<int> active;
    for (int k = 1; k <= codebook.size(); ++k)
        if (flm_metric(obs, codebook.code(k)) > threshold) active.push_back(k);
    return active;
}

} // namespace ranging
