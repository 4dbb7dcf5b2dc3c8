#include "ranging/airlink.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace ranging {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(int x) { return x > 0 && (x & (x - 1)) == 0; }

void validate_users(const std::vector<UserTruth>& users, const RangingPlan& plan) {
    if (static_cast<int>(users.size()) > plan.m - 1)
        throw std::invalid_argument("uplink: more users than available codes (max m-1)");
    std::set<int> seen;
    for (const UserTruth& u : users) {
        if (u.code_index < 1 || u.code_index > plan.m - 1)
            throw std::invalid_argument("uplink: code index " + std::to_string(u.code_index) +
                                        " outside {1, ..., m-1}");
        if (!seen.insert(u.code_index).second)
            throw std::invalid_argument("uplink: duplicate code index " +
                                        std::to_string(u.code_index));
        if (u.theta < 0 || u.theta > plan.theta_max)
            throw std::invalid_argument("uplink: timing offset " + std::to_string(u.theta) +
                                        " outside [0, theta_max]");
        if (u.taps.empty())
            throw std::invalid_argument("uplink: user has no channel taps");
        if (u.theta + static_cast<int>(u.taps.size()) > plan.n_g)
            throw std::invalid_argument("uplink: theta + channel length exceeds the CP");
    }
}

// (1/N) * sum_{t=0}^{N-1} exp(j*t*phi), the normalized Dirichlet kernel.
Complex dirichlet_mean(double phi, int n) {
    const double s = std::sin(0.5 * phi);
    if (std::abs(s) < 1e-14) return Complex(1.0, 0.0);
    const double mag = std::sin(0.5 * n * phi) / (n * s);
    const double ang = 0.5 * (n - 1) * phi;
    return mag * Complex(std::cos(ang), std::sin(ang));
}

} // namespace

void RangingPlan::validate() const {
    if (n <= 0 || q <= 0 || r <= 0 || v <= 0 || m <= 0 || n_g <= 0 || n_gd <= 0 || l <= 0)
        throw std::invalid_argument("plan: all dimensions must be positive");
    if (theta_max < 0) throw std::invalid_argument("plan: theta_max must be >= 0");
    if (!is_pow2(n) || !is_pow2(q) || !is_pow2(m))
        throw std::invalid_argument("plan: n, q and m must be powers of two");
    if (n % (q * r) != 0)
        throw std::invalid_argument("plan: q*r must divide n");
    if (v > n / (q * r))
        throw std::invalid_argument("plan: v exceeds the subband spacing n/(q*r)");
    if (n_r() > n)
        throw std::invalid_argument("plan: q*v*r ranging bins exceed n");
    if (n_g < theta_max + l)
        throw std::invalid_argument("plan: ranging CP must satisfy n_g >= theta_max + l");
    if (channel_decay <= 0.0)
        throw std::invalid_argument("plan: channel_decay must be > 0");
}

const ComplexVector& CodeBook::code(int k) const {
    if (k < 1 || k > size())
        throw std::out_of_range("codebook: code index " + std::to_string(k) +
                                " outside {1, ..., " + std::to_string(size()) + "}");
    return codes[static_cast<std::size_t>(k - 1)];
}

ChannelProfile ChannelProfile::exponential(int l, double decay) {
    if (l <= 0 || decay <= 0.0)
        throw std::invalid_argument("channel profile: l and decay must be positive");
    double total = 0.0;
    for (int tap = 0; tap < l; ++tap) total += std::exp(-tap / decay);
    return ChannelProfile{l, decay, 1.0 / total};
}

double UserTruth::omega(int n) const { return kTwoPi * epsilon / n; }

ComplexVector SubchannelObservation::bin_vector(int col) const {
    if (col < 0 || col >= bin_count())
        throw std::out_of_range("observation: column out of range");
    ComplexVector out(static_cast<std::size_t>(blocks()));
    for (int blk = 0; blk < blocks(); ++blk) out[blk] = y(blk, col);
    return out;
}

int subcarrier_index(int q, int r, int nu, const RangingPlan& plan) {
    if (q < 0 || q >= plan.q) throw std::out_of_range("subcarrier_index: subband out of range");
    if (r < 0 || r >= plan.r) throw std::out_of_range("subcarrier_index: subchannel out of range");
    if (nu < 0 || nu >= plan.v) throw std::out_of_range("subcarrier_index: offset out of range");
    return q * (plan.n / plan.q) + r * (plan.n / (plan.q * plan.r)) + nu;
}

std::vector<int> subchannel_bins(const RangingPlan& plan, int r) {
    std::vector<int> bins;
    bins.reserve(static_cast<std::size_t>(plan.q) * plan.v);
    for (int q = 0; q < plan.q; ++q)
        for (int nu = 0; nu < plan.v; ++nu) bins.push_back(subcarrier_index(q, r, nu, plan));
    return bins;
}

CodeBook fourier_codebook(int m) {
    if (m < 2) throw std::invalid_argument("codebook: m must be >= 2");
    CodeBook book;
    book.m = m;
    book.codes.reserve(static_cast<std::size_t>(m - 1));
    for (int k = 1; k < m; ++k) {
        ComplexVector c(static_cast<std::size_t>(m));
        for (int blk = 0; blk < m; ++blk) {
            const double ang = kTwoPi * k * blk / m;
            c[blk] = Complex(std::cos(ang), std::sin(ang));
        }
        book.codes.push_back(std::move(c));
    }
    return book;
}

ComplexVector draw_channel(const ChannelProfile& profile, const SeededStream& stream) {
    ComplexVector taps = sample_cgaussian(stream, static_cast<std::size_t>(profile.l), 1.0);
    for (int tap = 0; tap < profile.l; ++tap)
        taps[tap] *= std::sqrt(profile.sigma_h2 * std::exp(-tap / profile.decay));
    return taps;
}

Complex channel_frequency_response(const ComplexVector& taps, int bin, int n) {
    if (bin < 0 || bin >= n)
        throw std::out_of_range("channel_frequency_response: bin outside [0, n)");
    Complex acc = 0.0;
    for (std::size_t tap = 0; tap < taps.size(); ++tap) {
        const double ang = -kTwoPi * static_cast<double>(tap) * bin / n;
        acc += taps[tap] * Complex(std::cos(ang), std::sin(ang));
    }
    return acc;
}

ComplexVector ranging_signature(const UserTruth& user, const RangingPlan& plan, int r) {
    const std::vector<int> bins = subchannel_bins(plan, r);
    ComplexVector sig(bins.size());
    for (std::size_t col = 0; col < bins.size(); ++col) {
        const double ang = -kTwoPi * static_cast<double>(user.theta) * bins[col] / plan.n;
        sig[col] = Complex(std::cos(ang), std::sin(ang)) *
                   channel_frequency_response(user.taps, bins[col], plan.n);
    }
    return sig;
}

ComplexVector synthesize_uplink(const std::vector<UserTruth>& users, const RangingPlan& plan,
                                int r, double noise_var, const SeededStream& noise_stream) {
    plan.validate();
    validate_users(users, plan);
    if (noise_var < 0.0) throw std::invalid_argument("uplink: noise variance must be >= 0");

    const int n = plan.n;
    const int n_t = plan.n_t();
    const int total = plan.m * n_t;
    const std::vector<int> bins = subchannel_bins(plan, r);
    const CodeBook book = fourier_codebook(plan.m);

    ComplexVector out(static_cast<std::size_t>(total), Complex(0.0, 0.0));
    ComplexVector tx(static_cast<std::size_t>(total));
    for (const UserTruth& user : users) {
        const ComplexVector& code = book.code(user.code_index);
        for (int blk = 0; blk < plan.m; ++blk) {
            ComplexVector freq(static_cast<std::size_t>(n), Complex(0.0, 0.0));
            for (int bin : bins) freq[bin] = code[blk];
            const ComplexVector time = dft(freq, /*inverse=*/true);
            Complex* dst = tx.data() + static_cast<std::size_t>(blk) * n_t;
            std::copy(time.end() - plan.n_g, time.end(), dst);          // cyclic prefix
            std::copy(time.begin(), time.end(), dst + plan.n_g);
        }
        // Delay, channel, CFO ramp referenced to the first post-CP sample.
        const double w = user.omega(n);
        const int span = static_cast<int>(user.taps.size());
        for (int t = 0; t < total; ++t) {
            Complex acc = 0.0;
            for (int tap = 0; tap < span; ++tap) {
                const int src = t - user.theta - tap;
                if (src >= 0) acc += user.taps[tap] * tx[src];
            }
            const double ang = w * (t - plan.n_g);
            out[t] += acc * Complex(std::cos(ang), std::sin(ang));
        }
    }
    if (noise_var > 0.0) {
        const ComplexVector noise =
            sample_cgaussian(noise_stream, static_cast<std::size_t>(total), noise_var);
        for (int t = 0; t < total; ++t) out[t] += noise[t];
    }
    return out;
}

SubchannelObservation receiver_frontend(const ComplexVector& samples, const RangingPlan& plan,
                                        int r) {
    plan.validate();
    const int n_t = plan.n_t();
    if (static_cast<int>(samples.size()) != plan.m * n_t)
        throw std::invalid_argument("frontend: expected " + std::to_string(plan.m * n_t) +
                                    " samples, got " + std::to_string(samples.size()));
    SubchannelObservation obs;
    obs.subchannel = r;
    obs.bins = subchannel_bins(plan, r);
    obs.y = ComplexMatrix(static_cast<std::size_t>(plan.m), obs.bins.size());
    ComplexVector window(static_cast<std::size_t>(plan.n));
    for (int blk = 0; blk < plan.m; ++blk) {
        const Complex* src = samples.data() + static_cast<std::size_t>(blk) * n_t + plan.n_g;
        std::copy(src, src + plan.n, window.begin());
        const ComplexVector spectrum = dft(window);
        for (std::size_t col = 0; col < obs.bins.size(); ++col)
            obs.y(blk, col) = spectrum[obs.bins[col]];
    }
    return obs;
}

SubchannelObservation model_oracle(const std::vector<UserTruth>& users, const RangingPlan& plan,
                                   int r, OracleMode mode) {
    plan.validate();
    validate_users(users, plan);
    const std::vector<int> bins = subchannel_bins(plan, r);
    const std::size_t qv = bins.size();
    const CodeBook book = fourier_codebook(plan.m);

    SubchannelObservation obs;
    obs.subchannel = r;
    obs.bins = bins;
    obs.y = ComplexMatrix(static_cast<std::size_t>(plan.m), qv);

    for (const UserTruth& user : users) {
        const ComplexVector sig = ranging_signature(user, plan, r);
        const double w = user.omega(plan.n);
        ComplexVector rotated(qv);
        if (mode == OracleMode::approx) {
            rotated = sig;
        } else {
            for (std::size_t a = 0; a < qv; ++a) {
                Complex acc = 0.0;
                for (std::size_t b = 0; b < qv; ++b) {
                    const double phi = w + kTwoPi * (bins[b] - bins[a]) / plan.n;
                    acc += dirichlet_mean(phi, plan.n) * sig[b];
                }
                rotated[a] = acc;
            }
        }
        const ComplexVector& code = book.code(user.code_index);
        for (int blk = 0; blk < plan.m; ++blk) {
            const double ang = blk * w * plan.n_t();
            const Complex block_phase = code[blk] * Complex(std::cos(ang), std::sin(ang));
            for (std::size_t col = 0; col < qv; ++col)
                obs.y(blk, col) += block_phase * rotated[col];
        }
    }
    return obs;
}

} // namespace ranging
