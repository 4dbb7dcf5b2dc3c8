#pragma once

#include <vector>

#include "ranging/numkit.hpp"

namespace ranging {

/// Dimensioning of the ranging slot: N subcarriers, R subchannels of Q
/// subbands with V adjacent bins each, M OFDM blocks, ranging CP length n_g,
/// data-phase CP length n_gd, maximum timing error theta_max and channel
/// length l. Default members are the reference configuration.
struct RangingPlan {
    int n = 1024;
    int q = 16;
    int r = 8;
    int v = 2;
    int m = 4;
    int n_g = 256;
    int n_gd = 64;
    int theta_max = 204;
    int l = 12;
    double channel_decay = 12.0;

    int n_t() const { return n + n_g; }
    int n_r() const { return q * v * r; }

    /// Throws std::invalid_argument when any dimensioning constraint fails.
    void validate() const;
};

/// Unit-modulus, pairwise orthogonal ranging codes c_1..c_{m-1}; the all-ones
/// sequence (k = 0) is reserved and excluded.
struct CodeBook {
    int m = 0;
    std::vector<ComplexVector> codes; // codes[k-1] holds c_k

    int size() const { return static_cast<int>(codes.size()); }
    const ComplexVector& code(int k) const;
};

/// Exponential power delay profile. sigma_h2 normalizes the expected total
/// tap energy to one.
struct ChannelProfile {
    int l = 12;
    double decay = 12.0;
    double sigma_h2 = 0.0;

    static ChannelProfile exponential(int l, double decay);
};

/// Ground truth for one ranging user.
struct UserTruth {
    int code_index = 1;      // in {1, ..., m-1}
    int theta = 0;           // timing offset, samples
    double epsilon = 0.0;    // CFO normalized to the subcarrier spacing
    ComplexVector taps;      // channel impulse response

    double omega(int n) const; // 2*pi*epsilon/n, radians per sample
};

/// DFT outputs restricted to one ranging subchannel: blocks() x bin_count()
/// matrix, columns ordered by increasing (q, nu) which is also increasing
/// global bin index.
struct SubchannelObservation {
    int subchannel = 0;
    ComplexMatrix y;        // m rows, q*v columns
    std::vector<int> bins;  // global subcarrier index per column

    int blocks() const { return static_cast<int>(y.rows()); }
    int bin_count() const { return static_cast<int>(y.cols()); }
    /// Per-bin view: the length-m vector of one column across blocks.
    ComplexVector bin_vector(int col) const;
};

/// Global subcarrier index q*N/Q + r*N/(Q*R) + nu.
int subcarrier_index(int q, int r, int nu, const RangingPlan& plan);

/// All q*v bin indices of subchannel r, in increasing (q, nu) order.
std::vector<int> subchannel_bins(const RangingPlan& plan, int r);

/// Fourier code set c_k(m) = exp(j*2*pi*k*(m-1)/M) for k = 1..M-1.
CodeBook fourier_codebook(int m);

/// Rayleigh taps with the profile's per-tap variances; expected total energy
/// is one.
ComplexVector draw_channel(const ChannelProfile& profile, const SeededStream& stream);

/// Frequency response sum_l h(l) exp(-j*2*pi*l*bin/n).
Complex channel_frequency_response(const ComplexVector& taps, int bin, int n);

/// Signature S_k(theta): entry (q, nu) is exp(-j*2*pi*theta*i/N) * H(i) at
/// i = i_{q,nu}, in column order.
ComplexVector ranging_signature(const UserTruth& user, const RangingPlan& plan, int r);

/// Time-domain uplink: per user, each block carries c_k(m) on the
/// subchannel's bins, is cyclically extended, delayed by theta, convolved
/// with the channel and rotated by the CFO ramp; user signals plus AWGN of
/// per-sample variance noise_var are summed. The ramp phase reference makes
/// sample n of block m (after CP removal) carry exp(j*omega*(m*n_t + n)).
ComplexVector synthesize_uplink(const std::vector<UserTruth>& users, const RangingPlan& plan,
                                int r, double noise_var, const SeededStream& noise_stream);

/// Per block: drop the CP, apply the unitary N-point DFT, keep the bins of
/// subchannel r.
SubchannelObservation receiver_frontend(const ComplexVector& samples, const RangingPlan& plan,
                                        int r);

enum class OracleMode {
    exact,  // per-user ICI matrix A(omega) applied to the signature
    approx, // A(omega) replaced by the identity
};

/// Noiseless frequency-domain model of the observation, evaluated directly
/// from the signatures; the exact mode agrees with the time-domain path
/// whenever only subchannel r is populated.
SubchannelObservation model_oracle(const std::vector<UserTruth>& users, const RangingPlan& plan,
                                   int r, OracleMode mode);

} // namespace ranging
