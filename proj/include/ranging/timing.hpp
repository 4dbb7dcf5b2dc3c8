#pragma once

#include <vector>

#include "ranging/airlink.hpp"
#include "ranging/numkit.hpp"
#include "ranging/subspace.hpp"

namespace ranging {

/// Thrown when the code matrix is too ill-conditioned to separate users.
class DecouplingError : public std::runtime_error {
public:
    DecouplingError(const std::string& what, int code_a, int code_b)
        : std::runtime_error(what), code_a_(code_a), code_b_(code_b) {}
    int code_a() const noexcept { return code_a_; }
    int code_b() const noexcept { return code_b_; }

private:
    int code_a_;
    int code_b_;
};

/// Per-user least-squares signature estimates. freq[u] holds the per-bin
/// values in (q, nu) column order; time[u](nu, l) is the unnormalized
/// Q-point inverse DFT of freq[u] across q, periodic in l with period q.
struct DecoupledSignatures {
    std::vector<int> code_indices;      // detected codes, user u maps here
    std::vector<double> omega_hats;     // the CFO estimates used in the solve
    std::vector<ComplexMatrix> freq;    // q x v each
    std::vector<ComplexMatrix> time;    // v x q each
    std::vector<int> bins;              // global bin index per (q, nu) column
    int q = 0;
    int v = 0;
    int n = 0;
    int l_rx = 0;

    int users() const { return static_cast<int>(code_indices.size()); }
};

struct TimingResult {
    int theta_hat = 0;
    int beta_hat = -1; // only set by the reduced-complexity estimator
    int p_hat = -1;
};

struct CirEstimate {
    ComplexVector taps;
};

enum class RcteMode {
    generic,        // exhaustive search of the integer part
    closed_form_v2, // phase-based closed form, requires v == 2
};

/// Per-bin LS solve S_hat = (C^H C)^{-1} C^H Y with
/// C = [Gamma(w_1)c_1 ... Gamma(w_K)c_K], plus the per-(user, nu) Q-point
/// inverse transforms. l_rx <= 0 selects the plan's channel length.
DecoupledSignatures decouple_signatures(const SubchannelObservation& obs,
                                        const DetectionResult& detection,
                                        const CodeBook& codebook, const RangingPlan& plan,
                                        int l_rx = 0);

/// Timing metric: sum over the length-l_rx window starting at theta of
/// |sum_nu s(nu, l mod q) exp(j*2*pi*l*nu/n)|^2, with the transform index
/// wrapped mod q and the exponent using the unwrapped l.
double lste_metric(const DecoupledSignatures& sig, int user, int theta);

/// Exhaustive metric search over {0, ..., theta_max}; ties break low.
TimingResult lste_estimate(const DecoupledSignatures& sig, int user, int theta_max);

/// Energy part of the decomposed metric: the nu-summed window energy at the
/// fractional offset beta.
double rcte_energy_metric(const DecoupledSignatures& sig, int user, int beta);

/// Cross-nu part of the decomposed metric at (beta, p); the full metric at
/// theta = beta + p*q equals the energy part plus this term.
double rcte_cross_metric(const DecoupledSignatures& sig, int user, int beta, int p);

/// Decoupled search: the fractional part from the nu-summed energy profile,
/// the integer part from the cross-nu term (or its v = 2 closed form);
/// theta_hat = beta_hat + p_hat * q with p in {0, ..., floor(theta_max/q)}.
TimingResult rcte_estimate(const DecoupledSignatures& sig, int user, int theta_max,
                           RcteMode mode);

/// CIR recovery h = (1/(q*v)) sum_nu F^H(nu) Phi^H(theta, nu) S(nu).
CirEstimate estimate_cir(const DecoupledSignatures& sig, int user, int theta_hat);

/// Energy detector statistic (1/m^2) sum_bins |c^H Y(bin)|^2; its noise-only
/// mean is q*v*sigma^2/m.
double flm_metric(const SubchannelObservation& obs, const ComplexVector& code);

/// Energy detector baseline: code k is active iff its statistic exceeds
/// threshold_factor times the noise-only mean.
std::vector<int> flm_detect(const SubchannelObservation& obs, const CodeBook& codebook,
                            double noise_var_est, double threshold_factor);

} // namespace ranging
