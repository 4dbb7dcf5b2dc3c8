#pragma once

#include <vector>

#include "ranging/airlink.hpp"
#include "ranging/numkit.hpp"

namespace ranging {

/// Sample correlation of the per-bin block vectors plus its forward-backward
/// average. r_tilde is Hermitian and persymmetric by construction.
struct CorrelationEstimate {
    ComplexMatrix r_hat;
    ComplexMatrix r_tilde;
    int snapshots = 0;
};

/// Eigenstructure of the FB-averaged correlation with the model order chosen
/// by MDL. Eigenvector columns k_hat..m-1 span the noise subspace. n_t is
/// kept alongside because the block phase ramp exp(j*m*omega*n_t) needs it.
struct NoiseSubspace {
    int k_hat = 0;
    std::vector<double> eigenvalues;
    ComplexMatrix eigenvectors;
    int n_t = 0;

    int dimension() const { return static_cast<int>(eigenvalues.size()); }
};

/// Pseudospectrum search controls, in normalized-CFO units.
struct CfoSearch {
    double eps_bound = 0.075;
    double eps_step = 2e-4;
    bool refine = true;
};

struct CodeEstimate {
    int code_index = 0;
    double omega_hat = 0.0; // radians per sample
    double eps_hat = 0.0;   // normalized CFO
    double peak = 0.0;      // pseudospectrum value at omega_hat
};

/// Output of the code detector: estimated order and the detected codes with
/// their CFO estimates, sorted by code index.
struct DetectionResult {
    int k_hat = 0;
    std::vector<CodeEstimate> detected;

    std::vector<int> detected_codes() const;
};

CorrelationEstimate sample_correlation(const SubchannelObservation& obs);

/// MDL order estimate from non-increasing eigenvalues; K = 0 is legal.
int mdl_order(const std::vector<double>& eigenvalues, int snapshots, int m);

/// Eigendecomposition of r_tilde plus MDL on its eigenvalues.
NoiseSubspace noise_subspace(const CorrelationEstimate& corr, int n_t);

/// Pseudospectrum value 1 / sum_{m>k_hat} |c^H Gamma^H(omega) s_m|^2 with the
/// denominator floored at 1e-12.
double music_spectrum(const ComplexVector& code, const NoiseSubspace& noise, double omega);

struct CfoEstimate {
    double omega_hat = 0.0;
    double peak = 0.0;
};

/// Grid search of the pseudospectrum over [-eps_bound, eps_bound] with
/// optional parabolic refinement on the log-pseudospectrum. n maps the
/// normalized grid onto omega = 2*pi*eps/n.
CfoEstimate estimate_cfo(const ComplexVector& code, const NoiseSubspace& noise,
                         const CfoSearch& search, int n);

/// Full detector: correlation, FB averaging, MDL order, per-code CFO
/// estimates, then the k_hat codes with the largest pseudospectrum peaks.
DetectionResult detect_codes(const SubchannelObservation& obs, const CodeBook& codebook,
                             const CfoSearch& search, const RangingPlan& plan);

} // namespace ranging
