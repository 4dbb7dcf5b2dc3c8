#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "ranging/subspace.hpp"

using namespace ranging;
using helpers::observe;
using helpers::search_for;
using helpers::user_with_channel;

TEST_CASE("sample_correlation is persymmetric and Hermitian by construction") {
    RangingPlan plan;
    const auto users = std::vector<UserTruth>{user_with_channel(plan, 1, 50, 0.02, 1)};
    const SubchannelObservation obs = observe(users, plan, 0, 0.5, 100);
    const CorrelationEstimate corr = sample_correlation(obs);
    const int m = plan.m;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            // J R^T J == R, exactly.
            CHECK(corr.r_tilde(i, j) == corr.r_tilde(m - 1 - j, m - 1 - i));
            CHECK(corr.r_tilde(i, j) == std::conj(corr.r_tilde(j, i)));
            CHECK(corr.r_hat(i, j) == std::conj(corr.r_hat(j, i)));
        }
    CHECK(corr.snapshots == plan.q * plan.v);
}

TEST_CASE("sample_correlation of a single noiseless zero-CFO user has rank one") {
    RangingPlan plan;
    const auto users = std::vector<UserTruth>{user_with_channel(plan, 2, 120, 0.0, 2)};
    const SubchannelObservation obs = observe(users, plan, 0, 0.0, 0);
    const CorrelationEstimate corr = sample_correlation(obs);
    const EigenDecomposition ed = hermitian_eig(corr.r_tilde);
    CHECK(ed.eigenvalues[0] > 0.0);
    for (int i = 1; i < plan.m; ++i)
        CHECK(std::abs(ed.eigenvalues[i]) < 1e-10 * ed.eigenvalues[0]);
}

TEST_CASE("noise-only correlation converges to the identity") {
    RangingPlan plan;
    const int trials = 400; // q*v*trials = 12800 snapshots
    ComplexMatrix avg(4, 4);
    for (int t = 0; t < trials; ++t) {
        const SubchannelObservation obs =
            observe({}, plan, 0, 1.0, static_cast<std::uint64_t>(t));
        const CorrelationEstimate corr = sample_correlation(obs);
        for (std::size_t i = 0; i < 16; ++i) avg.data()[i] += corr.r_tilde.data()[i];
    }
    for (auto& v : avg.data()) v /= static_cast<double>(trials);
    const EigenDecomposition ed = hermitian_eig(avg);
    for (double lam : ed.eigenvalues) CHECK(lam == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("sample_correlation rejects an empty observation") {
    SubchannelObservation obs;
    obs.y = ComplexMatrix(4, 0);
    CHECK_THROWS_AS(sample_correlation(obs), std::invalid_argument);
}

TEST_CASE("mdl_order hand-checked cases") {
    CHECK(mdl_order({2.0, 2.0, 2.0, 2.0}, 32, 4) == 0);
    CHECK(mdl_order({100.0, 1.0, 1.0, 1.0}, 32, 4) == 1);
    CHECK(mdl_order({100.0, 80.0, 1.0, 1.0}, 32, 4) == 2);
    CHECK_THROWS_AS(mdl_order({1.0, 2.0, 3.0, 4.0}, 32, 4), std::invalid_argument);
    CHECK_THROWS_AS(mdl_order({1.0, 0.5}, 32, 4), std::invalid_argument);
}

TEST_CASE("mdl_order ignores uniform scaling") {
    const std::vector<double> base = {40.0, 25.0, 0.2, 0.15};
    for (double scale : {1.0, 10.0, 1000.0})
        CHECK(mdl_order({base[0] * scale, base[1] * scale, base[2] * scale, base[3] * scale}, 32,
                        4) == 2);
}

TEST_CASE("music_spectrum pins the true frequency of a noiseless user") {
    RangingPlan plan;
    const double eps = 0.03;
    const auto users = std::vector<UserTruth>{user_with_channel(plan, 1, 60, eps, 3)};
    const SubchannelObservation obs = observe(users, plan, 0, 0.0, 0);
    const NoiseSubspace noise = noise_subspace(sample_correlation(obs), plan.n_t());
    CHECK(noise.k_hat == 1);

    const CodeBook book = fourier_codebook(plan.m);
    const double omega = 2.0 * std::numbers::pi * eps / plan.n;
    // Signal direction orthogonal to the noise eigenvectors: denominator at
    // the floor, peak at the cap.
    CHECK(music_spectrum(book.code(1), noise, omega) == doctest::Approx(1e12));

    // An inactive orthogonal code stays deep in the noise span.
    const double inactive = music_spectrum(book.code(2), noise, omega);
    CHECK(inactive < 1.0);
    CHECK(inactive > 0.0);
}

TEST_CASE("music_spectrum is periodic in omega with period 2*pi/n_t") {
    RangingPlan plan;
    const auto users = std::vector<UserTruth>{user_with_channel(plan, 2, 10, 0.01, 4)};
    const SubchannelObservation obs = observe(users, plan, 0, 0.1, 7);
    const NoiseSubspace noise = noise_subspace(sample_correlation(obs), plan.n_t());
    const CodeBook book = fourier_codebook(plan.m);
    const double period = 2.0 * std::numbers::pi / plan.n_t();
    for (double omega : {0.0, 1.7e-4, -2.5e-4}) {
        const double a = music_spectrum(book.code(1), noise, omega);
        const double b = music_spectrum(book.code(1), noise, omega + period);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("music_spectrum is invariant to a global code phase") {
    RangingPlan plan;
    const auto users = std::vector<UserTruth>{user_with_channel(plan, 1, 10, 0.02, 5)};
    const SubchannelObservation obs = observe(users, plan, 0, 0.2, 9);
    const NoiseSubspace noise = noise_subspace(sample_correlation(obs), plan.n_t());
    const CodeBook book = fourier_codebook(plan.m);
    ComplexVector rotated = book.code(1);
    for (Complex& v : rotated) v *= std::polar(1.0, 1.234);
    for (double omega : {0.0, 3e-4}) {
        CHECK(music_spectrum(book.code(1), noise, omega) ==
              doctest::Approx(music_spectrum(rotated, noise, omega)).epsilon(1e-9));
    }
}

TEST_CASE("music_spectrum requires a noise subspace") {
    NoiseSubspace noise;
    noise.k_hat = 4;
    noise.eigenvalues = {4.0, 3.0, 2.0, 1.0};
    noise.eigenvectors = ComplexMatrix::identity(4);
    noise.n_t = 1280;
    CHECK_THROWS_AS(music_spectrum(fourier_codebook(4).code(1), noise, 0.0),
                    std::invalid_argument);
}

TEST_CASE("estimate_cfo recovers noiseless offsets within 1e-3") {
    RangingPlan plan;
    const CodeBook book = fourier_codebook(plan.m);

    SUBCASE("single user at 0.03") {
        const auto users = std::vector<UserTruth>{user_with_channel(plan, 1, 37, 0.03, 6)};
        const SubchannelObservation obs = observe(users, plan, 0, 0.0, 0);
        const NoiseSubspace noise = noise_subspace(sample_correlation(obs), plan.n_t());
        const CfoEstimate est = estimate_cfo(book.code(1), noise, search_for(0.05), plan.n);
        const double eps_hat = est.omega_hat * plan.n / (2.0 * std::numbers::pi);
        CHECK(std::abs(eps_hat - 0.03) < 1e-3);
    }

    SUBCASE("exact zero stays at zero") {
        const auto users = std::vector<UserTruth>{user_with_channel(plan, 2, 5, 0.0, 7)};
        const SubchannelObservation obs = observe(users, plan, 0, 0.0, 0);
        const NoiseSubspace noise = noise_subspace(sample_correlation(obs), plan.n_t());
        const CfoEstimate est = estimate_cfo(book.code(2), noise, search_for(0.05), plan.n);
        CHECK(std::abs(est.omega_hat) < 1e-12);
    }

    SUBCASE("three users, distinct offsets") {
        const std::vector<UserTruth> users = {user_with_channel(plan, 1, 10, -0.04, 8),
                                              user_with_channel(plan, 2, 80, 0.01, 9),
                                              user_with_channel(plan, 3, 160, 0.05, 10)};
        const SubchannelObservation obs = observe(users, plan, 0, 0.0, 0);
        const NoiseSubspace noise = noise_subspace(sample_correlation(obs), plan.n_t());
        CHECK(noise.k_hat == 3);
        const double expected[3] = {-0.04, 0.01, 0.05};
        for (int k = 1; k <= 3; ++k) {
            const CfoEstimate est = estimate_cfo(book.code(k), noise, search_for(0.05), plan.n);
            const double eps_hat = est.omega_hat * plan.n / (2.0 * std::numbers::pi);
            CHECK(std::abs(eps_hat - expected[k - 1]) < 1e-3);
        }
    }
}

TEST_CASE("detect_codes separates noiseless orthogonal users exactly") {
    RangingPlan plan;
    const std::vector<UserTruth> users = {user_with_channel(plan, 1, 25, 0.0, 11),
                                          user_with_channel(plan, 3, 190, 0.0, 12)};
    const SubchannelObservation obs = observe(users, plan, 0, 0.0, 0);
    const DetectionResult det = detect_codes(obs, fourier_codebook(plan.m),
                                             search_for(0.05), plan);
    CHECK(det.k_hat == 2);
    CHECK(det.detected_codes() == std::vector<int>{1, 3});
}

TEST_CASE("detected set is invariant to uniform observation scaling") {
    RangingPlan plan;
    const std::vector<UserTruth> users = {user_with_channel(plan, 2, 77, 0.021, 13),
                                          user_with_channel(plan, 3, 14, -0.034, 14)};
    SubchannelObservation obs = observe(users, plan, 0, 0.25, 21);
    const DetectionResult base = detect_codes(obs, fourier_codebook(plan.m),
                                              search_for(0.05), plan);
    for (Complex& v : obs.y.data()) v *= 7.5;
    const DetectionResult scaled = detect_codes(obs, fourier_codebook(plan.m),
                                                search_for(0.05), plan);
    CHECK(base.k_hat == scaled.k_hat);
    CHECK(base.detected_codes() == scaled.detected_codes());
    for (std::size_t i = 0; i < base.detected.size(); ++i)
        CHECK(base.detected[i].omega_hat ==
              doctest::Approx(scaled.detected[i].omega_hat).epsilon(1e-12));
}

TEST_CASE("noise-only input mostly yields an empty detected set") {
    RangingPlan plan;
    const double sigma2 = 0.1; // SNR 10 dB
    int empty = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const SubchannelObservation obs =
            observe({}, plan, 0, sigma2, 1000 + static_cast<std::uint64_t>(t));
        const DetectionResult det = detect_codes(obs, fourier_codebook(plan.m),
                                                 search_for(0.05), plan);
        if (det.k_hat == 0) {
            CHECK(det.detected.empty());
            ++empty;
        }
    }
    CHECK(empty > trials / 2);
}
