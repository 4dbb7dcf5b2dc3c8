// Command-line front end: single-point runs, Monte Carlo sweeps and a quick
// self-check of the core identities.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "ranging/harness.hpp"

using namespace ranging;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 0;
    int threads = -1;
};

ExperimentConfig load_config(const CliOverrides& cli) {
    std::ifstream in(cli.config_path);
    if (!in) throw ConfigError("cannot open config file '" + cli.config_path + "'", 0);
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_config(buf.str());
    if (cli.seed_set) cfg.seed = cli.seed;
    if (cli.trials > 0) cfg.trials = cli.trials;
    if (cli.threads >= 0) cfg.threads = cli.threads;
    cfg.validate();
    return cfg;
}

std::string join(const std::vector<int>& v) {
    std::string out = "{";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out + "}";
}

int cmd_run(const CliOverrides& cli) {
    const ExperimentConfig cfg = load_config(cli);
    const double snr = cfg.snr_db.front();
    std::cout << "running " << cfg.trials << " trial(s) at snr_db = " << snr
              << ", seed = " << cfg.seed << "\n";

    long mcd_wrong = 0, flm_wrong = 0, lste_err = 0, rcte_err = 0, users_total = 0;
    for (int t = 0; t < cfg.trials; ++t) {
        const TrialOutcome out = run_trial(cfg, snr, static_cast<std::uint64_t>(t));
        if (out.mcd_ran && !out.mcd_correct) ++mcd_wrong;
        if (out.flm_ran && !out.flm_correct) ++flm_wrong;
        for (const UserOutcome& u : out.users) {
            ++users_total;
            if (!u.mcd_matched || u.err_lste) ++lste_err;
            if (!u.mcd_matched || u.err_rcte) ++rcte_err;
        }
        if (t < 10) {
            std::cout << "trial " << t << ": true " << join(out.true_codes);
            if (out.mcd_ran) std::cout << " mcd " << join(out.mcd_detected);
            if (out.flm_ran) std::cout << " flm " << join(out.flm_detected);
            for (const UserOutcome& u : out.users) {
                std::cout << " | code " << u.code << " theta " << u.theta;
                if (u.mcd_matched) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.5f", u.eps_hat - u.epsilon);
                    std::cout << " eps_err " << buf;
                    if (u.theta_lste >= 0) std::cout << " lste " << u.theta_lste;
                    if (u.theta_rcte >= 0) std::cout << " rcte " << u.theta_rcte;
                } else {
                    std::cout << " missed";
                }
            }
            std::cout << "\n";
        }
    }
    std::cout << "summary:";
    if (cfg.detector != Detector::flm)
        std::cout << " mcd_wrong " << mcd_wrong << "/" << cfg.trials;
    if (cfg.detector != Detector::mcd)
        std::cout << " flm_wrong " << flm_wrong << "/" << cfg.trials;
    if (cfg.detector != Detector::flm && users_total > 0) {
        if (cfg.estimator != Estimator::rcte)
            std::cout << " lste_timing_err " << lste_err << "/" << users_total;
        if (cfg.estimator != Estimator::lste)
            std::cout << " rcte_timing_err " << rcte_err << "/" << users_total;
    }
    std::cout << "\n";
    return 0;
}

int cmd_sweep(const CliOverrides& cli) {
    const ExperimentConfig cfg = load_config(cli);
    const MetricsTable table = sweep(cfg);
    emit_outputs(table, cli.out_dir);
    std::ofstream echo(std::filesystem::path(cli.out_dir) / "config_resolved.txt",
                       std::ios::binary);
    if (!echo) throw std::runtime_error("cannot write config echo under " + cli.out_dir);
    echo << render_config(cfg);
    std::cout << to_csv(table);
    std::cout << "wrote " << (std::filesystem::path(cli.out_dir) / "metrics.csv").string()
              << ", plot_metrics.py, config_resolved.txt\n";
    return 0;
}

// ---------------------------------------------------------------------------
// selftest: fast oracle-equivalence and identity checks, exit 3 on failure.

struct SelfTest {
    int failures = 0;

    void check(bool ok, const std::string& name, const std::string& detail = "") {
        if (ok) {
            std::cout << "ok   " << name << "\n";
        } else {
            ++failures;
            std::cout << "FAIL " << name << (detail.empty() ? "" : ": " + detail) << "\n";
        }
    }
};

UserTruth selftest_user(const RangingPlan& plan, int code, int theta, double eps,
                        std::uint64_t stream) {
    UserTruth u;
    u.code_index = code;
    u.theta = theta;
    u.epsilon = eps;
    u.taps = draw_channel(ChannelProfile::exponential(plan.l, plan.channel_decay),
                          SeededStream{0x5E1F, stream});
    return u;
}

int cmd_selftest() {
    SelfTest st;
    RangingPlan plan;

    // Transform identities.
    for (std::size_t n : {4u, 16u, 1024u}) {
        const ComplexVector x = sample_cgaussian(SeededStream{1, n}, n, 1.0);
        const ComplexVector back = dft(dft(x), true);
        double worst = 0.0, ex = 0.0, ey = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, std::abs(back[i] - x[i]));
            ex += std::norm(x[i]);
            ey += std::norm(dft(x)[i]);
        }
        st.check(worst < 1e-12 && std::abs(std::sqrt(ex) - std::sqrt(ey)) < 1e-12,
                 "dft unitarity n=" + std::to_string(n));
    }

    // Eigendecomposition reconstruction.
    {
        const ComplexVector raw = sample_cgaussian(SeededStream{2, 1}, 16, 1.0);
        ComplexMatrix a(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) a(i, j) = 0.5 * (raw[i * 4 + j] + std::conj(raw[j * 4 + i]));
        const EigenDecomposition ed = hermitian_eig(a);
        ComplexMatrix ul(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) ul(i, j) = ed.eigenvectors(i, j) * ed.eigenvalues[j];
        const ComplexMatrix rec = matmul(ul, ed.eigenvectors.adjoint());
        double err = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) err += std::norm(rec(i, j) - a(i, j));
        st.check(std::sqrt(err) / frobenius_norm(a) < 1e-10, "eigen reconstruction");
    }

    // FB persymmetry, exact.
    {
        const std::vector<UserTruth> users = {selftest_user(plan, 1, 40, 0.02, 1)};
        const SubchannelObservation obs = receiver_frontend(
            synthesize_uplink(users, plan, 0, 0.5, SeededStream{0x5E1F, 100}), plan, 0);
        const CorrelationEstimate corr = sample_correlation(obs);
        bool exact = true;
        for (int i = 0; i < plan.m; ++i)
            for (int j = 0; j < plan.m; ++j)
                exact = exact && corr.r_tilde(i, j) == corr.r_tilde(plan.m - 1 - j, plan.m - 1 - i);
        st.check(exact, "forward-backward persymmetry");
    }

    // Time-domain vs frequency-domain model.
    {
        double worst = 0.0;
        for (std::uint64_t inst = 0; inst < 10; ++inst) {
            const auto u = sample_uniform(SeededStream{3, inst}, 6);
            std::vector<UserTruth> users = {
                selftest_user(plan, 1, static_cast<int>(u[0] * 205), (2 * u[1] - 1) * 0.075,
                              200 + inst)};
            if (inst % 2 == 0)
                users.push_back(selftest_user(plan, 2, static_cast<int>(u[2] * 205),
                                              (2 * u[3] - 1) * 0.075, 300 + inst));
            const SubchannelObservation obs = receiver_frontend(
                synthesize_uplink(users, plan, 0, 0.0, SeededStream{}), plan, 0);
            const SubchannelObservation model = model_oracle(users, plan, 0, OracleMode::exact);
            double ref = 0.0;
            for (const Complex& v : model.y.data()) ref = std::max(ref, std::abs(v));
            for (std::size_t i = 0; i < obs.y.data().size(); ++i)
                worst = std::max(worst,
                                 std::abs(obs.y.data()[i] - model.y.data()[i]) / ref);
        }
        st.check(worst < 1e-9, "synthesis matches the exact model");
    }

    // Timing metric decomposition.
    {
        double worst = 0.0;
        for (std::uint64_t inst = 0; inst < 100; ++inst) {
            DecoupledSignatures sig;
            sig.q = plan.q;
            sig.v = plan.v;
            sig.n = plan.n;
            sig.l_rx = plan.l;
            sig.bins = subchannel_bins(plan, 0);
            sig.code_indices = {1};
            sig.omega_hats = {0.0};
            const ComplexVector raw = sample_cgaussian(SeededStream{4, inst},
                                                       static_cast<std::size_t>(plan.q) * plan.v,
                                                       1.0);
            ComplexMatrix t(static_cast<std::size_t>(plan.v), static_cast<std::size_t>(plan.q));
            for (int nu = 0; nu < plan.v; ++nu)
                for (int l = 0; l < plan.q; ++l) t(nu, l) = raw[nu * plan.q + l];
            sig.time = {t};
            sig.freq = {ComplexMatrix(static_cast<std::size_t>(plan.q),
                                      static_cast<std::size_t>(plan.v))};
            for (int theta = 0; theta <= plan.theta_max; ++theta) {
                const double full = lste_metric(sig, 0, theta);
                const double parts = rcte_energy_metric(sig, 0, theta % plan.q) +
                                     rcte_cross_metric(sig, 0, theta % plan.q, theta / plan.q);
                worst = std::max(worst, std::abs(full - parts) / std::max(1.0, std::abs(full)));
            }
        }
        st.check(worst < 1e-10, "timing metric decomposition");
    }

    // Noiseless exactness at spot offsets.
    {
        bool ok = true;
        std::string detail;
        for (int theta : {0, 37, 204}) {
            const std::vector<UserTruth> users = {
                selftest_user(plan, 2, theta, 0.0, 400 + static_cast<std::uint64_t>(theta))};
            const SubchannelObservation obs = receiver_frontend(
                synthesize_uplink(users, plan, 0, 0.0, SeededStream{}), plan, 0);
            CfoSearch search;
            search.eps_bound = 0.0;
            const DetectionResult det =
                detect_codes(obs, fourier_codebook(plan.m), search, plan);
            if (det.detected_codes() != std::vector<int>{2}) {
                ok = false;
                detail = "detection failed at theta " + std::to_string(theta);
                break;
            }
            const DecoupledSignatures sig =
                decouple_signatures(obs, det, fourier_codebook(plan.m), plan);
            const int lste = lste_estimate(sig, 0, plan.theta_max).theta_hat;
            const int rc_g = rcte_estimate(sig, 0, plan.theta_max, RcteMode::generic).theta_hat;
            const int rc_c =
                rcte_estimate(sig, 0, plan.theta_max, RcteMode::closed_form_v2).theta_hat;
            const CirEstimate cir = estimate_cir(sig, 0, lste);
            double cir_err = 0.0;
            for (std::size_t l = 0; l < cir.taps.size(); ++l)
                cir_err = std::max(cir_err, std::abs(cir.taps[l] - users[0].taps[l]));
            if (lste != theta || rc_g != theta || rc_c != theta || cir_err > 1e-9) {
                ok = false;
                detail = "estimates at theta " + std::to_string(theta) + ": lste " +
                         std::to_string(lste) + " rcte " + std::to_string(rc_g) + "/" +
                         std::to_string(rc_c);
                break;
            }
        }
        st.check(ok, "noiseless timing exactness", detail);
    }

    // Order selection and the error-event window.
    st.check(mdl_order({100.0, 1.0, 1.0, 1.0}, 32, 4) == 1 &&
                 mdl_order({2.0, 2.0, 2.0, 2.0}, 32, 4) == 0,
             "mdl order on hand-checked spectra");
    st.check(!timing_error_event(26, 0, 64, 12) && timing_error_event(27, 0, 64, 12) &&
                 !timing_error_event(-27, 0, 64, 12) && timing_error_event(-28, 0, 64, 12),
             "timing error window edges");
    st.check(204 % plan.q == 12 && 204 / plan.q == 12, "theta_max decomposition (beta 12, p 12)");

    // Determinism across thread counts.
    {
        ExperimentConfig cfg;
        cfg.snr_db = {12.0};
        cfg.trials = 5;
        cfg.seed = 99;
        cfg.threads = 1;
        const std::string a = to_csv(sweep(cfg));
        cfg.threads = 4;
        const std::string b = to_csv(sweep(cfg));
        st.check(a == b && a.rfind("snr_db,k_users,omega_max,detector,estimator,trials,pf,", 0) ==
                               0,
                 "sweep determinism across thread counts");
    }

    std::cout << (st.failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
    return st.failures == 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFDMA initial-ranging simulator: subspace code detection, CFO estimation "
                 "and least-squares timing recovery"};
    app.require_subcommand(1);

    CliOverrides cli;

    CLI::App* run = app.add_subcommand("run", "run one config point and print trial summaries");
    run->add_option("--config", cli.config_path, "config file (key = value lines)")->required();
    run->add_option("--seed", cli.seed, "override the master seed")
        ->each([&](const std::string&) { cli.seed_set = true; });
    run->add_option("--trials", cli.trials, "override the trial count");
    run->add_option("--threads", cli.threads, "worker threads (0 = hardware)");

    CLI::App* sw = app.add_subcommand("sweep", "full grid -> CSV + plot script");
    sw->add_option("--config", cli.config_path, "config file (key = value lines)")->required();
    sw->add_option("--out", cli.out_dir, "output directory (default: out)");
    sw->add_option("--seed", cli.seed, "override the master seed")
        ->each([&](const std::string&) { cli.seed_set = true; });
    sw->add_option("--trials", cli.trials, "override the trial count");
    sw->add_option("--threads", cli.threads, "worker threads (0 = hardware)");

    CLI::App* self = app.add_subcommand("selftest", "oracle equivalence and identity checks");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(cli);
        if (sw->parsed()) return cmd_sweep(cli);
        if (self->parsed()) return cmd_selftest();
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
