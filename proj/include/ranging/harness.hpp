#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ranging/airlink.hpp"
#include "ranging/subspace.hpp"
#include "ranging/timing.hpp"

namespace ranging {

enum class Estimator { lste, rcte, both };
enum class Detector { mcd, flm, both };
enum class FlmSigmaMode { genie, estimated };
enum class TimingPolicy { include_misdetected, exclude_misdetected };

/// Configuration error with the offending line number (0 when the problem is
/// not tied to a single line, e.g. a missing required key).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// One experiment description: the ranging plan plus scenario, estimator and
/// output knobs. Defaults describe the reference setup; snr_db and trials
/// have no defaults and must come from the config text.
struct ExperimentConfig {
    RangingPlan plan;
    int k_users = 2;
    double omega_max = 0.05;
    std::vector<double> snr_db;
    int trials = 0;
    std::uint64_t seed = 1;
    Estimator estimator = Estimator::both;
    Detector detector = Detector::both;
    double flm_lambda = 4.0;
    FlmSigmaMode flm_sigma = FlmSigmaMode::genie;
    double cfo_grid_step = 2e-4;
    double cfo_search_factor = 1.5;
    int subchannel = 0;
    bool populate_other_subchannels = false;
    TimingPolicy timing_policy = TimingPolicy::include_misdetected;
    int l_rx = 0;   // 0: use the plan's channel length
    int threads = 0; // 0: hardware concurrency

    CfoSearch cfo_search() const;
    /// Full validation; throws ConfigError.
    void validate() const;
};

/// Parses the line-oriented `key = value` format ('#' starts a comment).
/// Unknown keys, duplicate keys, type mismatches and constraint violations
/// are rejected with line numbers. snr_db and trials are required.
ExperimentConfig parse_config(const std::string& text);

/// Canonical echo of a fully-resolved configuration; parse_config of the
/// result reproduces the same configuration.
std::string render_config(const ExperimentConfig& cfg);

/// Per true user bookkeeping within one trial.
struct UserOutcome {
    int code = 0;
    int theta = 0;
    double epsilon = 0.0;
    bool mcd_matched = false; // the user's code was in the MCD detected set
    double eps_hat = 0.0;     // valid when matched
    int theta_lste = -1;      // -1 when not estimated
    int theta_rcte = -1;
    bool err_lste = false;
    bool err_rcte = false;
};

struct TrialOutcome {
    std::vector<int> true_codes;
    int k_hat = 0;
    std::vector<int> mcd_detected;
    std::vector<int> flm_detected;
    bool mcd_ran = false;
    bool flm_ran = false;
    bool mcd_correct = false;
    bool flm_correct = false;
    std::vector<UserOutcome> users;
};

/// Runs one independent trial at the given SNR. All randomness derives from
/// (cfg.seed, trial_index), so identical calls give identical outcomes no
/// matter when or where they execute.
TrialOutcome run_trial(const ExperimentConfig& cfg, double snr_db, std::uint64_t trial_index);

/// Timing error event: the estimate would cause interblock interference in
/// the data phase. Exact integer evaluation of
/// d + (l - n_gd)/2 > 0  or  d + (l - n_gd)/2 < l - n_gd - 1, d = theta_hat -
/// theta.
bool timing_error_event(int theta_hat, int theta, int n_gd, int l);

struct MetricsRow {
    double snr_db = 0.0;
    int k_users = 0;
    double omega_max = 0.0;
    std::string detector;  // "mcd" or "flm"
    std::string estimator; // "lste", "rcte" or "none"
    int trials = 0;
    double pf = 0.0;
    double pf_ci95 = 0.0;
    double cfo_rmse = 0.0; // NaN when no correctly detected trial contributed
    double cfo_rmse_ci95 = 0.0;
    double p_eps = 0.0; // NaN for detector rows without a timing estimator
    double p_eps_ci95 = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
};

/// Full Monte Carlo grid: per SNR point, cfg.trials trials, reduced in trial
/// order so the result is independent of the thread count.
MetricsTable sweep(const ExperimentConfig& cfg);

/// CSV serialization, exact header
/// snr_db,k_users,omega_max,detector,estimator,trials,pf,pf_ci95,cfo_rmse,
/// cfo_rmse_ci95,p_eps,p_eps_ci95 and stable 9-significant-digit floats.
std::string to_csv(const MetricsTable& table);

/// Writes metrics.csv and plot_metrics.py under out_dir. Re-emission of the
/// same table is byte-identical.
void emit_outputs(const MetricsTable& table, const std::string& out_dir);

} // namespace ranging
