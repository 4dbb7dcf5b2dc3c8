#include "ranging/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace ranging {

namespace {

// Stream-id layout: one 16384-slot block per trial. Slot 0 draws the user
// parameters, slot 1 the noise, slots 2+u the per-user channels; interfering
// subchannels get 128-slot sub-blocks starting at 8192.
constexpr std::uint64_t kSlotsPerTrial = 16384;
constexpr std::uint64_t kInterfererBase = 8192;
constexpr std::uint64_t kInterfererStride = 128;

SeededStream trial_stream(const ExperimentConfig& cfg, std::uint64_t trial, std::uint64_t slot) {
    return SeededStream{cfg.seed, trial * kSlotsPerTrial + slot};
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

long long parse_int(const std::string& value, int line, const std::string& key) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                              "' expects an integer, got '" + value + "'",
                          line);
    }
    if (used != value.size())
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                              "' expects an integer, got '" + value + "'",
                          line);
    return out;
}

double parse_double(const std::string& value, int line, const std::string& key) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                              "' expects a number, got '" + value + "'",
                          line);
    }
    if (used != value.size())
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                              "' expects a number, got '" + value + "'",
                          line);
    return out;
}

bool parse_bool(const std::string& value, int line, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                          "' expects true or false, got '" + value + "'",
                      line);
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string detector_name(Detector d) {
    switch (d) {
        case Detector::mcd: return "mcd";
        case Detector::flm: return "flm";
        default: return "both";
    }
}

std::string estimator_name(Estimator e) {
    switch (e) {
        case Estimator::lste: return "lste";
        case Estimator::rcte: return "rcte";
        default: return "both";
    }
}

std::string sigma_mode_name(FlmSigmaMode m) {
    return m == FlmSigmaMode::genie ? "genie" : "estimated";
}

std::string policy_name(TimingPolicy p) {
    return p == TimingPolicy::include_misdetected ? "include_misdetected"
                                                  : "exclude_misdetected";
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min<std::size_t>(threads, count);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (std::thread& t : pool) t.join();
}

// Draws the per-trial scenario on one subchannel from one parameter stream.
std::vector<UserTruth> draw_users(const ExperimentConfig& cfg, std::uint64_t trial,
                                  std::uint64_t slot_base) {
    const int k = cfg.k_users;
    std::vector<UserTruth> users;
    if (k == 0) return users;

    const auto u = sample_uniform(trial_stream(cfg, trial, slot_base),
                                  static_cast<std::size_t>(3 * k));
    // Distinct codes via a partial shuffle of {1, ..., m-1}.
    std::vector<int> pool(static_cast<std::size_t>(cfg.plan.m - 1));
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i) + 1;
    for (int i = 0; i < k; ++i) {
        const auto remaining = pool.size() - static_cast<std::size_t>(i);
        auto j = static_cast<std::size_t>(i) +
                 std::min<std::size_t>(static_cast<std::size_t>(u[i] * remaining),
                                       remaining - 1);
        std::swap(pool[i], pool[j]);
    }
    std::vector<int> codes(pool.begin(), pool.begin() + k);
    std::sort(codes.begin(), codes.end());

    const ChannelProfile profile =
        ChannelProfile::exponential(cfg.plan.l, cfg.plan.channel_decay);
    users.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        UserTruth user;
        user.code_index = codes[i];
        user.theta = std::min(cfg.plan.theta_max,
                              static_cast<int>(u[k + i] * (cfg.plan.theta_max + 1)));
        user.epsilon = (2.0 * u[2 * k + i] - 1.0) * cfg.omega_max;
        user.taps = draw_channel(profile, trial_stream(cfg, trial, slot_base + 2 + i));
        users.push_back(std::move(user));
    }
    return users;
}

struct Accumulator {
    // Detection.
    long mcd_wrong = 0;
    long flm_wrong = 0;
    // CFO over correctly detected trials.
    double e2_sum = 0.0;
    double e4_sum = 0.0;
    long e_count = 0;
    // Timing per estimator.
    long lste_err = 0, lste_den = 0;
    long rcte_err = 0, rcte_den = 0;
    long trials = 0;
};

void accumulate(Accumulator& acc, const TrialOutcome& out, const ExperimentConfig& cfg) {
    acc.trials += 1;
    if (out.mcd_ran && !out.mcd_correct) acc.mcd_wrong += 1;
    if (out.flm_ran && !out.flm_correct) acc.flm_wrong += 1;
    if (out.mcd_ran && out.mcd_correct) {
        for (const UserOutcome& user : out.users) {
            const double e = user.eps_hat - user.epsilon;
            acc.e2_sum += e * e;
            acc.e4_sum += e * e * e * e;
            acc.e_count += 1;
        }
    }
    if (out.mcd_ran) {
        const bool include = cfg.timing_policy == TimingPolicy::include_misdetected;
        for (const UserOutcome& user : out.users) {
            if (user.mcd_matched) {
                acc.lste_den += 1;
                acc.rcte_den += 1;
                if (user.err_lste) acc.lste_err += 1;
                if (user.err_rcte) acc.rcte_err += 1;
            } else if (include) {
                acc.lste_den += 1;
                acc.rcte_den += 1;
                acc.lste_err += 1;
                acc.rcte_err += 1;
            }
        }
    }
}

double binomial_ci95(double p, long n) {
    if (n <= 0) return std::numeric_limits<double>::quiet_NaN();
    return 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

} // namespace

CfoSearch ExperimentConfig::cfo_search() const {
    CfoSearch s;
    s.eps_bound = cfo_search_factor * omega_max;
    s.eps_step = cfo_grid_step;
    s.refine = true;
    return s;
}

void ExperimentConfig::validate() const {
    try {
        plan.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what(), 0);
    }
    if (k_users < 0 || k_users > plan.m - 1)
        throw ConfigError("config: k_users must satisfy K <= M-1 (and K >= 0)", 0);
    if (snr_db.empty()) throw ConfigError("config: snr_db list must not be empty", 0);
    if (trials < 1) throw ConfigError("config: trials must be >= 1", 0);
    if (omega_max < 0.0) throw ConfigError("config: omega_max must be >= 0", 0);
    if (flm_lambda <= 0.0) throw ConfigError("config: flm_lambda must be > 0", 0);
    if (cfo_grid_step <= 0.0) throw ConfigError("config: cfo_grid_step must be > 0", 0);
    if (cfo_search_factor <= 0.0) throw ConfigError("config: cfo_search_factor must be > 0", 0);
    if (subchannel < 0 || subchannel >= plan.r)
        throw ConfigError("config: subchannel outside [0, r_subchannels)", 0);
    if (l_rx != 0 && (l_rx < plan.l || l_rx > plan.q))
        throw ConfigError("config: l_rx must be 0 (auto) or in [l_taps, q_subbands]", 0);
    if (plan.v < 2 && estimator != Estimator::lste)
        throw ConfigError("config: the reduced-complexity estimator needs v_per_subband >= 2 "
                          "(the integer part is ambiguous at v = 1); set estimator = lste",
                          0);
    if (threads < 0) throw ConfigError("config: threads must be >= 0", 0);
    if (plan.m > 126 || plan.r > 64)
        throw ConfigError("config: stream layout supports m_blocks <= 126 and "
                          "r_subchannels <= 64",
                          0);
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::map<std::string, int> seen;
    bool have_snr = false;
    bool have_trials = false;

    using Setter = std::function<void(const std::string&, int)>;
    const std::map<std::string, Setter> setters = {
        {"n_subcarriers", [&](const std::string& v, int ln) {
             cfg.plan.n = static_cast<int>(parse_int(v, ln, "n_subcarriers"));
         }},
        {"q_subbands", [&](const std::string& v, int ln) {
             cfg.plan.q = static_cast<int>(parse_int(v, ln, "q_subbands"));
         }},
        {"r_subchannels", [&](const std::string& v, int ln) {
             cfg.plan.r = static_cast<int>(parse_int(v, ln, "r_subchannels"));
         }},
        {"v_per_subband", [&](const std::string& v, int ln) {
             cfg.plan.v = static_cast<int>(parse_int(v, ln, "v_per_subband"));
         }},
        {"m_blocks", [&](const std::string& v, int ln) {
             cfg.plan.m = static_cast<int>(parse_int(v, ln, "m_blocks"));
         }},
        {"n_g", [&](const std::string& v, int ln) {
             cfg.plan.n_g = static_cast<int>(parse_int(v, ln, "n_g"));
         }},
        {"n_gd", [&](const std::string& v, int ln) {
             cfg.plan.n_gd = static_cast<int>(parse_int(v, ln, "n_gd"));
         }},
        {"theta_max", [&](const std::string& v, int ln) {
             cfg.plan.theta_max = static_cast<int>(parse_int(v, ln, "theta_max"));
         }},
        {"l_taps", [&](const std::string& v, int ln) {
             cfg.plan.l = static_cast<int>(parse_int(v, ln, "l_taps"));
         }},
        {"channel_decay", [&](const std::string& v, int ln) {
             cfg.plan.channel_decay = parse_double(v, ln, "channel_decay");
         }},
        {"k_users", [&](const std::string& v, int ln) {
             cfg.k_users = static_cast<int>(parse_int(v, ln, "k_users"));
         }},
        {"omega_max", [&](const std::string& v, int ln) {
             cfg.omega_max = parse_double(v, ln, "omega_max");
         }},
        {"snr_db", [&](const std::string& v, int ln) {
             cfg.snr_db.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ',')) {
                 item = trim(item);
                 if (item.empty())
                     throw ConfigError("line " + std::to_string(ln) +
                                           ": empty entry in snr_db list",
                                       ln);
                 cfg.snr_db.push_back(parse_double(item, ln, "snr_db"));
             }
             have_snr = !cfg.snr_db.empty();
         }},
        {"trials", [&](const std::string& v, int ln) {
             cfg.trials = static_cast<int>(parse_int(v, ln, "trials"));
             have_trials = true;
         }},
        {"seed", [&](const std::string& v, int ln) {
             cfg.seed = static_cast<std::uint64_t>(parse_int(v, ln, "seed"));
         }},
        {"estimator", [&](const std::string& v, int ln) {
             if (v == "lste") cfg.estimator = Estimator::lste;
             else if (v == "rcte") cfg.estimator = Estimator::rcte;
             else if (v == "both") cfg.estimator = Estimator::both;
             else
                 throw ConfigError("line " + std::to_string(ln) +
                                       ": estimator must be lste, rcte or both",
                                   ln);
         }},
        {"detector", [&](const std::string& v, int ln) {
             if (v == "mcd") cfg.detector = Detector::mcd;
             else if (v == "flm") cfg.detector = Detector::flm;
             else if (v == "both") cfg.detector = Detector::both;
             else
                 throw ConfigError("line " + std::to_string(ln) +
                                       ": detector must be mcd, flm or both",
                                   ln);
         }},
        {"flm_lambda", [&](const std::string& v, int ln) {
             cfg.flm_lambda = parse_double(v, ln, "flm_lambda");
         }},
        {"flm_sigma", [&](const std::string& v, int ln) {
             if (v == "genie") cfg.flm_sigma = FlmSigmaMode::genie;
             else if (v == "estimated") cfg.flm_sigma = FlmSigmaMode::estimated;
             else
                 throw ConfigError("line " + std::to_string(ln) +
                                       ": flm_sigma must be genie or estimated",
                                   ln);
         }},
        {"cfo_grid_step", [&](const std::string& v, int ln) {
             cfg.cfo_grid_step = parse_double(v, ln, "cfo_grid_step");
         }},
        {"cfo_search_factor", [&](const std::string& v, int ln) {
             cfg.cfo_search_factor = parse_double(v, ln, "cfo_search_factor");
         }},
        {"subchannel", [&](const std::string& v, int ln) {
             cfg.subchannel = static_cast<int>(parse_int(v, ln, "subchannel"));
         }},
        {"populate_other_subchannels", [&](const std::string& v, int ln) {
             cfg.populate_other_subchannels = parse_bool(v, ln, "populate_other_subchannels");
         }},
        {"timing_policy", [&](const std::string& v, int ln) {
             if (v == "include_misdetected") cfg.timing_policy = TimingPolicy::include_misdetected;
             else if (v == "exclude_misdetected")
                 cfg.timing_policy = TimingPolicy::exclude_misdetected;
             else
                 throw ConfigError("line " + std::to_string(ln) +
                                       ": timing_policy must be include_misdetected or "
                                       "exclude_misdetected",
                                   ln);
         }},
        {"l_rx", [&](const std::string& v, int ln) {
             cfg.l_rx = static_cast<int>(parse_int(v, ln, "l_rx"));
         }},
        {"threads", [&](const std::string& v, int ln) {
             cfg.threads = static_cast<int>(parse_int(v, ln, "threads"));
         }},
    };

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'",
                              line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'",
                              line_no);
        const auto prev = seen.find(key);
        if (prev != seen.end())
            throw ConfigError("duplicate key '" + key + "' on lines " +
                                  std::to_string(prev->second) + " and " +
                                  std::to_string(line_no),
                              line_no);
        seen[key] = line_no;
        it->second(value, line_no);
    }

    if (!have_snr) throw ConfigError("config: required key 'snr_db' is missing", 0);
    if (!have_trials) throw ConfigError("config: required key 'trials' is missing", 0);
    cfg.validate();
    return cfg;
}

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "n_subcarriers = " << cfg.plan.n << "\n";
    out << "q_subbands = " << cfg.plan.q << "\n";
    out << "r_subchannels = " << cfg.plan.r << "\n";
    out << "v_per_subband = " << cfg.plan.v << "\n";
    out << "m_blocks = " << cfg.plan.m << "\n";
    out << "n_g = " << cfg.plan.n_g << "\n";
    out << "n_gd = " << cfg.plan.n_gd << "\n";
    out << "theta_max = " << cfg.plan.theta_max << "\n";
    out << "l_taps = " << cfg.plan.l << "\n";
    out << "channel_decay = " << fmt_double(cfg.plan.channel_decay) << "\n";
    out << "k_users = " << cfg.k_users << "\n";
    out << "omega_max = " << fmt_double(cfg.omega_max) << "\n";
    out << "snr_db = ";
    for (std::size_t i = 0; i < cfg.snr_db.size(); ++i) {
        if (i) out << ",";
        out << fmt_double(cfg.snr_db[i]);
    }
    out << "\n";
    out << "trials = " << cfg.trials << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "estimator = " << estimator_name(cfg.estimator) << "\n";
    out << "detector = " << detector_name(cfg.detector) << "\n";
    out << "flm_lambda = " << fmt_double(cfg.flm_lambda) << "\n";
    out << "flm_sigma = " << sigma_mode_name(cfg.flm_sigma) << "\n";
    out << "cfo_grid_step = " << fmt_double(cfg.cfo_grid_step) << "\n";
    out << "cfo_search_factor = " << fmt_double(cfg.cfo_search_factor) << "\n";
    out << "subchannel = " << cfg.subchannel << "\n";
    out << "populate_other_subchannels = "
        << (cfg.populate_other_subchannels ? "true" : "false") << "\n";
    out << "timing_policy = " << policy_name(cfg.timing_policy) << "\n";
    out << "l_rx = " << cfg.l_rx << "\n";
    out << "threads = " << cfg.threads << "\n";
    return out.str();
}

bool timing_error_event(int theta_hat, int theta, int n_gd, int l) {
    // Scaled by two so the half-offset stays integral.
    const long d = static_cast<long>(theta_hat) - theta;
    const long shifted = 2 * d + (l - n_gd);
    return shifted > 0 || shifted < 2L * (l - n_gd - 1);
}

TrialOutcome run_trial(const ExperimentConfig& cfg, double snr_db, std::uint64_t trial_index) {
    cfg.validate();
    const RangingPlan& plan = cfg.plan;
    const double sigma2 = std::pow(10.0, -snr_db / 10.0);

    const std::vector<UserTruth> users = draw_users(cfg, trial_index, 0);

    ComplexVector samples =
        synthesize_uplink(users, plan, cfg.subchannel, 0.0, SeededStream{});
    if (cfg.populate_other_subchannels) {
        for (int other = 0; other < plan.r; ++other) {
            if (other == cfg.subchannel) continue;
            const std::uint64_t base =
                kInterfererBase + static_cast<std::uint64_t>(other) * kInterfererStride;
            const std::vector<UserTruth> interferers = draw_users(cfg, trial_index, base);
            const ComplexVector extra =
                synthesize_uplink(interferers, plan, other, 0.0, SeededStream{});
            for (std::size_t t = 0; t < samples.size(); ++t) samples[t] += extra[t];
        }
    }
    if (sigma2 > 0.0) {
        const ComplexVector noise =
            sample_cgaussian(trial_stream(cfg, trial_index, 1), samples.size(), sigma2);
        for (std::size_t t = 0; t < samples.size(); ++t) samples[t] += noise[t];
    }

    const SubchannelObservation obs = receiver_frontend(samples, plan, cfg.subchannel);
    const CodeBook book = fourier_codebook(plan.m);

    TrialOutcome out;
    for (const UserTruth& u : users) out.true_codes.push_back(u.code_index);
    out.users.resize(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
        out.users[i].code = users[i].code_index;
        out.users[i].theta = users[i].theta;
        out.users[i].epsilon = users[i].epsilon;
    }

    out.mcd_ran = cfg.detector != Detector::flm;
    out.flm_ran = cfg.detector != Detector::mcd;

    if (out.flm_ran) {
        double sigma_est = sigma2;
        if (cfg.flm_sigma == FlmSigmaMode::estimated) {
            // Smallest eigenvalue of the FB-averaged correlation.
            const NoiseSubspace ns = noise_subspace(sample_correlation(obs), plan.n_t());
            sigma_est = std::max(ns.eigenvalues.back(), 1e-30);
        }
        out.flm_detected = flm_detect(obs, book, sigma_est, cfg.flm_lambda);
        out.flm_correct = out.flm_detected == out.true_codes;
    }

    if (out.mcd_ran) {
        const DetectionResult det = detect_codes(obs, book, cfg.cfo_search(), plan);
        out.k_hat = det.k_hat;
        out.mcd_detected = det.detected_codes();
        out.mcd_correct = out.mcd_detected == out.true_codes;

        if (!det.detected.empty()) {
            const bool want_lste = cfg.estimator != Estimator::rcte;
            const bool want_rcte = cfg.estimator != Estimator::lste;
            const RcteMode mode =
                plan.v == 2 ? RcteMode::closed_form_v2 : RcteMode::generic;
            const DecoupledSignatures* sig = nullptr;
            DecoupledSignatures sig_storage;
            try {
                sig_storage = decouple_signatures(obs, det, book, plan, cfg.l_rx);
                sig = &sig_storage;
            } catch (const DecouplingError&) {
                // Bogus CFO estimates can make two rotated codes coincide;
                // the trial keeps its detection result but yields no timing
                // estimates (matched users count as timing errors below).
            }
            for (std::size_t i = 0; i < users.size(); ++i) {
                UserOutcome& uo = out.users[i];
                int pos = -1;
                for (std::size_t d = 0; d < det.detected.size(); ++d)
                    if (det.detected[d].code_index == uo.code) pos = static_cast<int>(d);
                if (pos < 0) continue;
                uo.mcd_matched = true;
                uo.eps_hat = det.detected[pos].eps_hat;
                if (want_lste) {
                    if (sig) {
                        uo.theta_lste = lste_estimate(*sig, pos, plan.theta_max).theta_hat;
                        uo.err_lste =
                            timing_error_event(uo.theta_lste, uo.theta, plan.n_gd, plan.l);
                    } else {
                        uo.err_lste = true;
                    }
                }
                if (want_rcte) {
                    if (sig) {
                        uo.theta_rcte =
                            rcte_estimate(*sig, pos, plan.theta_max, mode).theta_hat;
                        uo.err_rcte =
                            timing_error_event(uo.theta_rcte, uo.theta, plan.n_gd, plan.l);
                    } else {
                        uo.err_rcte = true;
                    }
                }
            }
        }
    }
    return out;
}

MetricsTable sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    MetricsTable table;
    for (const double snr : cfg.snr_db) {
        std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cfg.trials));
        parallel_for(outcomes.size(), cfg.threads, [&](std::size_t t) {
            outcomes[t] = run_trial(cfg, snr, static_cast<std::uint64_t>(t));
        });
        // Reduction in trial order keeps the result thread-count independent.
        Accumulator acc;
        for (const TrialOutcome& out : outcomes) accumulate(acc, out, cfg);

        const double rmse =
            acc.e_count > 0 ? std::sqrt(acc.e2_sum / static_cast<double>(acc.e_count))
                            : std::numeric_limits<double>::quiet_NaN();
        double rmse_ci = std::numeric_limits<double>::quiet_NaN();
        if (acc.e_count > 0 && rmse > 0.0) {
            const double mean2 = acc.e2_sum / static_cast<double>(acc.e_count);
            const double var2 =
                std::max(acc.e4_sum / static_cast<double>(acc.e_count) - mean2 * mean2, 0.0);
            rmse_ci = 1.96 * std::sqrt(var2 / static_cast<double>(acc.e_count)) / (2.0 * rmse);
        } else if (acc.e_count > 0) {
            rmse_ci = 0.0;
        }

        auto make_row = [&](const std::string& det, const std::string& est) {
            MetricsRow row;
            row.snr_db = snr;
            row.k_users = cfg.k_users;
            row.omega_max = cfg.omega_max;
            row.detector = det;
            row.estimator = est;
            row.trials = cfg.trials;
            if (det == "mcd") {
                row.pf = static_cast<double>(acc.mcd_wrong) / cfg.trials;
                row.pf_ci95 = binomial_ci95(row.pf, acc.trials);
                row.cfo_rmse = rmse;
                row.cfo_rmse_ci95 = rmse_ci;
                const long den = est == "lste" ? acc.lste_den : acc.rcte_den;
                const long err = est == "lste" ? acc.lste_err : acc.rcte_err;
                if (den > 0) {
                    row.p_eps = static_cast<double>(err) / static_cast<double>(den);
                    row.p_eps_ci95 = binomial_ci95(row.p_eps, den);
                } else {
                    row.p_eps = std::numeric_limits<double>::quiet_NaN();
                    row.p_eps_ci95 = std::numeric_limits<double>::quiet_NaN();
                }
            } else {
                row.pf = static_cast<double>(acc.flm_wrong) / cfg.trials;
                row.pf_ci95 = binomial_ci95(row.pf, acc.trials);
                row.cfo_rmse = std::numeric_limits<double>::quiet_NaN();
                row.cfo_rmse_ci95 = std::numeric_limits<double>::quiet_NaN();
                row.p_eps = std::numeric_limits<double>::quiet_NaN();
                row.p_eps_ci95 = std::numeric_limits<double>::quiet_NaN();
            }
            table.rows.push_back(row);
        };

        if (cfg.detector != Detector::flm) {
            if (cfg.estimator != Estimator::rcte) make_row("mcd", "lste");
            if (cfg.estimator != Estimator::lste) make_row("mcd", "rcte");
        }
        if (cfg.detector != Detector::mcd) make_row("flm", "none");
    }
    return table;
}

std::string to_csv(const MetricsTable& table) {
    std::ostringstream out;
    out << "snr_db,k_users,omega_max,detector,estimator,trials,pf,pf_ci95,cfo_rmse,"
           "cfo_rmse_ci95,p_eps,p_eps_ci95\n";
    for (const MetricsRow& row : table.rows) {
        out << fmt_double(row.snr_db) << ',' << row.k_users << ',' << fmt_double(row.omega_max)
            << ',' << row.detector << ',' << row.estimator << ',' << row.trials << ','
            << fmt_double(row.pf) << ',' << fmt_double(row.pf_ci95) << ','
            << fmt_double(row.cfo_rmse) << ',' << fmt_double(row.cfo_rmse_ci95) << ','
            << fmt_double(row.p_eps) << ',' << fmt_double(row.p_eps_ci95) << '\n';
    }
    return out.str();
}

namespace {

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Render detection, CFO-accuracy and timing curves from metrics.csv."""
import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load_rows():
    with open(os.path.join(HERE, "metrics.csv"), newline="") as fh:
        return list(csv.DictReader(fh))


def series(rows, field):
    groups = defaultdict(list)
    for row in rows:
        value = row[field]
        if value == "nan":
            continue
        key = (row["detector"], row["estimator"], row["k_users"], row["omega_max"])
        groups[key].append((float(row["snr_db"]), float(value)))
    return {k: sorted(v) for k, v in groups.items()}


def plot(rows, field, title, outfile, floor=1e-5):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for (det, est, k, omega), pts in sorted(series(rows, field).items()):
        snr = [p[0] for p in pts]
        val = [max(p[1], floor) for p in pts]
        label = f"{det}/{est} K={k} omega={omega}"
        ax.semilogy(snr, val, marker="o", label=label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, outfile), dpi=150)
    plt.close(fig)


def main():
    rows = load_rows()
    plot(rows, "pf", "wrong-detection probability", "pf.png")
    plot(rows, "cfo_rmse", "CFO RMSE (normalized)", "cfo_rmse.png")
    plot(rows, "p_eps", "timing error probability", "p_eps.png")
    print("wrote pf.png, cfo_rmse.png, p_eps.png")


if __name__ == "__main__":
    main()
)PY";

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_outputs: cannot open " + path.string());
    out << content;
    if (!out) throw std::runtime_error("emit_outputs: write failed for " + path.string());
}

} // namespace

void emit_outputs(const MetricsTable& table, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw std::runtime_error("emit_outputs: cannot create directory " + out_dir + ": " +
                                 ec.message());
    write_file(std::filesystem::path(out_dir) / "metrics.csv", to_csv(table));
    write_file(std::filesystem::path(out_dir) / "plot_metrics.py", kPlotScript);
}

} // namespace ranging
