// Python bindings for the ranging library: the signal model, the detector
// and estimator chain, and the Monte Carlo harness.
#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ranging/harness.hpp"

namespace py = pybind11;
using namespace ranging;

namespace {

py::array_t<std::complex<double>> matrix_to_numpy(const ComplexMatrix& m) {
    py::array_t<std::complex<double>> out({m.rows(), m.cols()});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) view(i, j) = m(i, j);
    return out;
}

py::array_t<std::complex<double>> vector_to_numpy(const ComplexVector& v) {
    py::array_t<std::complex<double>> out(v.size());
    auto view = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < v.size(); ++i) view(i) = v[i];
    return out;
}

ComplexMatrix numpy_to_matrix(const py::array_t<std::complex<double>>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-d complex array");
    ComplexMatrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
    auto view = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < arr.shape(0); ++i)
        for (py::ssize_t j = 0; j < arr.shape(1); ++j) m(i, j) = view(i, j);
    return m;
}

} // namespace

PYBIND11_MODULE(ofdma_ranging, m) {
    m.doc() = "OFDMA initial-ranging simulator: subspace code detection, CFO estimation "
              "and least-squares timing recovery";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DecouplingError>(m, "DecouplingError", PyExc_RuntimeError);

    py::class_<RangingPlan>(m, "RangingPlan")
        .def(py::init<>())
        .def_readwrite("n", &RangingPlan::n)
        .def_readwrite("q", &RangingPlan::q)
        .def_readwrite("r", &RangingPlan::r)
        .def_readwrite("v", &RangingPlan::v)
        .def_readwrite("m", &RangingPlan::m)
        .def_readwrite("n_g", &RangingPlan::n_g)
        .def_readwrite("n_gd", &RangingPlan::n_gd)
        .def_readwrite("theta_max", &RangingPlan::theta_max)
        .def_readwrite("l", &RangingPlan::l)
        .def_readwrite("channel_decay", &RangingPlan::channel_decay)
        .def("n_t", &RangingPlan::n_t)
        .def("n_r", &RangingPlan::n_r)
        .def("validate", &RangingPlan::validate);

    py::class_<SeededStream>(m, "SeededStream")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed") = 0,
             py::arg("stream") = 0)
        .def_readwrite("seed", &SeededStream::seed)
        .def_readwrite("stream", &SeededStream::stream);

    py::class_<CodeBook>(m, "CodeBook")
        .def_readonly("m", &CodeBook::m)
        .def("size", &CodeBook::size)
        .def("code", [](const CodeBook& b, int k) { return vector_to_numpy(b.code(k)); });

    py::class_<ChannelProfile>(m, "ChannelProfile")
        .def_static("exponential", &ChannelProfile::exponential, py::arg("l"), py::arg("decay"))
        .def_readonly("l", &ChannelProfile::l)
        .def_readonly("decay", &ChannelProfile::decay)
        .def_readonly("sigma_h2", &ChannelProfile::sigma_h2);

    py::class_<UserTruth>(m, "UserTruth")
        .def(py::init([](int code, int theta, double epsilon, ComplexVector taps) {
                 UserTruth u;
                 u.code_index = code;
                 u.theta = theta;
                 u.epsilon = epsilon;
                 u.taps = std::move(taps);
                 return u;
             }),
             py::arg("code_index"), py::arg("theta"), py::arg("epsilon"), py::arg("taps"))
        .def_readwrite("code_index", &UserTruth::code_index)
        .def_readwrite("theta", &UserTruth::theta)
        .def_readwrite("epsilon", &UserTruth::epsilon)
        .def_property(
            "taps", [](const UserTruth& u) { return vector_to_numpy(u.taps); },
            [](UserTruth& u, ComplexVector taps) { u.taps = std::move(taps); })
        .def("omega", &UserTruth::omega, py::arg("n"));

    py::class_<SubchannelObservation>(m, "SubchannelObservation")
        .def_readonly("subchannel", &SubchannelObservation::subchannel)
        .def_readonly("bins", &SubchannelObservation::bins)
        .def_property_readonly(
            "matrix", [](const SubchannelObservation& o) { return matrix_to_numpy(o.y); })
        .def("bin_vector",
             [](const SubchannelObservation& o, int col) {
                 return vector_to_numpy(o.bin_vector(col));
             })
        .def("blocks", &SubchannelObservation::blocks)
        .def("bin_count", &SubchannelObservation::bin_count);

    py::enum_<OracleMode>(m, "OracleMode")
        .value("exact", OracleMode::exact)
        .value("approx", OracleMode::approx);

    m.def("subcarrier_index", &subcarrier_index, py::arg("q"), py::arg("r"), py::arg("nu"),
          py::arg("plan"));
    m.def("subchannel_bins", &subchannel_bins, py::arg("plan"), py::arg("r"));
    m.def("fourier_codebook", &fourier_codebook, py::arg("m"));
    m.def("draw_channel", [](const ChannelProfile& p, const SeededStream& s) {
        return vector_to_numpy(draw_channel(p, s));
    });
    m.def("channel_frequency_response", &channel_frequency_response, py::arg("taps"),
          py::arg("bin"), py::arg("n"));
    m.def("ranging_signature", [](const UserTruth& u, const RangingPlan& plan, int r) {
        return vector_to_numpy(ranging_signature(u, plan, r));
    });
    m.def(
        "synthesize_uplink",
        [](const std::vector<UserTruth>& users, const RangingPlan& plan, int r, double noise_var,
           const SeededStream& stream) {
            return vector_to_numpy(synthesize_uplink(users, plan, r, noise_var, stream));
        },
        py::arg("users"), py::arg("plan"), py::arg("r"), py::arg("noise_var") = 0.0,
        py::arg("noise_stream") = SeededStream{});
    m.def(
        "receiver_frontend",
        [](const py::array_t<std::complex<double>>& samples, const RangingPlan& plan, int r) {
            if (samples.ndim() != 1) throw std::invalid_argument("expected 1-d samples");
            ComplexVector v(samples.data(), samples.data() + samples.size());
            return receiver_frontend(v, plan, r);
        },
        py::arg("samples"), py::arg("plan"), py::arg("r"));
    m.def("model_oracle", &model_oracle, py::arg("users"), py::arg("plan"), py::arg("r"),
          py::arg("mode") = OracleMode::exact);

    py::class_<CorrelationEstimate>(m, "CorrelationEstimate")
        .def_property_readonly(
            "r_hat", [](const CorrelationEstimate& c) { return matrix_to_numpy(c.r_hat); })
        .def_property_readonly(
            "r_tilde", [](const CorrelationEstimate& c) { return matrix_to_numpy(c.r_tilde); })
        .def_readonly("snapshots", &CorrelationEstimate::snapshots);

    py::class_<NoiseSubspace>(m, "NoiseSubspace")
        .def_readonly("k_hat", &NoiseSubspace::k_hat)
        .def_readonly("eigenvalues", &NoiseSubspace::eigenvalues)
        .def_property_readonly(
            "eigenvectors", [](const NoiseSubspace& n) { return matrix_to_numpy(n.eigenvectors); })
        .def_readonly("n_t", &NoiseSubspace::n_t);

    py::class_<CfoSearch>(m, "CfoSearch")
        .def(py::init([](double bound, double step, bool refine) {
                 CfoSearch s;
                 s.eps_bound = bound;
                 s.eps_step = step;
                 s.refine = refine;
                 return s;
             }),
             py::arg("eps_bound") = 0.075, py::arg("eps_step") = 2e-4, py::arg("refine") = true)
        .def_readwrite("eps_bound", &CfoSearch::eps_bound)
        .def_readwrite("eps_step", &CfoSearch::eps_step)
        .def_readwrite("refine", &CfoSearch::refine);

    py::class_<CodeEstimate>(m, "CodeEstimate")
        .def_readonly("code_index", &CodeEstimate::code_index)
        .def_readonly("omega_hat", &CodeEstimate::omega_hat)
        .def_readonly("eps_hat", &CodeEstimate::eps_hat)
        .def_readonly("peak", &CodeEstimate::peak);

    py::class_<DetectionResult>(m, "DetectionResult")
        .def_readonly("k_hat", &DetectionResult::k_hat)
        .def_readonly("detected", &DetectionResult::detected)
        .def("detected_codes", &DetectionResult::detected_codes);

    m.def("sample_correlation", &sample_correlation, py::arg("obs"));
    m.def("mdl_order", &mdl_order, py::arg("eigenvalues"), py::arg("snapshots"), py::arg("m"));
    m.def("noise_subspace", &noise_subspace, py::arg("corr"), py::arg("n_t"));
    m.def(
        "music_spectrum",
        [](const py::array_t<std::complex<double>>& code, const NoiseSubspace& noise,
           double omega) {
            ComplexVector c(code.data(), code.data() + code.size());
            return music_spectrum(c, noise, omega);
        },
        py::arg("code"), py::arg("noise"), py::arg("omega"));
    m.def(
        "estimate_cfo",
        [](const py::array_t<std::complex<double>>& code, const NoiseSubspace& noise,
           const CfoSearch& search, int n) {
            ComplexVector c(code.data(), code.data() + code.size());
            const CfoEstimate est = estimate_cfo(c, noise, search, n);
            return py::make_tuple(est.omega_hat, est.peak);
        },
        py::arg("code"), py::arg("noise"), py::arg("search"), py::arg("n"));
    m.def("detect_codes", &detect_codes, py::arg("obs"), py::arg("codebook"), py::arg("search"),
          py::arg("plan"));

    py::class_<DecoupledSignatures>(m, "DecoupledSignatures")
        .def_readonly("code_indices", &DecoupledSignatures::code_indices)
        .def_readonly("omega_hats", &DecoupledSignatures::omega_hats)
        .def_property_readonly(
            "freq",
            [](const DecoupledSignatures& s) {
                py::list out;
                for (const ComplexMatrix& mat : s.freq) out.append(matrix_to_numpy(mat));
                return out;
            })
        .def("users", &DecoupledSignatures::users);

    py::enum_<RcteMode>(m, "RcteMode")
        .value("generic", RcteMode::generic)
        .value("closed_form_v2", RcteMode::closed_form_v2);

    py::class_<TimingResult>(m, "TimingResult")
        .def_readonly("theta_hat", &TimingResult::theta_hat)
        .def_readonly("beta_hat", &TimingResult::beta_hat)
        .def_readonly("p_hat", &TimingResult::p_hat);

    m.def("decouple_signatures", &decouple_signatures, py::arg("obs"), py::arg("detection"),
          py::arg("codebook"), py::arg("plan"), py::arg("l_rx") = 0);
    m.def("lste_metric", &lste_metric, py::arg("sig"), py::arg("user"), py::arg("theta"));
    m.def("lste_estimate", &lste_estimate, py::arg("sig"), py::arg("user"), py::arg("theta_max"));
    m.def("rcte_energy_metric", &rcte_energy_metric, py::arg("sig"), py::arg("user"),
          py::arg("beta"));
    m.def("rcte_cross_metric", &rcte_cross_metric, py::arg("sig"), py::arg("user"),
          py::arg("beta"), py::arg("p"));
    m.def("rcte_estimate", &rcte_estimate, py::arg("sig"), py::arg("user"), py::arg("theta_max"),
          py::arg("mode") = RcteMode::closed_form_v2);
    m.def(
        "estimate_cir",
        [](const DecoupledSignatures& sig, int user, int theta) {
            return vector_to_numpy(estimate_cir(sig, user, theta).taps);
        },
        py::arg("sig"), py::arg("user"), py::arg("theta_hat"));
    m.def(
        "flm_metric",
        [](const SubchannelObservation& obs, const py::array_t<std::complex<double>>& code) {
            ComplexVector c(code.data(), code.data() + code.size());
            return flm_metric(obs, c);
        },
        py::arg("obs"), py::arg("code"));
    m.def("flm_detect", &flm_detect, py::arg("obs"), py::arg("codebook"),
          py::arg("noise_var_est"), py::arg("threshold_factor") = 4.0);

    // Harness.
    py::enum_<Estimator>(m, "Estimator")
        .value("lste", Estimator::lste)
        .value("rcte", Estimator::rcte)
        .value("both", Estimator::both);
    py::enum_<Detector>(m, "Detector")
        .value("mcd", Detector::mcd)
        .value("flm", Detector::flm)
        .value("both", Detector::both);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readwrite("plan", &ExperimentConfig::plan)
        .def_readwrite("k_users", &ExperimentConfig::k_users)
        .def_readwrite("omega_max", &ExperimentConfig::omega_max)
        .def_readwrite("snr_db", &ExperimentConfig::snr_db)
        .def_readwrite("trials", &ExperimentConfig::trials)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("estimator", &ExperimentConfig::estimator)
        .def_readwrite("detector", &ExperimentConfig::detector)
        .def_readwrite("threads", &ExperimentConfig::threads)
        .def("validate", &ExperimentConfig::validate);

    py::class_<UserOutcome>(m, "UserOutcome")
        .def_readonly("code", &UserOutcome::code)
        .def_readonly("theta", &UserOutcome::theta)
        .def_readonly("epsilon", &UserOutcome::epsilon)
        .def_readonly("mcd_matched", &UserOutcome::mcd_matched)
        .def_readonly("eps_hat", &UserOutcome::eps_hat)
        .def_readonly("theta_lste", &UserOutcome::theta_lste)
        .def_readonly("theta_rcte", &UserOutcome::theta_rcte)
        .def_readonly("err_lste", &UserOutcome::err_lste)
        .def_readonly("err_rcte", &UserOutcome::err_rcte);

    py::class_<TrialOutcome>(m, "TrialOutcome")
        .def_readonly("true_codes", &TrialOutcome::true_codes)
        .def_readonly("k_hat", &TrialOutcome::k_hat)
        .def_readonly("mcd_detected", &TrialOutcome::mcd_detected)
        .def_readonly("flm_detected", &TrialOutcome::flm_detected)
        .def_readonly("mcd_correct", &TrialOutcome::mcd_correct)
        .def_readonly("flm_correct", &TrialOutcome::flm_correct)
        .def_readonly("users", &TrialOutcome::users);

    py::class_<MetricsRow>(m, "MetricsRow")
        .def_readonly("snr_db", &MetricsRow::snr_db)
        .def_readonly("detector", &MetricsRow::detector)
        .def_readonly("estimator", &MetricsRow::estimator)
        .def_readonly("pf", &MetricsRow::pf)
        .def_readonly("pf_ci95", &MetricsRow::pf_ci95)
        .def_readonly("cfo_rmse", &MetricsRow::cfo_rmse)
        .def_readonly("cfo_rmse_ci95", &MetricsRow::cfo_rmse_ci95)
        .def_readonly("p_eps", &MetricsRow::p_eps)
        .def_readonly("p_eps_ci95", &MetricsRow::p_eps_ci95);

    py::class_<MetricsTable>(m, "MetricsTable").def_readonly("rows", &MetricsTable::rows);

    m.def("parse_config", &parse_config, py::arg("text"));
    m.def("render_config", &render_config, py::arg("cfg"));
    m.def("run_trial", &run_trial, py::arg("cfg"), py::arg("snr_db"), py::arg("trial_index"));
    m.def("timing_error_event", &timing_error_event, py::arg("theta_hat"), py::arg("theta"),
          py::arg("n_gd"), py::arg("l"));
    m.def("sweep", &sweep, py::arg("cfg"));
    m.def("to_csv", &to_csv, py::arg("table"));
    m.def("emit_outputs", &emit_outputs, py::arg("table"), py::arg("out_dir"));

    // Numerics.
    m.def(
        "dft",
        [](const py::array_t<std::complex<double>>& x, bool inverse) {
            ComplexVector v(x.data(), x.data() + x.size());
            return vector_to_numpy(dft(v, inverse));
        },
        py::arg("x"), py::arg("inverse") = false);
    m.def(
        "hermitian_eig",
        [](const py::array_t<std::complex<double>>& a) {
            const EigenDecomposition ed = hermitian_eig(numpy_to_matrix(a));
            return py::make_tuple(ed.eigenvalues, matrix_to_numpy(ed.eigenvectors));
        },
        py::arg("a"));
    m.def(
        "sample_cgaussian",
        [](const SeededStream& s, std::size_t n, double variance) {
            return vector_to_numpy(sample_cgaussian(s, n, variance));
        },
        py::arg("stream"), py::arg("n"), py::arg("variance") = 1.0);
    m.def("sample_uniform", &sample_uniform, py::arg("stream"), py::arg("n"));
}
