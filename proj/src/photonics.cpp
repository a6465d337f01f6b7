#include "qwire/photonics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace qw::photonics {

namespace {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double photon_energy_j(double wavelength_nm) {
    return kPlanckJs * kLightSpeedMps / (wavelength_nm * 1e-9);
}

// Exposure of the signal detector to classical header light during the
// payload slot, relative to the full header power at the demux output.
double header_exposure(HeaderMode mode, const DetectorModel& det) {
    switch (mode) {
    case HeaderMode::none: return 0.0;
    case HeaderMode::continuous: return 1.0;
    case HeaderMode::burst:
        return det.gated ? db_to_linear(-det.gate_extinction_db) : 1.0;
    }
    return 0.0;
}

} // namespace

const char* to_string(HeaderMode m) {
    switch (m) {
    case HeaderMode::none: return "none";
    case HeaderMode::continuous: return "continuous";
    case HeaderMode::burst: return "burst";
    }
    return "?";
}

double ber_for_q(double q) {
    return 0.5 * std::erfc(q / std::sqrt(2.0));
}

double q_for_ber(double ber) {
    if (ber >= 0.5)
        return 0.0;
    double lo = 0.0, hi = 45.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (ber_for_q(mid) > ber)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double received_power_dbm(double launch_dbm, const ChannelState& ch) {
    return launch_dbm - ch.attenuation_db;
}

double header_ber(double rx_dbm, const ReceiverModel& rx) {
    static const double q12 = q_for_ber(1e-12);
    const double q = q12 * std::pow(10.0, rx.noise_slope * (rx_dbm - rx.sensitivity_dbm) / 20.0);
    return ber_for_q(q);
}

double attenuation_for_ber(double ber, const ReceiverModel& rx, double launch_dbm) {
    static const double q12 = q_for_ber(1e-12);
    const double clamped = std::clamp(ber, 1e-300, 0.499999);
    const double q = q_for_ber(clamped);
    const double rx_dbm = rx.sensitivity_dbm + 20.0 * std::log10(q / q12) / rx.noise_slope;
    return std::max(0.0, launch_dbm - rx_dbm);
}

double crosstalk_photon_rate(double launch_dbm, const ChannelState& ch, double wavelength_nm) {
    const double leak_dbm = launch_dbm - ch.attenuation_db + ch.wdm_crosstalk_db;
    const double leak_w = 1e-3 * db_to_linear(leak_dbm);
    return leak_w / photon_energy_j(wavelength_nm);
}

double dispersion_spread_ps(const ChannelState& ch, double bandwidth_nm) {
    return ch.dispersion_ps_nm_km * ch.length_km * bandwidth_nm;
}

double capture_fraction(double spread_ps, double window_ns) {
    const double window_ps = window_ns * 1e3;
    return std::min(1.0, window_ps / std::max(window_ps, spread_ps));
}

double payload_slot_noise_rate(const PairSourceModel& src, const DetectorModel& det,
                               const ChannelState& ch, HeaderMode mode, double launch_dbm) {
    const double leak = crosstalk_photon_rate(launch_dbm, ch, src.header_wavelength_nm);
    return det.efficiency * leak * header_exposure(mode, det) +
           ch.injected_noise_rate_per_ns * 1e9;
}

CoincidenceStats coincidence_stats(const PairSourceModel& src, const DetectorModel& det,
                                   const ChannelState& ch, HeaderMode mode, double launch_dbm,
                                   const DutyCycle& duty, double integration_s) {
    if (integration_s <= 0.0)
        throw std::invalid_argument("integration_s must be positive");

    const double loss = db_to_linear(-ch.attenuation_db);
    const double tau_s = det.coincidence_window_ns * 1e-9;
    const double exposure_s = integration_s * (det.gated ? duty.payload_fraction() : 1.0);

    const double singles_signal = src.pair_rate_hz * src.heralding_efficiency_signal * loss +
                                  payload_slot_noise_rate(src, det, ch, mode, launch_dbm) +
                                  det.dark_count_rate_hz;
    const double singles_idler =
        src.pair_rate_hz * src.heralding_efficiency_idler + det.dark_count_rate_hz;

    const double cf = capture_fraction(dispersion_spread_ps(ch, src.signal_bandwidth_nm),
                                       det.coincidence_window_ns);
    const double true_rate = src.pair_rate_hz * src.heralding_efficiency_signal *
                             src.heralding_efficiency_idler * loss * cf;
    const double accidental_rate = singles_signal * singles_idler * tau_s;

    CoincidenceStats out;
    out.integration_s = integration_s;
    out.accidentals = accidental_rate * exposure_s;
    out.cc_total = (true_rate + accidental_rate) * exposure_s;
    if (out.accidentals < 0.5) {
        out.car_unbounded = true;
        out.car_linear = std::numeric_limits<double>::infinity();
        out.car_db = std::numeric_limits<double>::infinity();
    } else {
        out.car_linear = out.cc_total / out.accidentals;
        out.car_db = 10.0 * std::log10(out.car_linear);
    }
    return out;
}

CoincidenceStats monte_carlo_coincidences(const PairSourceModel& src, const DetectorModel& det,
                                          const ChannelState& ch, HeaderMode mode,
                                          double launch_dbm, const DutyCycle& duty,
                                          double integration_s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double loss = db_to_linear(-ch.attenuation_db);
    const double tau_s = det.coincidence_window_ns * 1e-9;
    const double span_s = integration_s * (det.gated ? duty.payload_fraction() : 1.0);
    const double spread_s = dispersion_spread_ps(ch, src.signal_bandwidth_nm) * 1e-12;

    const double p_sig = src.heralding_efficiency_signal * loss;
    const double p_idl = src.heralding_efficiency_idler;

    std::vector<double> sig, idl;
    sig.reserve(static_cast<std::size_t>(src.pair_rate_hz * p_sig * span_s * 1.2) + 64);
    idl.reserve(static_cast<std::size_t>(src.pair_rate_hz * p_idl * span_s * 1.2) + 64);

    double true_cc = 0.0;

    // Pair arrivals: the signal photon picks up dispersion jitter, the idler
    // stays local. A pair survives as a true coincidence if the jitter keeps
    // it inside the window.
    if (src.pair_rate_hz > 0.0) {
        std::exponential_distribution<double> gap(src.pair_rate_hz);
        for (double t = gap(rng); t < span_s; t += gap(rng)) {
            const bool s_click = unit(rng) < p_sig;
            const bool i_click = unit(rng) < p_idl;
            double ts = t;
            if (s_click && spread_s > 0.0)
                ts += (unit(rng) - 0.5) * spread_s;
            if (s_click)
                sig.push_back(ts);
            if (i_click)
                idl.push_back(t);
            if (s_click && i_click && std::abs(ts - t) <= tau_s / 2.0)
                true_cc += 1.0;
        }
    }

    const auto add_poisson_stream = [&](std::vector<double>& v, double rate) {
        if (rate <= 0.0)
            return;
        std::exponential_distribution<double> gap(rate);
        for (double t = gap(rng); t < span_s; t += gap(rng))
            v.push_back(t);
    };
    add_poisson_stream(sig, payload_slot_noise_rate(src, det, ch, mode, launch_dbm) +
                                det.dark_count_rate_hz);
    add_poisson_stream(idl, det.dark_count_rate_hz);

    std::sort(sig.begin(), sig.end());
    std::sort(idl.begin(), idl.end());

    // Windowed pairing: every (signal, idler) click pair within +-tau/2.
    double cc = 0.0;
    std::size_t lo = 0, hi = 0;
    for (const double ti : idl) {
        while (lo < sig.size() && sig[lo] < ti - tau_s / 2.0)
            ++lo;
        if (hi < lo)
            hi = lo;
        while (hi < sig.size() && sig[hi] <= ti + tau_s / 2.0)
            ++hi;
        cc += static_cast<double>(hi - lo);
    }

    CoincidenceStats out;
    out.integration_s = integration_s;
    out.cc_total = cc;
    out.accidentals = cc - true_cc;
    if (out.accidentals < 0.5) {
        out.car_unbounded = true;
        out.car_linear = std::numeric_limits<double>::infinity();
        out.car_db = std::numeric_limits<double>::infinity();
    } else {
        out.car_linear = out.cc_total / out.accidentals;
        out.car_db = 10.0 * std::log10(out.car_linear);
    }
    return out;
}

std::vector<LinkMetrics> car_vs_attenuation_sweep(const PairSourceModel& src,
                                                  const DetectorModel& det,
                                                  const ChannelState& base,
                                                  const ReceiverModel& rx, HeaderMode mode,
                                                  double launch_dbm, const DutyCycle& duty,
                                                  double integration_s,
                                                  const std::vector<double>& attenuations_db) {
    if (attenuations_db.empty())
        throw std::invalid_argument("attenuation sweep must be nonempty");
    std::vector<LinkMetrics> out;
    out.reserve(attenuations_db.size());
    for (const double att : attenuations_db) {
        ChannelState ch = base;
        ch.attenuation_db = att;
        LinkMetrics m;
        m.attenuation_db = att;
        m.received_power_dbm = received_power_dbm(launch_dbm, ch);
        m.header_ber = header_ber(m.received_power_dbm, rx);
        m.stats = coincidence_stats(src, det, ch, mode, launch_dbm, duty, integration_s);
        out.push_back(m);
    }
    return out;
}

ChannelState compose(const ChannelState& a, const ChannelState& b) {
    ChannelState out;
    out.attenuation_db = a.attenuation_db + b.attenuation_db;
    out.length_km = a.length_km + b.length_km;
    const double dl = a.dispersion_ps_nm_km * a.length_km + b.dispersion_ps_nm_km * b.length_km;
    out.dispersion_ps_nm_km = out.length_km > 0.0 ? dl / out.length_km : a.dispersion_ps_nm_km;
    out.wdm_crosstalk_db =
        10.0 * std::log10(db_to_linear(a.wdm_crosstalk_db) + db_to_linear(b.wdm_crosstalk_db));
    out.injected_noise_rate_per_ns = a.injected_noise_rate_per_ns + b.injected_noise_rate_per_ns;
    return out;
}

Calibration calibrate(const CalibrationAnchors& anchors) {
    const double tau_s = anchors.coincidence_window_ns * 1e-9;
    const double h = anchors.heralding_efficiency;
    const double dark = anchors.dark_count_rate_hz;
    const double r0 = db_to_linear(anchors.car_none_db) - 1.0;
    const double rc = db_to_linear(anchors.car_continuous_db) - 1.0;
    const double rb = db_to_linear(anchors.car_burst_db) - 1.0;
    if (r0 <= rb || rb <= rc || rc <= 0.0)
        throw std::invalid_argument("anchors must order none > burst > continuous");

    // With u = pair_rate * h the no-header anchor reads
    //   r0 = u * h / ((u + dark)^2 * tau)
    // a quadratic in u; the larger root is the photon-starved regime.
    const double k = r0 * tau_s;
    const double qa = k;
    const double qb = 2.0 * k * dark - h;
    const double qc = k * dark * dark;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0)
        throw std::runtime_error("calibration anchors infeasible for chosen efficiencies");
    const double u = (-qb + std::sqrt(disc)) / (2.0 * qa);
    const double singles = u + dark;

    ChannelState ref;
    ref.wdm_crosstalk_db = anchors.wdm_crosstalk_db;
    PairSourceModel src;
    src.heralding_efficiency_signal = h;
    src.heralding_efficiency_idler = h;
    src.pair_rate_hz = u / h;

    // Continuous anchor fixes the detected crosstalk rate; burst fixes the
    // residual fraction through the gate, i.e. the MZM extinction.
    const double leak = crosstalk_photon_rate(anchors.launch_dbm, ref, src.header_wavelength_nm);
    const double detected_xtalk = singles * (r0 / rc - 1.0);
    const double detected_burst = singles * (r0 / rb - 1.0);
    if (detected_xtalk > leak)
        throw std::runtime_error("crosstalk anchor requires noise acceptance > 1");

    DetectorModel det;
    det.coincidence_window_ns = anchors.coincidence_window_ns;
    det.dark_count_rate_hz = dark;
    det.efficiency = detected_xtalk / leak;
    det.gated = true;
    det.gate_extinction_db = -10.0 * std::log10(detected_burst / detected_xtalk);

    Calibration cal;
    cal.source = src;
    cal.detector = det;
    cal.receiver = ReceiverModel{};
    cal.anchors = anchors;
    return cal;
}

const Calibration& calibrated_defaults() {
    static const Calibration cal = calibrate(CalibrationAnchors{});
    return cal;
}

} // namespace qw::photonics
