#ifndef QWIRE_PHOTONICS_HPP
#define QWIRE_PHOTONICS_HPP

#include <cstdint>
#include <vector>

// Parametric physical-layer model for a classical-header / quantum-payload
// coexistence link: link budget, OOK header BER, WDM crosstalk leakage,
// chromatic dispersion spread, and analytic coincidence statistics (CC, AC,
// CAR) with an event-level Monte Carlo cross-check.

namespace qw::photonics {

inline constexpr double kPlanckJs = 6.62607015e-34;
inline constexpr double kLightSpeedMps = 299792458.0;

enum class HeaderMode { none, continuous, burst };

const char* to_string(HeaderMode m);

// Per-link impairments. attenuation_db covers VOA + fiber loss on the
// coexistence channel. injected_noise_rate_per_ns is the blind-spot knob:
// broadband noise photons in the quantum band, expressed as the rate the
// quantum detectors register (it enters no classical term).
struct ChannelState {
    double attenuation_db = 0.0;
    double length_km = 0.0;
    double dispersion_ps_nm_km = 17.0; // SMF-28
    double wdm_crosstalk_db = -50.0;
    double injected_noise_rate_per_ns = 0.0;
};

// Entangled-pair source. Heralding efficiencies are end-to-end: the
// probability that a generated pair photon produces a click, excluding the
// swept coexistence-channel loss (detector and local losses included).
struct PairSourceModel {
    double pair_rate_hz = 0.0;
    double signal_wavelength_nm = 1565.72;
    double header_wavelength_nm = 1561.42;
    double signal_bandwidth_nm = 40.0;
    double heralding_efficiency_signal = 0.015;
    double heralding_efficiency_idler = 0.015;
};

// Single-photon detection. `efficiency` is the effective acceptance of the
// quantum detection path for stray (non-pair) photons; pair photons carry
// their detection probability inside the heralding efficiencies.
struct DetectorModel {
    double efficiency = 1.0;
    double dark_count_rate_hz = 1000.0;
    double coincidence_window_ns = 2.0;
    bool gated = true;
    double gate_extinction_db = 0.0; // residual classical light in the payload slot
};

// Gaussian OOK receiver, anchored at BER = 1e-12 at sensitivity_dbm.
struct ReceiverModel {
    double sensitivity_dbm = -28.0;
    double noise_slope = 1.0; // Q scaling per dB of received power
};

struct DutyCycle {
    double header_us = 102.4;
    double payload_us = 1130.0;
    double period_us = 1232.4; // header + payload, ~1.23 ms

    double payload_fraction() const { return payload_us / period_us; }
};

struct CoincidenceStats {
    double cc_total = 0.0;
    double accidentals = 0.0;
    double car_linear = 0.0;
    double car_db = 0.0;
    double integration_s = 0.0;
    bool car_unbounded = false; // accidentals rounded to zero counts
};

struct LinkMetrics {
    double attenuation_db = 0.0;
    double header_ber = 0.0;
    double received_power_dbm = 0.0;
    CoincidenceStats stats;
    double noise_photon_rate_hz = 0.0; // populated by supervisory probes
};

// Q-factor giving BER = 1e-12 under BER = erfc(Q/sqrt(2))/2 (~7.034).
double q_for_ber(double ber);
double ber_for_q(double q);

double received_power_dbm(double launch_dbm, const ChannelState& ch);
double header_ber(double rx_dbm, const ReceiverModel& rx);

// Inverse of header_ber along the attenuation axis; clamps to [0, +inf).
double attenuation_for_ber(double ber, const ReceiverModel& rx, double launch_dbm);

// Classical power leaking through the WDM demux into the quantum band,
// as a photon rate at the given wavelength.
double crosstalk_photon_rate(double launch_dbm, const ChannelState& ch, double wavelength_nm);

double dispersion_spread_ps(const ChannelState& ch, double bandwidth_nm);

// Fraction of true pairs still inside the coincidence window after
// dispersion: min(1, window / max(window, spread)).
double capture_fraction(double spread_ps, double window_ns);

// Stray-photon rate registered by the signal detector during the payload
// slot (crosstalk x mode exposure x detector acceptance + injected noise).
double payload_slot_noise_rate(const PairSourceModel& src, const DetectorModel& det,
                               const ChannelState& ch, HeaderMode mode, double launch_dbm);

CoincidenceStats coincidence_stats(const PairSourceModel& src, const DetectorModel& det,
                                   const ChannelState& ch, HeaderMode mode, double launch_dbm,
                                   const DutyCycle& duty, double integration_s);

// Event-level Poisson oracle for the analytic CC/AC model: samples arrival
// streams and pairs clicks inside the window. Counts, not expectations.
CoincidenceStats monte_carlo_coincidences(const PairSourceModel& src, const DetectorModel& det,
                                          const ChannelState& ch, HeaderMode mode,
                                          double launch_dbm, const DutyCycle& duty,
                                          double integration_s, std::uint64_t seed);

std::vector<LinkMetrics> car_vs_attenuation_sweep(const PairSourceModel& src,
                                                  const DetectorModel& det,
                                                  const ChannelState& base,
                                                  const ReceiverModel& rx, HeaderMode mode,
                                                  double launch_dbm, const DutyCycle& duty,
                                                  double integration_s,
                                                  const std::vector<double>& attenuations_db);

// dB attenuations and km lengths add along a path; leak fractions and
// injected noise add linearly; dispersion coefficient is length-weighted.
ChannelState compose(const ChannelState& a, const ChannelState& b);

struct CalibrationAnchors {
    double car_none_db = 16.0;
    double car_continuous_db = 3.7;
    double car_burst_db = 12.6;
    double launch_dbm = -21.0;
    double wdm_crosstalk_db = -50.0;
    double coincidence_window_ns = 2.0;
    double heralding_efficiency = 0.015;
    double dark_count_rate_hz = 1000.0;
};

struct Calibration {
    PairSourceModel source;
    DetectorModel detector;
    ReceiverModel receiver;
    CalibrationAnchors anchors;
};

// Closed-form fit of {pair_rate, detector efficiency, gate extinction} to
// the three CAR anchors; one parameter set satisfies all three.
Calibration calibrate(const CalibrationAnchors& anchors);

// The shipped default parameter set (calibrate() on default anchors).
const Calibration& calibrated_defaults();

} // namespace qw::photonics

#endif
