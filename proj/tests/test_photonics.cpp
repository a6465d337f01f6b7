#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qwire/photonics.hpp"

using namespace qw::photonics;
using doctest::Approx;

namespace {

// Independent oracles, written from the model definitions.

double oracle_q_for_ber(double ber) {
    // bisect 0.5*erfc(q/sqrt 2) = ber
    double lo = 0.0, hi = 45.0;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(mid / std::sqrt(2.0)) > ber)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double oracle_crosstalk_rate(double launch_dbm, double att_db, double xtalk_db,
                             double wavelength_nm) {
    const double p_w = 1e-3 * std::pow(10.0, (launch_dbm - att_db + xtalk_db) / 10.0);
    const double e_photon = 6.62607015e-34 * 299792458.0 / (wavelength_nm * 1e-9);
    return p_w / e_photon;
}

} // namespace

TEST_CASE("Q/BER inversion against the bisection oracle") {
    CHECK(q_for_ber(1e-12) == Approx(oracle_q_for_ber(1e-12)).epsilon(1e-9));
    CHECK(q_for_ber(1e-12) == Approx(7.0344838).epsilon(1e-6)); // frozen
    for (double ber : {1e-3, 1e-6, 1e-9, 1e-12, 1e-15})
        CHECK(ber_for_q(q_for_ber(ber)) == Approx(ber).epsilon(1e-6));
    CHECK(q_for_ber(0.5) == 0.0);
}

TEST_CASE("header BER hinges on the sensitivity anchor") {
    ReceiverModel rx; // -28 dBm, slope 1
    CHECK(header_ber(-28.0, rx) == Approx(1e-12).epsilon(1e-6));
    CHECK(header_ber(-27.0, rx) < 1e-12);
    CHECK(header_ber(-29.0, rx) > 1e-12);
    // inversion round-trips along the attenuation axis
    for (double att : {3.0, 7.0, 12.0, 15.0}) {
        const double ber = header_ber(-28.0 + 15.0 - att, rx); // launch -13 dBm
        CHECK(attenuation_for_ber(ber, rx, -13.0) == Approx(att).epsilon(1e-6));
    }
}

TEST_CASE("crosstalk leakage photon rate matches the hand computation") {
    ChannelState ch; // att 0, -50 dB crosstalk
    const double rate = crosstalk_photon_rate(-21.0, ch, 1561.42);
    CHECK(rate == Approx(oracle_crosstalk_rate(-21.0, 0.0, -50.0, 1561.42)).epsilon(1e-12));
    CHECK(rate == Approx(6.2437e8).epsilon(1e-3)); // frozen: ~6.24e8 photons/s

    ch.attenuation_db = 10.0;
    CHECK(crosstalk_photon_rate(-21.0, ch, 1561.42) == Approx(rate / 10.0).epsilon(1e-12));
}

TEST_CASE("dispersion spread and capture fraction") {
    ChannelState ch;
    ch.length_km = 5.0;
    CHECK(dispersion_spread_ps(ch, 40.0) == Approx(17.0 * 5.0 * 40.0)); // 3400 ps
    CHECK(capture_fraction(3400.0, 2.0) == Approx(2000.0 / 3400.0));
    CHECK(capture_fraction(100.0, 2.0) == 1.0);
    CHECK(capture_fraction(0.0, 2.0) == 1.0);
}

TEST_CASE("calibration reproduces all three CAR anchors from one parameter set") {
    const Calibration& cal = calibrated_defaults();
    ChannelState ch;
    DutyCycle duty;
    const auto car = [&](HeaderMode m) {
        return coincidence_stats(cal.source, cal.detector, ch, m, -21.0, duty, 100.0).car_db;
    };
    CHECK(car(HeaderMode::none) == Approx(16.0).epsilon(1e-9));
    CHECK(car(HeaderMode::continuous) == Approx(3.7).epsilon(1e-9));
    CHECK(car(HeaderMode::burst) == Approx(12.6).epsilon(1e-9));
}

TEST_CASE("frozen calibration constants") {
    const Calibration& cal = calibrated_defaults();
    CHECK(cal.source.pair_rate_hz == Approx(12749357.543).epsilon(1e-8));
    CHECK(cal.detector.efficiency == Approx(0.00858166110767277).epsilon(1e-9));
    CHECK(cal.detector.gate_extinction_db == Approx(13.45893406228969).epsilon(1e-9));
    CHECK(cal.detector.dark_count_rate_hz == 1000.0);
    CHECK(cal.source.heralding_efficiency_signal == 0.015);
}

TEST_CASE("calibration rejects unordered anchors") {
    CalibrationAnchors a;
    a.car_burst_db = 17.0; // burst above none
    CHECK_THROWS_AS(calibrate(a), std::invalid_argument);
}

TEST_CASE("CAR falls and BER rises monotonically with attenuation, in every mode") {
    const Calibration& cal = calibrated_defaults();
    std::vector<double> atts;
    for (int a = 0; a <= 15; ++a)
        atts.push_back(a);
    DutyCycle duty;
    for (HeaderMode m : {HeaderMode::none, HeaderMode::continuous, HeaderMode::burst}) {
        const auto rows = car_vs_attenuation_sweep(cal.source, cal.detector, ChannelState{},
                                                   cal.receiver, m, -28.0, duty, 100.0, atts);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].header_ber >= rows[i - 1].header_ber);
            CHECK(rows[i].stats.car_db <= rows[i - 1].stats.car_db);
        }
    }
}

TEST_CASE("mode ordering at the calibration point: none > burst > continuous") {
    const Calibration& cal = calibrated_defaults();
    ChannelState ch;
    DutyCycle duty;
    const auto car = [&](HeaderMode m) {
        return coincidence_stats(cal.source, cal.detector, ch, m, -21.0, duty, 100.0).car_db;
    };
    CHECK(car(HeaderMode::none) > car(HeaderMode::burst));
    CHECK(car(HeaderMode::burst) > car(HeaderMode::continuous));
}

TEST_CASE("blind spot: injected noise kills CAR, leaves BER bit-identical") {
    const Calibration& cal = calibrated_defaults();
    DutyCycle duty;
    ChannelState clean;
    ChannelState noisy;
    noisy.injected_noise_rate_per_ns = 1e-2;

    const double ber_clean = header_ber(received_power_dbm(-21.0, clean), cal.receiver);
    const double ber_noisy = header_ber(received_power_dbm(-21.0, noisy), cal.receiver);
    CHECK(ber_clean == ber_noisy); // bit-identical

    const auto s_clean =
        coincidence_stats(cal.source, cal.detector, clean, HeaderMode::burst, -21.0, duty, 10.0);
    const auto s_noisy =
        coincidence_stats(cal.source, cal.detector, noisy, HeaderMode::burst, -21.0, duty, 10.0);
    CHECK(s_clean.car_db > 12.0);
    CHECK(s_noisy.car_db < 3.0);
}

TEST_CASE("probe noise rate sees the injected photons directly") {
    const Calibration& cal = calibrated_defaults();
    ChannelState ch;
    ch.injected_noise_rate_per_ns = 1e-2; // 1e7 photons/s
    const double rate =
        payload_slot_noise_rate(cal.source, cal.detector, ch, HeaderMode::burst, -21.0);
    CHECK(rate == Approx(1e7).epsilon(0.05));
    // none mode sees no classical leakage at all
    ch.injected_noise_rate_per_ns = 0.0;
    CHECK(payload_slot_noise_rate(cal.source, cal.detector, ch, HeaderMode::none, -21.0) == 0.0);
}

TEST_CASE("coincidence statistics edge cases") {
    const Calibration& cal = calibrated_defaults();
    DutyCycle duty;
    CHECK_THROWS_AS(coincidence_stats(cal.source, cal.detector, ChannelState{},
                                      HeaderMode::none, -21.0, duty, 0.0),
                    std::invalid_argument);
    // zero accidentals -> flagged +inf sentinel, not an error
    PairSourceModel src = cal.source;
    DetectorModel det = cal.detector;
    det.dark_count_rate_hz = 0.0;
    ChannelState quiet;
    quiet.wdm_crosstalk_db = -300.0;
    const auto s = coincidence_stats(src, det, quiet, HeaderMode::none, -21.0, duty, 1e-4);
    CHECK(s.car_unbounded);
    CHECK(std::isinf(s.car_db));
    CHECK(s.cc_total > 0.0);
}

TEST_CASE("channel composition: losses add, dispersion is length-weighted") {
    ChannelState a;
    a.attenuation_db = 2.0;
    a.length_km = 1.0;
    a.dispersion_ps_nm_km = 17.0;
    a.wdm_crosstalk_db = -50.0;
    a.injected_noise_rate_per_ns = 1e-3;
    ChannelState b;
    b.attenuation_db = 3.0;
    b.length_km = 3.0;
    b.dispersion_ps_nm_km = 21.0;
    b.wdm_crosstalk_db = -47.0;

    const ChannelState c = compose(a, b);
    CHECK(c.attenuation_db == Approx(5.0));
    CHECK(c.length_km == Approx(4.0));
    CHECK(c.dispersion_ps_nm_km == Approx((17.0 + 3 * 21.0) / 4.0));
    CHECK(std::pow(10, c.wdm_crosstalk_db / 10) ==
          Approx(std::pow(10, -5.0) + std::pow(10, -4.7)).epsilon(1e-12));
    CHECK(c.injected_noise_rate_per_ns == Approx(1e-3));
    // identity element used for the accumulated-channel initial state
    ChannelState ident;
    ident.wdm_crosstalk_db = -1e9;
    ident.injected_noise_rate_per_ns = 0.0;
    ident.attenuation_db = 0.0;
    ident.length_km = 0.0;
    const ChannelState d = compose(ident, a);
    CHECK(d.attenuation_db == Approx(a.attenuation_db));
    CHECK(d.wdm_crosstalk_db == Approx(a.wdm_crosstalk_db).epsilon(1e-9));
}

TEST_CASE("Monte Carlo oracle agrees with the analytic model within 3 sigma") {
    const Calibration& cal = calibrated_defaults();
    DutyCycle duty;
    ChannelState ch;
    ch.attenuation_db = 6.0;
    const double T = 0.5;
    const auto analytic =
        coincidence_stats(cal.source, cal.detector, ch, HeaderMode::burst, -28.0, duty, T);
    const auto mc = monte_carlo_coincidences(cal.source, cal.detector, ch, HeaderMode::burst,
                                             -28.0, duty, T, 99);
    CHECK(std::abs(mc.cc_total - analytic.cc_total) <= 3.0 * std::sqrt(analytic.cc_total) + 1);
    CHECK(std::abs(mc.accidentals - analytic.accidentals) <=
          3.0 * std::sqrt(analytic.accidentals) + 1);
}

TEST_CASE("Monte Carlo reproduces the dispersion capture fraction") {
    const Calibration& cal = calibrated_defaults();
    DutyCycle duty;
    ChannelState ch;
    ch.length_km = 5.0; // capture 2/3.4
    const double T = 0.5;
    const auto with_disp =
        monte_carlo_coincidences(cal.source, cal.detector, ch, HeaderMode::none, -21.0, duty, T, 5);
    ChannelState flat;
    const auto without =
        monte_carlo_coincidences(cal.source, cal.detector, flat, HeaderMode::none, -21.0, duty, T, 5);
    const double ratio = (with_disp.cc_total - with_disp.accidentals) /
                         (without.cc_total - without.accidentals);
    CHECK(ratio == Approx(2000.0 / 3400.0).epsilon(0.05));
}

TEST_CASE("sweep rejects an empty grid") {
    const Calibration& cal = calibrated_defaults();
    CHECK_THROWS_AS(car_vs_attenuation_sweep(cal.source, cal.detector, ChannelState{},
                                             cal.receiver, HeaderMode::burst, -28.0, DutyCycle{},
                                             1.0, {}),
                    std::invalid_argument);
}
