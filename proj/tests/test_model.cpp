#include "photonlink/model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace photonlink;

namespace {
const EfficiencyCurveParams kRef{0.56, 9.3};
}

TEST_CASE("internal conversion efficiency") {
    CHECK(internal_conversion_efficiency(0.0, kRef) == 0.0);
    // ~50% at the 170 mW operating point
    CHECK(internal_conversion_efficiency(0.17, kRef) == Catch::Approx(0.50677).margin(2e-4));
    // exact maximum at sqrt(B*P) = pi/2
    const double p_peak = kRef.peak_pump_power();
    CHECK(internal_conversion_efficiency(p_peak, kRef) == Catch::Approx(0.56).margin(1e-12));
    CHECK_THROWS_AS(internal_conversion_efficiency(-0.1, kRef), std::invalid_argument);
}

TEST_CASE("efficiency is bounded and monotone up to the peak") {
    const double p_peak = kRef.peak_pump_power();
    double prev = -1.0;
    for (int i = 0; i <= 200; ++i) {
        const double p = p_peak * i / 200.0;
        const double eta = internal_conversion_efficiency(p, kRef);
        CHECK(eta >= 0.0);
        CHECK(eta <= kRef.amplitude_A + 1e-15);
        CHECK(eta >= prev - 1e-15);
        prev = eta;
    }
    // beyond the peak it stays bounded
    for (double p : {0.5, 1.0, 3.0})
        CHECK(internal_conversion_efficiency(p, kRef) <= kRef.amplitude_A + 1e-15);
}

TEST_CASE("chain efficiency") {
    ConversionStage st;
    st.input_coupling = 0.80;
    st.efficiency_params = kRef;
    st.pump_power = 0.17;
    st.output_coupling = 0.60;
    st.filter_transmittance = 0.14;
    CHECK(chain_efficiency(st) == Catch::Approx(0.03405).margin(5e-4));
    CHECK(chain_efficiency(st) > 0.030);
    CHECK(chain_efficiency(st) < 0.037);

    st.output_coupling = 0.0;
    CHECK(chain_efficiency(st) == 0.0);

    ConversionStage unity;
    unity.efficiency_params = {1.0, 1.0};
    unity.pump_power = unity.efficiency_params.peak_pump_power();
    CHECK(chain_efficiency(unity) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("predicted g2(0) from SBR") {
    CHECK(predicted_g2_zero({1.38, 1.0}) == Catch::Approx(0.66380).margin(1e-4));
    CHECK(predicted_g2_zero({1.53, 1.0}) == Catch::Approx(0.63429).margin(1e-4));
    CHECK(predicted_g2_zero({1632.0, 1.0}) == Catch::Approx(0.0012244).margin(1e-6));
    CHECK(predicted_g2_zero({0.0, 5.0}) == 1.0);   // pure background is Poissonian
    CHECK(predicted_g2_zero({10.0, 0.0}) == 0.0);  // ideal-source limit
}

TEST_CASE("predicted g2(0) is strictly decreasing in SBR and spans (0,1)") {
    double prev = 1.0;
    for (double sbr : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0, 1e4, 1e6}) {
        const double g2 = predicted_g2_zero({sbr, 1.0});
        CHECK(g2 < prev);
        CHECK(g2 > 0.0);
        CHECK(g2 < 1.0);
        prev = g2;
    }
}

TEST_CASE("background-corrected g2") {
    // reduces to the perfect-source form at g2_signal = 0
    for (double sbr : {0.2, 0.7, 1.38, 1.53, 4.0, 50.0})
        CHECK(corrected_g2(0.0, {sbr, 1.0}) ==
              Catch::Approx(predicted_g2_zero({sbr, 1.0})).margin(1e-14));
    // coherent signal is unchanged by mixing
    for (double sbr : {0.1, 1.0, 9.0})
        CHECK(corrected_g2(1.0, {sbr, 1.0}) == Catch::Approx(1.0).margin(1e-14));
    // rho -> 1 limit returns the signal correlation itself
    CHECK(corrected_g2(2.0, {3.0, 0.0}) == Catch::Approx(2.0).margin(1e-14));
    CHECK_THROWS_AS(corrected_g2(-0.5, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("fiber transmission") {
    CHECK(fiber_transmission({10.0, 3.0}) == Catch::Approx(1e-3).epsilon(1e-12));
    CHECK(fiber_transmission({10.0, 0.2}) == Catch::Approx(0.63096).margin(1e-3));
    CHECK(fiber_transmission({0.0, 3.0}) == 1.0);
}

TEST_CASE("fiber transmission is multiplicative in length") {
    for (double l1 : {0.0, 1.0, 4.5, 10.0})
        for (double l2 : {0.0, 2.0, 7.7}) {
            const double t12 = fiber_transmission({l1 + l2, 0.2});
            const double t1t2 = fiber_transmission({l1, 0.2}) * fiber_transmission({l2, 0.2});
            CHECK(t12 == Catch::Approx(t1t2).epsilon(1e-12));
        }
}

TEST_CASE("validation rejects out-of-range parameters") {
    CHECK_THROWS_AS((EfficiencyCurveParams{1.2, 9.3}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((EfficiencyCurveParams{0.5, 0.0}.validate()), std::invalid_argument);
    ConversionStage st;
    st.input_coupling = 1.5;
    CHECK_THROWS_AS(st.validate(), std::invalid_argument);
    CHECK_THROWS_AS((FiberLink{-1.0, 0.2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SbrStats{-1.0, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SbrStats{1.0, 0.0}.sbr()), std::domain_error);
}
