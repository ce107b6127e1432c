#pragma once

// Closed-form link physics shared by the simulator, the analyzers and the
// budget planner: the pump-power dependence of the frequency converter, the
// loss chain through the conversion stage, fiber transmission, and the
// background-corrected photon statistics.
//
// All types are immutable value objects; all operations are pure.

#include <cmath>
#include <stdexcept>

namespace photonlink {

struct EfficiencyCurveParams {
    double amplitude_A = 0.0; // peak internal conversion efficiency, in [0,1]
    double rate_B = 1.0;      // pump-power scale, 1/W, > 0

    void validate() const {
        if (!(amplitude_A >= 0.0 && amplitude_A <= 1.0))
            throw std::invalid_argument("efficiency amplitude_A must be in [0,1]");
        if (!(rate_B > 0.0))
            throw std::invalid_argument("efficiency rate_B must be > 0");
    }

    /// Pump power at which the curve reaches its maximum amplitude_A.
    double peak_pump_power() const { return (M_PI / 2.0) * (M_PI / 2.0) / rate_B; }
};

/// Internal conversion efficiency A*sin^2(sqrt(B*P)) at pump power P (watts).
inline double internal_conversion_efficiency(double pump_power_w,
                                             const EfficiencyCurveParams& params) {
    if (!(pump_power_w >= 0.0))
        throw std::invalid_argument("pump power must be >= 0");
    const double s = std::sin(std::sqrt(params.rate_B * pump_power_w));
    return params.amplitude_A * s * s;
}

// One frequency-conversion stage: coupling into the waveguide, the internal
// conversion curve at the operating pump power, coupling of the converted
// light into fiber, the spectral filter stack, and the gated background the
// stage adds (counts/s delivered to the analyzer input).
struct ConversionStage {
    double input_coupling = 1.0;
    EfficiencyCurveParams efficiency_params;
    double pump_power = 0.0; // W
    double output_coupling = 1.0;
    double filter_transmittance = 1.0;
    double noise_rate = 0.0; // counts/s, gated

    void validate() const {
        auto frac = [](double v, const char* what) {
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument(std::string(what) + " must be in [0,1]");
        };
        frac(input_coupling, "stage input_coupling");
        frac(output_coupling, "stage output_coupling");
        frac(filter_transmittance, "stage filter_transmittance");
        efficiency_params.validate();
        if (!(pump_power >= 0.0))
            throw std::invalid_argument("stage pump_power must be >= 0");
        if (!(noise_rate >= 0.0))
            throw std::invalid_argument("stage noise_rate must be >= 0");
    }
};

/// End-to-end survival probability of a photon through the conversion stage.
inline double chain_efficiency(const ConversionStage& stage) {
    return stage.input_coupling *
           internal_conversion_efficiency(stage.pump_power, stage.efficiency_params) *
           stage.output_coupling * stage.filter_transmittance;
}

struct FiberLink {
    double length = 0.0;      // km
    double attenuation = 0.0; // dB/km

    void validate() const {
        if (!(length >= 0.0))
            throw std::invalid_argument("fiber length must be >= 0");
        if (!(attenuation >= 0.0))
            throw std::invalid_argument("fiber attenuation must be >= 0");
    }
};

/// Power transmission 10^(-length*attenuation/10).
inline double fiber_transmission(const FiberLink& link) {
    return std::pow(10.0, -link.length * link.attenuation / 10.0);
}

// Signal and gated background rates at the detection plane. The background
// rate is the wall-clock rate measured with the source off.
struct SbrStats {
    double signal_rate = 0.0;     // counts/s
    double background_rate = 0.0; // counts/s

    void validate() const {
        if (!(signal_rate >= 0.0) || !(background_rate >= 0.0))
            throw std::invalid_argument("rates must be >= 0");
    }

    double sbr() const {
        if (!(background_rate > 0.0))
            throw std::domain_error("SBR undefined for zero background");
        return signal_rate / background_rate;
    }

    /// Signal fraction SBR/(1+SBR); 1 in the background-free limit.
    double rho() const {
        if (background_rate <= 0.0)
            return signal_rate > 0.0 ? 1.0 : 0.0;
        return signal_rate / (signal_rate + background_rate);
    }
};

/// g2(0) expected from a perfect single-photon signal plus Poissonian
/// background: 1 - rho^2. Zero background is the ideal-source limit, 0.
inline double predicted_g2_zero(const SbrStats& stats) {
    stats.validate();
    if (stats.background_rate <= 0.0)
        return 0.0;
    const double rho = stats.rho();
    return 1.0 - rho * rho;
}

/// Observed g2(n) for a signal with intrinsic correlation g2_signal mixed
/// with independent Poissonian background: 1 + rho^2*(g2_signal - 1).
inline double corrected_g2(double g2_signal, const SbrStats& stats) {
    if (!(g2_signal >= 0.0))
        throw std::invalid_argument("g2_signal must be >= 0");
    stats.validate();
    const double rho = stats.rho();
    return 1.0 + rho * rho * (g2_signal - 1.0);
}

} // namespace photonlink
