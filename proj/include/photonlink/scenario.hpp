#pragma once

// Link scenarios: the pulse sequence, the emitter, optional conversion
// stage and fiber, the beam-splitter and detector pair, and gating. A
// scenario is a pure value; loading/saving uses a strict JSON schema with
// the field names below (times in the sequence, gate and shape blocks are
// in microseconds; jitter/dead time in ps; rates in counts/s).
//
// Three reference scenarios ship as presets: direct-866, qfc-1530 and
// qfc-1530-10km. Their rates are calibrated to measured operating points;
// where a calibration overrides the value computed from the loss chain the
// override is carried explicitly in `measured_overrides` and flagged in
// every report.

#include "photonlink/model.hpp"
#include "photonlink/shape.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace photonlink {

struct PulseSequence {
    double cooling_us = 5.5;
    double state_prep_us = 1.0;
    double pre_delay_us = 0.1;
    double drive_window_us = 2.3;
    double post_delay_us = 0.0;
    double repetition_rate_hz = 99600.0;

    int64_t cycle_period_ps() const {
        return static_cast<int64_t>(std::llround(1e12 / repetition_rate_hz));
    }
    int64_t drive_start_ps() const {
        return static_cast<int64_t>(std::llround((cooling_us + state_prep_us + pre_delay_us) * 1e6));
    }
    int64_t drive_window_ps() const {
        return static_cast<int64_t>(std::llround(drive_window_us * 1e6));
    }

    void validate() const {
        for (double v : {cooling_us, state_prep_us, pre_delay_us, drive_window_us, post_delay_us})
            if (!(v >= 0.0))
                throw std::invalid_argument("sequence phases must be >= 0");
        if (!(repetition_rate_hz > 0.0))
            throw std::invalid_argument("repetition rate must be > 0");
        const double sum_ps =
            (cooling_us + state_prep_us + pre_delay_us + drive_window_us + post_delay_us) * 1e6;
        if (sum_ps > static_cast<double>(cycle_period_ps()) + 0.5)
            throw std::invalid_argument("sequence phases exceed the cycle period");
    }
};

struct ShapeSpec {
    enum class Family { gaussian, table };
    Family family = Family::gaussian;
    double center_us = 1.15; // relative to drive start
    double fwhm_us = 1.0;
    std::vector<double> densities; // table family

    PhotonShape resolve(double window_ps) const {
        if (family == Family::gaussian)
            return PhotonShape::gaussian(window_ps, center_us * 1e6, fwhm_us * 1e6);
        return PhotonShape::table(window_ps, densities);
    }
};

struct SourceModel {
    double detection_probability_per_cycle = 0.0; // end-to-end at the detectors
    ShapeSpec shape;

    void validate() const {
        if (!(detection_probability_per_cycle >= 0.0 && detection_probability_per_cycle <= 1.0))
            throw std::invalid_argument("detection probability must be in [0,1]");
    }
};

struct DetectorModel {
    double quantum_efficiency = 1.0;
    double dark_rate = 0.0;    // counts/s, gated wall-clock rate
    double jitter_sigma = 0.0; // ps
    double dead_time = 0.0;    // ps

    void validate() const {
        if (!(quantum_efficiency >= 0.0 && quantum_efficiency <= 1.0))
            throw std::invalid_argument("quantum efficiency must be in [0,1]");
        if (!(dark_rate >= 0.0) || !(jitter_sigma >= 0.0) || !(dead_time >= 0.0))
            throw std::invalid_argument("detector rates/times must be >= 0");
    }
};

// Per-cycle window inside which noise events are accepted. Default: from
// drive start to drive end plus a guard (the emission tail).
struct Gating {
    double guard_us = 0.5;
    std::optional<double> start_us;  // explicit window start within the cycle
    std::optional<double> length_us; // explicit window length

    struct Window {
        int64_t start_ps;
        int64_t length_ps;
    };

    Window resolve(const PulseSequence& seq) const {
        Window w{};
        if (start_us && length_us) {
            w.start_ps = static_cast<int64_t>(std::llround(*start_us * 1e6));
            w.length_ps = static_cast<int64_t>(std::llround(*length_us * 1e6));
        } else {
            w.start_ps = seq.drive_start_ps();
            w.length_ps = seq.drive_window_ps() + static_cast<int64_t>(std::llround(guard_us * 1e6));
        }
        if (w.length_ps <= 0 || w.start_ps < 0 ||
            w.start_ps + w.length_ps > seq.cycle_period_ps())
            throw std::invalid_argument("gate window must fit inside the cycle");
        return w;
    }
};

// Calibration to a measured operating point. When present these replace the
// rates computed from the loss chain; reports flag the substitution and
// sweeps rescale relative to it.
struct MeasuredOverrides {
    std::optional<double> signal_rate;     // counts/s summed over both detectors
    std::optional<double> background_rate; // counts/s summed, replaces attenuated stage noise
};

struct LinkScenario {
    std::string name = "custom";
    PulseSequence sequence;
    SourceModel source;
    std::optional<ConversionStage> stage;
    std::optional<FiberLink> fiber;
    double splitter_ratio = 0.5;
    std::array<DetectorModel, 2> detectors{};
    Gating gating;
    bool stage_noise_attenuates = true; // noise propagation convention
    MeasuredOverrides measured_overrides;

    void validate() const {
        sequence.validate();
        source.validate();
        if (stage)
            stage->validate();
        if (fiber)
            fiber->validate();
        if (!(splitter_ratio >= 0.0 && splitter_ratio <= 1.0))
            throw std::invalid_argument("splitter ratio must be in [0,1]");
        for (const auto& d : detectors)
            d.validate();
        gating.resolve(sequence);
        if (measured_overrides.signal_rate && !(*measured_overrides.signal_rate >= 0.0))
            throw std::invalid_argument("signal rate override must be >= 0");
        if (measured_overrides.background_rate && !(*measured_overrides.background_rate >= 0.0))
            throw std::invalid_argument("background rate override must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// JSON (strict: unknown keys are rejected)

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const char* where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok)
            throw std::invalid_argument(std::string("unknown key '") + key + "' in " + where);
    }
}

} // namespace detail

inline nlohmann::json to_json(const LinkScenario& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["sequence"] = {{"cooling", s.sequence.cooling_us},
                     {"state_prep", s.sequence.state_prep_us},
                     {"pre_delay", s.sequence.pre_delay_us},
                     {"drive_window", s.sequence.drive_window_us},
                     {"post_delay", s.sequence.post_delay_us},
                     {"repetition_rate_hz", s.sequence.repetition_rate_hz}};
    nlohmann::json shape;
    if (s.source.shape.family == ShapeSpec::Family::gaussian)
        shape = {{"family", "gaussian"},
                 {"center", s.source.shape.center_us},
                 {"fwhm", s.source.shape.fwhm_us}};
    else
        shape = {{"family", "table"}, {"densities", s.source.shape.densities}};
    j["source"] = {{"detection_probability_per_cycle", s.source.detection_probability_per_cycle},
                   {"shape", shape}};
    if (s.stage)
        j["stage"] = {{"input_coupling", s.stage->input_coupling},
                      {"efficiency_params",
                       {{"amplitude_A", s.stage->efficiency_params.amplitude_A},
                        {"rate_B", s.stage->efficiency_params.rate_B}}},
                      {"pump_power", s.stage->pump_power},
                      {"output_coupling", s.stage->output_coupling},
                      {"filter_transmittance", s.stage->filter_transmittance},
                      {"noise_rate", s.stage->noise_rate}};
    if (s.fiber)
        j["fiber"] = {{"length", s.fiber->length}, {"attenuation", s.fiber->attenuation}};
    j["splitter_ratio"] = s.splitter_ratio;
    j["detectors"] = nlohmann::json::array();
    for (const auto& d : s.detectors)
        j["detectors"].push_back({{"quantum_efficiency", d.quantum_efficiency},
                                  {"dark_rate", d.dark_rate},
                                  {"jitter_sigma", d.jitter_sigma},
                                  {"dead_time", d.dead_time}});
    nlohmann::json gating;
    if (s.gating.start_us && s.gating.length_us) {
        gating["start"] = *s.gating.start_us;
        gating["length"] = *s.gating.length_us;
    } else {
        gating["guard"] = s.gating.guard_us;
    }
    j["gating"] = gating;
    j["noise_propagation"] = s.stage_noise_attenuates ? "attenuated" : "fixed";
    if (s.measured_overrides.signal_rate || s.measured_overrides.background_rate) {
        nlohmann::json o;
        if (s.measured_overrides.signal_rate)
            o["signal_rate"] = *s.measured_overrides.signal_rate;
        if (s.measured_overrides.background_rate)
            o["background_rate"] = *s.measured_overrides.background_rate;
        j["measured_overrides"] = o;
    }
    return j;
}

inline LinkScenario scenario_from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"name", "sequence", "source", "stage", "fiber", "splitter_ratio",
                        "detectors", "gating", "noise_propagation", "measured_overrides"},
                       "scenario");
    LinkScenario s;
    s.name = j.value("name", "custom");
    if (j.contains("sequence")) {
        const auto& q = j.at("sequence");
        detail::check_keys(q,
                           {"cooling", "state_prep", "pre_delay", "drive_window", "post_delay",
                            "repetition_rate_hz"},
                           "sequence");
        s.sequence.cooling_us = q.value("cooling", s.sequence.cooling_us);
        s.sequence.state_prep_us = q.value("state_prep", s.sequence.state_prep_us);
        s.sequence.pre_delay_us = q.value("pre_delay", s.sequence.pre_delay_us);
        s.sequence.drive_window_us = q.value("drive_window", s.sequence.drive_window_us);
        s.sequence.post_delay_us = q.value("post_delay", s.sequence.post_delay_us);
        s.sequence.repetition_rate_hz = q.value("repetition_rate_hz", s.sequence.repetition_rate_hz);
    }
    if (j.contains("source")) {
        const auto& q = j.at("source");
        detail::check_keys(q, {"detection_probability_per_cycle", "shape"}, "source");
        s.source.detection_probability_per_cycle =
            q.value("detection_probability_per_cycle", 0.0);
        if (q.contains("shape")) {
            const auto& sh = q.at("shape");
            detail::check_keys(sh, {"family", "center", "fwhm", "densities"}, "shape");
            const std::string family = sh.value("family", "gaussian");
            if (family == "gaussian") {
                s.source.shape.family = ShapeSpec::Family::gaussian;
                s.source.shape.center_us = sh.value("center", s.source.shape.center_us);
                s.source.shape.fwhm_us = sh.value("fwhm", s.source.shape.fwhm_us);
            } else if (family == "table") {
                s.source.shape.family = ShapeSpec::Family::table;
                s.source.shape.densities = sh.at("densities").get<std::vector<double>>();
            } else {
                throw std::invalid_argument("unknown shape family: " + family);
            }
        }
    }
    if (j.contains("stage") && !j.at("stage").is_null()) {
        const auto& q = j.at("stage");
        detail::check_keys(q,
                           {"input_coupling", "efficiency_params", "pump_power", "output_coupling",
                            "filter_transmittance", "noise_rate"},
                           "stage");
        ConversionStage st;
        st.input_coupling = q.value("input_coupling", 1.0);
        if (q.contains("efficiency_params")) {
            detail::check_keys(q.at("efficiency_params"), {"amplitude_A", "rate_B"},
                               "efficiency_params");
            st.efficiency_params.amplitude_A = q.at("efficiency_params").value("amplitude_A", 0.0);
            st.efficiency_params.rate_B = q.at("efficiency_params").value("rate_B", 1.0);
        }
        st.pump_power = q.value("pump_power", 0.0);
        st.output_coupling = q.value("output_coupling", 1.0);
        st.filter_transmittance = q.value("filter_transmittance", 1.0);
        st.noise_rate = q.value("noise_rate", 0.0);
        s.stage = st;
    }
    if (j.contains("fiber") && !j.at("fiber").is_null()) {
        detail::check_keys(j.at("fiber"), {"length", "attenuation"}, "fiber");
        s.fiber = FiberLink{j.at("fiber").value("length", 0.0),
                            j.at("fiber").value("attenuation", 0.0)};
    }
    s.splitter_ratio = j.value("splitter_ratio", 0.5);
    if (j.contains("detectors")) {
        const auto& arr = j.at("detectors");
        if (!arr.is_array() || arr.size() != 2)
            throw std::invalid_argument("detectors must be an array of exactly 2 entries");
        for (size_t i = 0; i < 2; ++i) {
            detail::check_keys(arr[i], {"quantum_efficiency", "dark_rate", "jitter_sigma", "dead_time"},
                               "detector");
            s.detectors[i].quantum_efficiency = arr[i].value("quantum_efficiency", 1.0);
            s.detectors[i].dark_rate = arr[i].value("dark_rate", 0.0);
            s.detectors[i].jitter_sigma = arr[i].value("jitter_sigma", 0.0);
            s.detectors[i].dead_time = arr[i].value("dead_time", 0.0);
        }
    }
    if (j.contains("gating")) {
        detail::check_keys(j.at("gating"), {"guard", "start", "length"}, "gating");
        const auto& g = j.at("gating");
        if (g.contains("start") != g.contains("length"))
            throw std::invalid_argument("gating start and length must be given together");
        if (g.contains("start")) {
            s.gating.start_us = g.at("start").get<double>();
            s.gating.length_us = g.at("length").get<double>();
        }
        s.gating.guard_us = g.value("guard", s.gating.guard_us);
    }
    if (j.contains("noise_propagation")) {
        const std::string conv = j.at("noise_propagation").get<std::string>();
        if (conv == "attenuated")
            s.stage_noise_attenuates = true;
        else if (conv == "fixed")
            s.stage_noise_attenuates = false;
        else
            throw std::invalid_argument("noise_propagation must be 'attenuated' or 'fixed'");
    }
    if (j.contains("measured_overrides")) {
        detail::check_keys(j.at("measured_overrides"), {"signal_rate", "background_rate"},
                           "measured_overrides");
        const auto& o = j.at("measured_overrides");
        if (o.contains("signal_rate"))
            s.measured_overrides.signal_rate = o.at("signal_rate").get<double>();
        if (o.contains("background_rate"))
            s.measured_overrides.background_rate = o.at("background_rate").get<double>();
    }
    s.validate();
    return s;
}

inline LinkScenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open scenario file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("scenario file " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Presets
//
// direct-866     the emitter measured directly on the near-infrared HBT setup
// qfc-1530       emitter + frequency converter, telecom-band HBT
// qfc-1530-10km  as qfc-1530 with a 10 km fiber spool before the HBT
//
// Measured operating points: the direct configuration detects 1.63% of
// cycles with 1 count/s of gated background. Through the converter 26.3
// signal counts/s and 19 background counts/s were measured; the loss chain
// (0.80 coupling x ~0.507 internal x 0.60 coupling x 0.14 filters = ~3.4%)
// predicts ~55 counts/s, the remainder being unpolarized-emission and mode
// acceptance the chain does not model, so the preset pins the measured rate
// as an override. After the spool the measured rates were 13.0 and 8.5
// counts/s (more loss than the 2 dB of ideal fiber); both are pinned.

inline ConversionStage reference_stage() {
    ConversionStage st;
    st.input_coupling = 0.80;
    st.efficiency_params = {0.56, 9.3};
    st.pump_power = 0.17;
    st.output_coupling = 0.60;
    st.filter_transmittance = 0.14;
    st.noise_rate = 19.0;
    return st;
}

inline LinkScenario preset_direct_866() {
    LinkScenario s;
    s.name = "direct-866";
    s.source.detection_probability_per_cycle = 0.0163;
    s.detectors[0].dark_rate = 0.5;
    s.detectors[1].dark_rate = 0.5;
    s.validate();
    return s;
}

inline LinkScenario preset_qfc_1530() {
    LinkScenario s;
    s.name = "qfc-1530";
    s.source.detection_probability_per_cycle = 0.0163;
    s.stage = reference_stage();
    s.measured_overrides.signal_rate = 26.3;
    s.validate();
    return s;
}

inline LinkScenario preset_qfc_1530_10km() {
    LinkScenario s = preset_qfc_1530();
    s.name = "qfc-1530-10km";
    s.fiber = FiberLink{10.0, 0.2};
    s.measured_overrides.signal_rate = 13.0;
    s.measured_overrides.background_rate = 8.5;
    s.validate();
    return s;
}

inline std::vector<std::string> preset_names() {
    return {"direct-866", "qfc-1530", "qfc-1530-10km"};
}

inline LinkScenario preset_scenario(const std::string& name) {
    if (name == "direct-866")
        return preset_direct_866();
    if (name == "qfc-1530")
        return preset_qfc_1530();
    if (name == "qfc-1530-10km")
        return preset_qfc_1530_10km();
    throw std::invalid_argument("unknown preset: " + name);
}

} // namespace photonlink
