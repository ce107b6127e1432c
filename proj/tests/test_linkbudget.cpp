#include "photonlink/linkbudget.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace photonlink;

TEST_CASE("preset budgets land on the measured operating points") {
    const auto qfc = predict(preset_qfc_1530());
    CHECK(qfc.rates.signal_total == Catch::Approx(26.3));
    CHECK(qfc.rates.background_total == Catch::Approx(19.0));
    CHECK(qfc.sbr == Catch::Approx(1.384).margin(0.005));
    CHECK(qfc.g2_zero == Catch::Approx(0.663).margin(0.001));

    const auto far = predict(preset_qfc_1530_10km());
    CHECK(far.sbr == Catch::Approx(1.529).margin(0.005));
    CHECK(far.g2_zero == Catch::Approx(0.634).margin(0.001));

    const auto direct = predict(preset_direct_866());
    CHECK(direct.g2_zero == Catch::Approx(0.00123).margin(5e-5));
}

TEST_CASE("prediction flags its assumptions") {
    const auto qfc = predict(preset_qfc_1530());
    auto has = [&](const std::string& a) {
        return std::find(qfc.assumptions.begin(), qfc.assumptions.end(), a) !=
               qfc.assumptions.end();
    };
    CHECK(has("noise-propagation:attenuated"));
    CHECK(has("signal-rate:measured-override"));
    CHECK(has("background-rate:stage-noise-plus-dark"));
}

TEST_CASE("predict shares its rate arithmetic with the simulator") {
    for (const auto& name : preset_names()) {
        const LinkScenario s = preset_scenario(name);
        const auto report = predict(s);
        const auto rates = expected_rates(s);
        REQUIRE(report.rates.signal_total == rates.signal_total);
        REQUIRE(report.rates.background_total == rates.background_total);
        REQUIRE(report.rates.signal_ch == rates.signal_ch);
        REQUIRE(report.rates.background_ch == rates.background_ch);
    }
}

TEST_CASE("zero-length fiber is the same as no fiber") {
    LinkScenario with = preset_qfc_1530();
    with.fiber = FiberLink{0.0, 0.2};
    const auto a = predict(with);
    const auto b = predict(preset_qfc_1530());
    CHECK(a.rates.signal_total == b.rates.signal_total);
    CHECK(a.rates.background_total == b.rates.background_total);
    CHECK(a.g2_zero == b.g2_zero);
}

TEST_CASE("distance sweep with proportional noise and no dark floor is flat") {
    // signal and stage noise attenuate together, so the SBR is invariant
    const LinkScenario base = preset_qfc_1530(); // dark rate is zero in this preset
    const auto reports = sweep(base, "fiber.length", {0.0, 2.5, 5.0, 7.5, 10.0});
    REQUIRE(reports.size() == 5);
    for (const auto& r : reports)
        CHECK(r.g2_zero == Catch::Approx(reports.front().g2_zero).margin(1e-12));
}

TEST_CASE("with a dark floor the predicted g2 is non-decreasing in distance") {
    LinkScenario base = preset_qfc_1530();
    base.detectors[0].dark_rate = 0.5;
    base.detectors[1].dark_rate = 0.5;
    std::vector<double> lengths;
    for (int i = 0; i <= 40; ++i)
        lengths.push_back(5.0 * i);
    const auto reports = sweep(base, "fiber.length", lengths);
    for (size_t i = 1; i < reports.size(); ++i)
        REQUIRE(reports[i].g2_zero >= reports[i - 1].g2_zero - 1e-12);
    // dark-only limit: far enough out everything but the floor is gone
    CHECK(reports.back().g2_zero == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("g2 prediction is invariant under joint scaling of signal and background") {
    for (double scale : {0.1, 1.0, 7.0, 250.0}) {
        const double a = predicted_g2_zero({26.3, 19.0});
        const double b = predicted_g2_zero({26.3 * scale, 19.0 * scale});
        REQUIRE(a == Catch::Approx(b).margin(1e-14));
    }
}

TEST_CASE("filter sweep rescales the calibrated signal by the chain ratio") {
    const LinkScenario base = preset_qfc_1530();
    const auto reports = sweep(base, "stage.filter_transmittance", {0.14, 0.63});
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].rates.signal_total == Catch::Approx(26.3));
    CHECK(reports[1].rates.signal_total == Catch::Approx(26.3 * 4.5));
}

TEST_CASE("unknown sweep path is rejected") {
    CHECK_THROWS_AS(sweep(preset_qfc_1530(), "stage.bogus", {1.0}), std::invalid_argument);
}

TEST_CASE("distance projection brackets 0.70") {
    const auto reports = project_distance(preset_qfc_1530(), 100.0);
    REQUIRE(reports.size() >= 4);
    double lo = 1.0, hi = 0.0, best = 1.0;
    std::string best_label;
    for (const auto& r : reports) {
        if (!r.assumptions.empty() && r.assumptions.front().rfind("projection:", 0) == 0 &&
            r.assumptions.back() == "noise-propagation:attenuated") {
            lo = std::min(lo, r.g2_zero);
            hi = std::max(hi, r.g2_zero);
        }
        if (std::abs(r.g2_zero - 0.70) < std::abs(best - 0.70)) {
            best = r.g2_zero;
            best_label = r.scenario;
        }
    }
    CHECK(lo <= 0.70);
    CHECK(hi >= 0.70);
    CHECK(std::abs(best - 0.70) <= 0.05);
    CHECK(best_label.find("dark1") != std::string::npos);
}

TEST_CASE("budget csv rows carry the assumption flags") {
    std::ostringstream os;
    write_budget_csv_header(os);
    write_budget_csv_row(predict(preset_qfc_1530_10km()), os);
    const std::string text = os.str();
    CHECK(text.find("background-rate:measured-override") != std::string::npos);
    CHECK(text.find("qfc-1530-10km") != std::string::npos);
}
