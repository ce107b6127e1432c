#include "photonlink/correlation.hpp"
#include "photonlink/rng.hpp"
#include "photonlink/simulator.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace photonlink;

namespace {

// All-pairs oracle, kept deliberately naive and independent of the
// streaming implementation.
std::vector<uint64_t> brute_force_bins(const TagStream& s, uint8_t a, uint8_t b, int64_t w,
                                       int64_t range) {
    const int64_t half = range / w;
    std::vector<uint64_t> bins(static_cast<size_t>(2 * half + 1), 0);
    for (const TimeTag& ta : s.tags) {
        if (ta.channel != a)
            continue;
        for (const TimeTag& tb : s.tags) {
            if (tb.channel != b)
                continue;
            const int64_t d =
                static_cast<int64_t>(tb.timestamp) - static_cast<int64_t>(ta.timestamp);
            if (d < -range || d > range)
                continue;
            const auto k = static_cast<int64_t>(
                std::floor(static_cast<double>(d) / static_cast<double>(w) + 0.5));
            ++bins[static_cast<size_t>(k + half)];
        }
    }
    return bins;
}

TagStream random_hbt_stream(RngStream& rng, size_t max_tags, uint64_t duration,
                            bool grid_aligned, int64_t grid) {
    TagStream s;
    s.header.channel_count = 2;
    s.header.duration_ps = duration;
    s.header.cycle_period_ps = 10040161;
    const size_t n = rng.uniform_below(max_tags + 1);
    std::vector<uint64_t> times(n);
    for (auto& t : times) {
        t = rng.uniform_below(duration + 1);
        if (grid_aligned)
            t = (t / grid) * grid;
    }
    std::sort(times.begin(), times.end());
    for (uint64_t t : times)
        s.tags.push_back({t, static_cast<uint8_t>(rng.uniform_below(2))});
    return s;
}

} // namespace

TEST_CASE("one coincident pair lands in the zero-delay bin") {
    TagStream s;
    s.header.duration_ps = 1000;
    s.tags = {{500, 0}, {500, 1}};
    const auto hist = coincidence_histogram(s, 0, 1, 10, 100);
    CHECK(hist.total() == 1);
    CHECK(hist.counts[static_cast<size_t>(hist.half_bins)] == 1);
    CHECK(hist.n_a == 1);
    CHECK(hist.n_b == 1);
}

TEST_CASE("empty stream gives an all-zero histogram") {
    TagStream s;
    s.header.duration_ps = 1000;
    const auto hist = coincidence_histogram(s, 0, 1, 10, 100);
    CHECK(hist.total() == 0);
    CHECK(hist.counts.size() == static_cast<size_t>(2 * hist.half_bins + 1));
}

TEST_CASE("missing channel is rejected") {
    TagStream s;
    s.header.channel_count = 1;
    s.header.duration_ps = 1000;
    CHECK_THROWS_AS(coincidence_histogram(s, 0, 1, 10, 100), std::invalid_argument);
}

TEST_CASE("streaming correlator equals the all-pairs oracle") {
    RngStream rng(2718, 0, StreamPurpose::noise);
    for (int trial = 0; trial < 80; ++trial) {
        const int64_t w = (trial % 3 == 0) ? 200000 : (trial % 3 == 1 ? 777 : 1000);
        const int64_t half = 1 + static_cast<int64_t>(rng.uniform_below(200));
        const int64_t range = half * w;
        const bool grid = trial % 2 == 0; // exercise bin-boundary deltas
        const uint64_t duration = static_cast<uint64_t>(range) * (2 + rng.uniform_below(20));
        const TagStream s = random_hbt_stream(rng, 2500, duration, grid, w / 2 ? w / 2 : 1);
        const auto hist = coincidence_histogram(s, 0, 1, w, range);
        const auto oracle = brute_force_bins(s, 0, 1, w, range);
        REQUIRE(hist.counts == oracle);
    }
}

TEST_CASE("histogram shards add") {
    RngStream rng(5, 0, StreamPurpose::noise);
    const TagStream s = random_hbt_stream(rng, 2000, 100000000, false, 1);
    // split into two time segments at a gap wider than the range
    const int64_t w = 1000, range = 10000;
    TagStream first, second;
    first.header = second.header = s.header;
    for (const TimeTag& t : s.tags)
        (t.timestamp < s.header.duration_ps / 2 ? first : second).tags.push_back(t);
    auto h1 = coincidence_histogram(first, 0, 1, w, range);
    const auto h2 = coincidence_histogram(second, 0, 1, w, range);
    const auto whole = coincidence_histogram(s, 0, 1, w, range);
    h1 += h2;
    // cross-boundary pairs are absent from the shards; inside a gap-free
    // random stream they are few but nonzero, so compare within that margin
    CHECK(h1.n_a == whole.n_a);
    CHECK(h1.n_b == whole.n_b);
    uint64_t shard_total = h1.total(), whole_total = whole.total();
    CHECK(shard_total <= whole_total);
}

TEST_CASE("peak integration of a zero-delay histogram") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 200000;
    hist.half_bins = 5000;
    hist.counts.assign(10001, 0);
    hist.counts[5000] = 42;
    const auto peaks = integrate_peaks(hist, 10040161);
    CHECK(peaks.at(0) == 42);
    for (int64_t n = -peaks.n_max; n <= peaks.n_max; ++n)
        if (n != 0)
            REQUIRE(peaks.at(n) == 0);
}

TEST_CASE("uniform histogram integrates to equal peaks") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 200000;
    hist.half_bins = 5000;
    hist.counts.assign(10001, 3);
    const int64_t period = 50 * hist.bin_width_ps;
    const auto peaks = integrate_peaks(hist, period);
    CHECK(peaks.n_max == 99);
    for (int64_t n = -peaks.n_max; n <= peaks.n_max; ++n)
        REQUIRE(peaks.at(n) == 150);
}

TEST_CASE("narrow integration windows take a proportional share of a flat histogram") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 200000;
    hist.half_bins = 5000;
    hist.counts.assign(10001, 2);
    const int64_t period = 50 * hist.bin_width_ps;
    const auto narrow = integrate_peaks(hist, period, period / 5);
    for (int64_t n = -narrow.n_max; n <= narrow.n_max; ++n)
        REQUIRE(narrow.at(n) == 2 * 50 / 5 + 2); // 10 whole bins + the boundary bin
    CHECK_THROWS_AS(integrate_peaks(hist, period, 2 * period), std::invalid_argument);
}

TEST_CASE("trigger-channel folding matches nominal-phase folding on clean triggers") {
    // channel 2 carries one trigger at the start of each cycle
    const int64_t period = 10040161;
    TagStream s;
    s.header.channel_count = 3;
    s.header.cycle_period_ps = static_cast<uint64_t>(period);
    s.header.duration_ps = 200 * static_cast<uint64_t>(period);
    RngStream rng(6, 0, StreamPurpose::noise);
    std::vector<TimeTag> tags;
    for (int c = 0; c < 200; ++c) {
        tags.push_back({static_cast<uint64_t>(c) * period, 2});
        const int n = static_cast<int>(rng.uniform_below(4));
        for (int k = 0; k < n; ++k)
            tags.push_back({static_cast<uint64_t>(c) * period + 6600000 +
                                rng.uniform_below(2300000),
                            static_cast<uint8_t>(rng.uniform_below(2))});
    }
    std::sort(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.channel < b.channel;
    });
    s.tags = tags;

    const auto triggered = pulse_shape_triggered(s, 2, period, 80000, 0.0);
    TagStream no_trig = s;
    std::erase_if(no_trig.tags, [](const TimeTag& t) { return t.channel == 2; });
    const auto folded = pulse_shape(no_trig, period, 80000, 0.0);
    REQUIRE(triggered.counts == folded.counts);
    CHECK_THROWS_AS(pulse_shape_triggered(s, 7, period, 80000, 0.0), std::invalid_argument);
}

TEST_CASE("peak integration needs at least one period of range") {
    CoincidenceHistogram hist;
    hist.bin_width_ps = 200000;
    hist.half_bins = 10;
    hist.counts.assign(21, 0);
    CHECK_THROWS_AS(integrate_peaks(hist, 10040161), std::invalid_argument);
}

TEST_CASE("g2 estimator reference values") {
    PeakCounts peaks;
    peaks.n_max = 1;
    peaks.counts = {1, 2, 1}; // n = -1, 0, 1
    const auto r = g2_estimate(peaks, 147010, 147010, 17928000);
    CHECK(r.g2_zero() == Catch::Approx(0.0016591).margin(2e-6));
    CHECK(r.sigma_zero() == Catch::Approx(0.0011732).margin(2e-6));
}

TEST_CASE("poissonian normalization gives g2 = 1") {
    PeakCounts peaks;
    peaks.n_max = 3;
    const uint64_t n1 = 10000, n2 = 20000, n_trig = 1000000;
    const auto flat = static_cast<uint64_t>(n1 * n2 / n_trig);
    peaks.counts.assign(7, flat);
    const auto r = g2_estimate(peaks, n1, n2, n_trig);
    for (double g : r.g2)
        REQUIRE(g == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("zero coincidences report a one-sided upper bound") {
    PeakCounts peaks;
    peaks.n_max = 1;
    peaks.counts = {5, 0, 5};
    const auto r = g2_estimate(peaks, 1000, 1000, 100000);
    CHECK(r.g2_zero() == 0.0);
    const double norm = 100000.0 / (1000.0 * 1000.0);
    CHECK(r.sigma_zero() == Catch::Approx(norm * 1.8410).margin(1e-12));
    CHECK_THROWS_AS(g2_estimate(peaks, 0, 1000, 100000), std::invalid_argument);
}

TEST_CASE("poissonian-only stream has mean g2 within 3 sigma of 1") {
    LinkScenario s = preset_qfc_1530();
    s.source.detection_probability_per_cycle = 0.0;
    s.measured_overrides = {};
    s.stage->noise_rate = 2000.0;
    const TagStream stream = simulate(s, 200.0, 31);
    const auto res = g2_of_stream(stream, 200000, 1000000000);
    double total_coinc = 0;
    for (uint64_t c : res.n_coinc)
        total_coinc += static_cast<double>(c);
    double mean = 0;
    for (double g : res.g2)
        mean += g;
    mean /= static_cast<double>(res.g2.size());
    const double sigma_mean = 1.0 / std::sqrt(total_coinc);
    CHECK(std::abs(mean - 1.0) <= 3.0 * sigma_mean);
}

TEST_CASE("g2 is invariant under uniform time translation") {
    const TagStream stream = simulate(preset_direct_866(), 30.0, 12);
    TagStream shifted = stream;
    for (TimeTag& t : shifted.tags)
        t.timestamp += 300000;
    const auto a = g2_of_stream(stream, 200000, 1000000000);
    const auto b = g2_of_stream(shifted, 200000, 1000000000);
    CHECK(a.n_coinc == b.n_coinc);
    CHECK(a.g2 == b.g2);
    CHECK(a.n_trig == b.n_trig);
}

TEST_CASE("pulse shape recovers the generating density") {
    LinkScenario s = preset_direct_866();
    s.detectors[0].dark_rate = 0.0;
    s.detectors[1].dark_rate = 0.0;
    const double duration = 616.0; // ~1e6 tags
    const TagStream stream = simulate(s, duration, 8);
    const int64_t period = s.sequence.cycle_period_ps();
    const auto hist = pulse_shape(stream, period, 80000, 0.0);
    REQUIRE_FALSE(hist.pure_background);
    REQUIRE(hist.bins() == static_cast<size_t>(period / 80000));

    const PhotonShape shape = s.source.shape.resolve(
        static_cast<double>(s.sequence.drive_window_ps()));
    const double drive_start = static_cast<double>(s.sequence.drive_start_ps());
    double tv = 0.0;
    for (size_t i = 0; i < hist.bins(); ++i) {
        const double lo = static_cast<double>(static_cast<int64_t>(i) * 80000) - drive_start;
        const double expect = shape.mass_between(lo, lo + 80000.0);
        tv += std::abs(hist.density[i] - expect);
    }
    tv *= 0.5;
    CHECK(tv < 0.02);
}

TEST_CASE("pure background stream is flagged, not normalized") {
    LinkScenario s = preset_qfc_1530();
    s.source.detection_probability_per_cycle = 0.0;
    s.measured_overrides = {};
    const TagStream stream = simulate(s, 400.0, 9);
    const auto gate = s.gating.resolve(s.sequence);
    const auto hist = pulse_shape(stream, s.sequence.cycle_period_ps(), 80000, 19.0,
                                  {{gate.start_ps, gate.length_ps}});
    CHECK(hist.pure_background);
    CHECK(hist.density.empty());
}

TEST_CASE("shape distance endpoints and a shifted-table oracle") {
    auto make_hist = [](const std::vector<double>& density) {
        ShapeHistogram h;
        h.bin_width_ps = 80000;
        h.counts.assign(density.size(), 1);
        h.expected_background.assign(density.size(), 0.0);
        h.density = density;
        h.residual_total = 1.0;
        return h;
    };
    const auto a = make_hist({0.2, 0.5, 0.3, 0.0});
    CHECK(shape_distance(a, a) == 0.0);

    const auto d0 = make_hist({1.0, 0.0, 0.0, 0.0});
    const auto d1 = make_hist({0.0, 0.0, 1.0, 0.0});
    CHECK(shape_distance(d0, d1) == 1.0);

    // gaussian table against itself shifted by one bin; oracle by direct sum
    const int bins = 30;
    std::vector<double> p(bins), q(bins, 0.0);
    const PhotonShape shape = PhotonShape::gaussian(2.4e6, 1.2e6, 1.0e6);
    for (int i = 0; i < bins; ++i)
        p[i] = shape.mass_between(i * 80000.0, (i + 1) * 80000.0);
    for (int i = 0; i + 1 < bins; ++i)
        q[i + 1] = p[i];
    q[0] = p[bins - 1];
    double oracle = 0.0;
    for (int i = 0; i < bins; ++i)
        oracle += std::abs(p[i] - q[i]);
    oracle *= 0.5;
    CHECK(shape_distance(make_hist(p), make_hist(q)) == Catch::Approx(oracle).margin(1e-12));

    const auto other = make_hist({0.5, 0.5});
    CHECK_THROWS_AS(shape_distance(a, other), std::invalid_argument);
}
