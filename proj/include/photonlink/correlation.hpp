#pragma once

// Streaming analysis of tag streams: coincidence delay histograms, the
// peak-integrated g2(n) estimator with Poisson uncertainties, and folded
// pulse-shape histograms with background subtraction.

#include "photonlink/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace photonlink {

namespace detail {

inline int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if (a % b != 0 && ((a < 0) != (b < 0)))
        --q;
    return q;
}

} // namespace detail

// Signed-delay histogram between two channels. Bin k spans
// [(k-1/2)*w, (k+1/2)*w) for k in [-half_bins, half_bins]; pairs are
// counted for |delay| <= range = half_bins*w, with delay = t_b - t_a.
struct CoincidenceHistogram {
    int64_t bin_width_ps = 0;
    int64_t half_bins = 0;
    std::vector<uint64_t> counts; // size 2*half_bins + 1
    uint8_t channel_a = 0;
    uint8_t channel_b = 1;
    uint64_t n_a = 0; // per-channel totals of the source stream
    uint64_t n_b = 0;
    uint64_t duration_ps = 0;
    uint64_t cycle_period_ps = 0;

    int64_t range_ps() const { return half_bins * bin_width_ps; }
    int64_t bin_center_ps(size_t index) const {
        return (static_cast<int64_t>(index) - half_bins) * bin_width_ps;
    }
    uint64_t total() const {
        uint64_t t = 0;
        for (uint64_t c : counts)
            t += c;
        return t;
    }

    /// Shard addition; binning and channels must agree.
    CoincidenceHistogram& operator+=(const CoincidenceHistogram& other) {
        if (bin_width_ps != other.bin_width_ps || half_bins != other.half_bins ||
            channel_a != other.channel_a || channel_b != other.channel_b)
            throw std::invalid_argument("histogram shards must share binning and channels");
        for (size_t i = 0; i < counts.size(); ++i)
            counts[i] += other.counts[i];
        n_a += other.n_a;
        n_b += other.n_b;
        return *this;
    }
};

// Single-pass cross correlator holding a sliding window of length `range`
// per channel. Each unordered (a,b) pair is binned once, when its later
// member arrives.
class StreamingCoincidenceCounter {
public:
    StreamingCoincidenceCounter(uint8_t channel_a, uint8_t channel_b, int64_t bin_width_ps,
                                int64_t range_ps) {
        if (bin_width_ps <= 0)
            throw std::invalid_argument("bin width must be > 0");
        if (range_ps < bin_width_ps)
            throw std::invalid_argument("range must cover at least one bin");
        if (channel_a == channel_b)
            throw std::invalid_argument("coincidence channels must differ");
        hist_.bin_width_ps = bin_width_ps;
        hist_.half_bins = range_ps / bin_width_ps;
        hist_.counts.assign(static_cast<size_t>(2 * hist_.half_bins + 1), 0);
        hist_.channel_a = channel_a;
        hist_.channel_b = channel_b;
    }

    void feed(const TimeTag& tag) {
        const int64_t t = static_cast<int64_t>(tag.timestamp);
        const int64_t cutoff = t - hist_.range_ps();
        while (!win_a_.empty() && win_a_.front() < cutoff)
            win_a_.pop_front();
        while (!win_b_.empty() && win_b_.front() < cutoff)
            win_b_.pop_front();
        if (tag.channel == hist_.channel_a) {
            ++hist_.n_a;
            for (int64_t tb : win_b_)
                add_delay(tb - t);
            win_a_.push_back(t);
        } else if (tag.channel == hist_.channel_b) {
            ++hist_.n_b;
            for (int64_t ta : win_a_)
                add_delay(t - ta);
            win_b_.push_back(t);
        }
    }

    CoincidenceHistogram finish(const StreamHeader& header) {
        hist_.duration_ps = header.duration_ps;
        hist_.cycle_period_ps = header.cycle_period_ps;
        return hist_;
    }

private:
    void add_delay(int64_t delay) {
        // |delay| <= range is guaranteed by the window eviction.
        const int64_t k =
            detail::floor_div(2 * delay + hist_.bin_width_ps, 2 * hist_.bin_width_ps);
        ++hist_.counts[static_cast<size_t>(k + hist_.half_bins)];
    }

    CoincidenceHistogram hist_;
    std::deque<int64_t> win_a_;
    std::deque<int64_t> win_b_;
};

inline CoincidenceHistogram coincidence_histogram(const TagStream& stream, uint8_t channel_a,
                                                  uint8_t channel_b, int64_t bin_width_ps,
                                                  int64_t range_ps) {
    if (channel_a >= stream.header.channel_count || channel_b >= stream.header.channel_count)
        throw std::invalid_argument("channel not present in stream");
    StreamingCoincidenceCounter counter(channel_a, channel_b, bin_width_ps, range_ps);
    for (const TimeTag& t : stream.tags)
        counter.feed(t);
    return counter.finish(stream.header);
}

// Coincidences summed over full-period windows centered at n*cycle_period.
struct PeakCounts {
    int64_t n_max = 0;
    std::vector<uint64_t> counts; // index n + n_max, n in [-n_max, n_max]

    uint64_t at(int64_t n) const { return counts[static_cast<size_t>(n + n_max)]; }
    std::vector<int64_t> indices() const {
        std::vector<int64_t> v;
        for (int64_t n = -n_max; n <= n_max; ++n)
            v.push_back(n);
        return v;
    }
};

/// Sums histogram bins into windows of `window_width_ps` (default: the full
/// period) centered at n*cycle_period; narrower windows support
/// sensitivity studies of the integration width.
inline PeakCounts integrate_peaks(const CoincidenceHistogram& hist, int64_t cycle_period_ps,
                                  int64_t window_width_ps = 0) {
    if (cycle_period_ps <= 0)
        throw std::invalid_argument("cycle period must be > 0");
    if (hist.range_ps() < cycle_period_ps)
        throw std::invalid_argument("histogram range smaller than one period");
    if (window_width_ps <= 0)
        window_width_ps = cycle_period_ps;
    if (window_width_ps > cycle_period_ps)
        throw std::invalid_argument("peak window cannot exceed the period");
    const double period = static_cast<double>(cycle_period_ps);
    PeakCounts peaks;
    peaks.n_max = static_cast<int64_t>(
        std::floor(static_cast<double>(hist.range_ps()) / period - 0.5));
    peaks.counts.assign(static_cast<size_t>(2 * peaks.n_max + 1), 0);
    for (size_t i = 0; i < hist.counts.size(); ++i) {
        if (hist.counts[i] == 0)
            continue;
        const double center = static_cast<double>(hist.bin_center_ps(i));
        const int64_t n = static_cast<int64_t>(std::floor(center / period + 0.5));
        if (n < -peaks.n_max || n > peaks.n_max)
            continue;
        if (std::abs(center - static_cast<double>(n) * period) >
            static_cast<double>(window_width_ps) / 2.0)
            continue;
        peaks.counts[static_cast<size_t>(n + peaks.n_max)] += hist.counts[i];
    }
    return peaks;
}

// One-sided upper factor for a Poisson mean given zero observed counts,
// at the one-sigma-equivalent confidence level: -ln(1 - 0.8413) = 1.84.
inline constexpr double kZeroCountUpperFactor = 1.8410;

struct G2Result {
    std::vector<int64_t> n;
    std::vector<uint64_t> n_coinc;
    std::vector<double> g2;
    std::vector<double> sigma; // Poisson; one-sided upper bound where n_coinc = 0
    uint64_t n1 = 0;
    uint64_t n2 = 0;
    uint64_t n_trig = 0;

    size_t index_of(int64_t peak) const {
        for (size_t i = 0; i < n.size(); ++i)
            if (n[i] == peak)
                return i;
        throw std::out_of_range("peak index not present");
    }
    double g2_zero() const { return g2[index_of(0)]; }
    double sigma_zero() const { return sigma[index_of(0)]; }
    uint64_t coinc_zero() const { return n_coinc[index_of(0)]; }

    /// Mean g2 over the side peaks (n != 0).
    double side_peak_mean() const {
        double acc = 0.0;
        size_t m = 0;
        for (size_t i = 0; i < n.size(); ++i)
            if (n[i] != 0) {
                acc += g2[i];
                ++m;
            }
        return m ? acc / static_cast<double>(m) : 0.0;
    }
};

/// g2(n) = N_trig * N_coinc,n / (N1 * N2), sigma = g2/sqrt(N_coinc).
inline G2Result g2_estimate(const PeakCounts& peaks, uint64_t n1, uint64_t n2, uint64_t n_trig) {
    if (n1 == 0 || n2 == 0)
        throw std::invalid_argument("g2 undefined for empty channels");
    if (n_trig == 0)
        throw std::invalid_argument("g2 needs at least one trigger");
    G2Result r;
    r.n1 = n1;
    r.n2 = n2;
    r.n_trig = n_trig;
    const double norm = static_cast<double>(n_trig) /
                        (static_cast<double>(n1) * static_cast<double>(n2));
    for (int64_t n = -peaks.n_max; n <= peaks.n_max; ++n) {
        const uint64_t c = peaks.at(n);
        r.n.push_back(n);
        r.n_coinc.push_back(c);
        if (c > 0) {
            const double g = norm * static_cast<double>(c);
            r.g2.push_back(g);
            r.sigma.push_back(g / std::sqrt(static_cast<double>(c)));
        } else {
            r.g2.push_back(0.0);
            r.sigma.push_back(norm * kZeroCountUpperFactor);
        }
    }
    return r;
}

inline uint64_t n_trig_of(const StreamHeader& header) {
    if (header.cycle_period_ps == 0)
        throw std::invalid_argument("stream header lacks a cycle period");
    return header.duration_ps / header.cycle_period_ps;
}

/// Full g2 analysis of an HBT stream with the standard estimator inputs
/// taken from the stream itself.
inline G2Result g2_of_stream(const TagStream& stream, int64_t bin_width_ps, int64_t range_ps,
                             uint8_t channel_a = 0, uint8_t channel_b = 1) {
    const auto hist =
        coincidence_histogram(stream, channel_a, channel_b, bin_width_ps, range_ps);
    const auto peaks = integrate_peaks(hist, static_cast<int64_t>(stream.header.cycle_period_ps));
    return g2_estimate(peaks, hist.n_a, hist.n_b, n_trig_of(stream.header));
}

// Folded arrival-time histogram: counts vs time in cycle, expected
// background per bin, and the normalized signal density after subtraction.
struct ShapeHistogram {
    int64_t bin_width_ps = 0;
    std::vector<uint64_t> counts;
    std::vector<double> expected_background;
    std::vector<double> density; // empty when flagged
    bool pure_background = false;
    uint64_t folded_total = 0;
    double residual_total = 0.0;

    size_t bins() const { return counts.size(); }
};

namespace detail {

// Background subtraction, clipping and normalization shared by both folding
// modes.
inline void finish_shape(ShapeHistogram& h, double duration_s, double background_rate_cps,
                         std::optional<std::pair<int64_t, int64_t>> gate) {
    if (!(background_rate_cps >= 0.0))
        throw std::invalid_argument("background rate must be >= 0");
    const size_t n_bins = h.counts.size();
    const double bg_total = background_rate_cps * duration_s;
    h.expected_background.assign(n_bins, 0.0);
    int64_t gate_start = 0, gate_len = static_cast<int64_t>(n_bins) * h.bin_width_ps;
    if (gate) {
        gate_start = gate->first;
        gate_len = gate->second;
        if (gate_len <= 0)
            throw std::invalid_argument("gate length must be > 0");
    }
    for (size_t i = 0; i < n_bins; ++i) {
        const int64_t lo = static_cast<int64_t>(i) * h.bin_width_ps;
        const int64_t hi = lo + h.bin_width_ps;
        const int64_t olo = std::max(lo, gate_start);
        const int64_t ohi = std::min(hi, gate_start + gate_len);
        if (ohi > olo)
            h.expected_background[i] =
                bg_total * static_cast<double>(ohi - olo) / static_cast<double>(gate_len);
    }

    double expected_in_bins = 0.0;
    std::vector<double> residual(n_bins, 0.0);
    for (size_t i = 0; i < n_bins; ++i) {
        expected_in_bins += h.expected_background[i];
        residual[i] = std::max(0.0, static_cast<double>(h.counts[i]) - h.expected_background[i]);
        h.residual_total += residual[i];
    }
    // Clipping turns pure-background fluctuations into a small positive
    // residual; only a residual well above that scale counts as signal.
    if (h.residual_total <= 4.0 * std::sqrt(expected_in_bins + 1.0)) {
        h.pure_background = true;
        return;
    }
    h.density.resize(n_bins);
    for (size_t i = 0; i < n_bins; ++i)
        h.density[i] = residual[i] / h.residual_total;
}

inline size_t shape_bins(int64_t cycle_period_ps, int64_t bin_width_ps) {
    if (cycle_period_ps <= 0 || bin_width_ps <= 0)
        throw std::invalid_argument("cycle period and bin width must be > 0");
    if (cycle_period_ps / bin_width_ps < 1)
        throw std::invalid_argument("bin width larger than the cycle");
    // the analysis window is the largest whole number of bins in the cycle
    return static_cast<size_t>(cycle_period_ps / bin_width_ps);
}

} // namespace detail

/// Folds tags modulo the cycle period into bins of bin_width, subtracts the
/// expected background (uniform over `gate` if given, else over the whole
/// cycle), clips negative bins and normalizes. A stream whose residual is
/// consistent with pure background is flagged instead of normalized.
inline ShapeHistogram pulse_shape(const TagStream& stream, int64_t cycle_period_ps,
                                  int64_t bin_width_ps, double background_rate_cps,
                                  std::optional<std::pair<int64_t, int64_t>> gate = {}) {
    ShapeHistogram h;
    h.bin_width_ps = bin_width_ps;
    const size_t n_bins = detail::shape_bins(cycle_period_ps, bin_width_ps);
    h.counts.assign(n_bins, 0);
    const uint64_t period = static_cast<uint64_t>(cycle_period_ps);
    for (const TimeTag& t : stream.tags) {
        const uint64_t offset = t.timestamp % period;
        const size_t bin = static_cast<size_t>(offset / static_cast<uint64_t>(bin_width_ps));
        if (bin < n_bins) {
            ++h.counts[bin];
            ++h.folded_total;
        }
    }
    detail::finish_shape(h, stream.duration_seconds(), background_rate_cps, gate);
    return h;
}

/// Trigger-channel variant for streams that carry a sequence trigger as a
/// regular channel (real-TDC compatibility): offsets are measured from the
/// most recent trigger tag instead of the nominal cycle phase.
inline ShapeHistogram pulse_shape_triggered(const TagStream& stream, uint8_t trigger_channel,
                                            int64_t cycle_period_ps, int64_t bin_width_ps,
                                            double background_rate_cps,
                                            std::optional<std::pair<int64_t, int64_t>> gate = {}) {
    if (trigger_channel >= stream.header.channel_count)
        throw std::invalid_argument("trigger channel not present in stream");
    ShapeHistogram h;
    h.bin_width_ps = bin_width_ps;
    const size_t n_bins = detail::shape_bins(cycle_period_ps, bin_width_ps);
    h.counts.assign(n_bins, 0);
    bool armed = false;
    uint64_t last_trigger = 0;
    for (const TimeTag& t : stream.tags) {
        if (t.channel == trigger_channel) {
            armed = true;
            last_trigger = t.timestamp;
            continue;
        }
        if (!armed)
            continue;
        const uint64_t offset = t.timestamp - last_trigger;
        const size_t bin = static_cast<size_t>(offset / static_cast<uint64_t>(bin_width_ps));
        if (bin < n_bins) {
            ++h.counts[bin];
            ++h.folded_total;
        }
    }
    detail::finish_shape(h, stream.duration_seconds(), background_rate_cps, gate);
    return h;
}

/// Total variation distance between two normalized shape histograms.
inline double shape_distance(const ShapeHistogram& a, const ShapeHistogram& b) {
    if (a.bin_width_ps != b.bin_width_ps || a.bins() != b.bins())
        throw std::invalid_argument("shape histograms must share binning");
    if (a.pure_background || b.pure_background)
        throw std::invalid_argument("shape undefined for a pure-background histogram");
    double acc = 0.0;
    for (size_t i = 0; i < a.density.size(); ++i)
        acc += std::abs(a.density[i] - b.density[i]);
    return 0.5 * acc;
}

// ---------------------------------------------------------------------------
// CSV forms (deterministic column order, documented in FORMATS.md)

inline void write_histogram_csv(const CoincidenceHistogram& hist, std::ostream& os) {
    os << "delay_ps,count\n";
    for (size_t i = 0; i < hist.counts.size(); ++i)
        os << hist.bin_center_ps(i) << "," << hist.counts[i] << "\n";
}

inline void write_g2_csv(const G2Result& r, std::ostream& os) {
    os << "n,n_coinc,g2,sigma\n";
    for (size_t i = 0; i < r.n.size(); ++i)
        os << r.n[i] << "," << r.n_coinc[i] << "," << r.g2[i] << "," << r.sigma[i] << "\n";
}

inline void write_shape_csv(const ShapeHistogram& h, std::ostream& os) {
    os << "bin_start_ps,count,expected_background,density\n";
    for (size_t i = 0; i < h.bins(); ++i) {
        os << static_cast<int64_t>(i) * h.bin_width_ps << "," << h.counts[i] << ","
           << h.expected_background[i] << ","
           << (h.pure_background ? 0.0 : h.density[i]) << "\n";
    }
}

} // namespace photonlink
