#pragma once

// Event-driven Monte Carlo generation of detector tag streams.
//
// Instead of stepping through every cycle, the generator samples the gaps
// between events: geometric skips between emitting cycles for the signal,
// exponential gaps on the concatenated gate timeline for each noise source.
// An 8-hour acquisition (~3e9 cycles) therefore costs O(number of events).
//
// All randomness is addressed by (seed, block, purpose) counters, where a
// block is either a fixed-size cycle chunk or the emitting cycle itself, so
// the output is a pure function of (scenario, duration, seed) and does not
// depend on the number of worker threads.

#include "photonlink/model.hpp"
#include "photonlink/rng.hpp"
#include "photonlink/scenario.hpp"
#include "photonlink/timetag.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace photonlink {

enum class EventOrigin : uint8_t { signal = 0, stage_noise = 1, dark = 2 };

struct SimEvent {
    uint64_t timestamp = 0; // ps
    uint8_t channel = 0;
    EventOrigin origin = EventOrigin::signal;
};

// Analytic per-channel rates for a scenario; the single source of truth
// shared by the simulator and the budget planner.
struct RateBreakdown {
    double chain_survival = 1.0;        // stage x fiber survival of one photon
    double computed_signal_total = 0.0; // detected cps predicted by the loss chain
    double signal_total = 0.0;          // effective detected cps (override applied)
    std::array<double, 2> signal_ch{};
    double stage_noise_total = 0.0; // effective detected stage background, cps
    std::array<double, 2> stage_noise_ch{};
    std::array<double, 2> dark_ch{};
    double background_total = 0.0;
    std::array<double, 2> background_ch{};
    bool signal_overridden = false;
    bool background_overridden = false;

    double total_rate() const { return signal_total + background_total; }
};

inline RateBreakdown expected_rates(const LinkScenario& s) {
    s.validate();
    RateBreakdown r;
    const double rep = s.sequence.repetition_rate_hz;
    const std::array<double, 2> share = {
        s.splitter_ratio * s.detectors[0].quantum_efficiency,
        (1.0 - s.splitter_ratio) * s.detectors[1].quantum_efficiency};
    const double share_sum = share[0] + share[1];

    double chain = 1.0;
    if (s.stage)
        chain *= chain_efficiency(*s.stage);
    const double fiber_t = s.fiber ? fiber_transmission(*s.fiber) : 1.0;
    chain *= fiber_t;
    r.chain_survival = chain;

    const double computed_pre_split = s.source.detection_probability_per_cycle * rep * chain;
    r.computed_signal_total = computed_pre_split * share_sum;
    double pre_split = computed_pre_split;
    if (s.measured_overrides.signal_rate) {
        r.signal_overridden = true;
        pre_split = share_sum > 0.0 ? *s.measured_overrides.signal_rate / share_sum : 0.0;
    }
    for (int i = 0; i < 2; ++i)
        r.signal_ch[i] = pre_split * share[i];
    r.signal_total = pre_split * share_sum;

    double stage_noise_at_hbt = 0.0;
    if (s.stage) {
        stage_noise_at_hbt = s.stage->noise_rate;
        if (s.stage_noise_attenuates)
            stage_noise_at_hbt *= fiber_t;
    }
    if (s.measured_overrides.background_rate) {
        r.background_overridden = true;
        stage_noise_at_hbt =
            share_sum > 0.0 ? *s.measured_overrides.background_rate / share_sum : 0.0;
    }
    for (int i = 0; i < 2; ++i) {
        r.stage_noise_ch[i] = stage_noise_at_hbt * share[i];
        r.dark_ch[i] = s.detectors[i].dark_rate;
        r.background_ch[i] = r.stage_noise_ch[i] + r.dark_ch[i];
    }
    r.stage_noise_total = r.stage_noise_ch[0] + r.stage_noise_ch[1];
    r.background_total = r.background_ch[0] + r.background_ch[1];
    return r;
}

namespace detail {

inline constexpr uint64_t kChunkCycles = uint64_t{1} << 22;

struct SimContext {
    const LinkScenario* scenario;
    RateBreakdown rates;
    uint64_t seed;
    uint64_t n_cycles;
    uint64_t duration_ps;
    int64_t cycle_ps;
    int64_t drive_start_ps;
    Gating::Window gate;
    PhotonShape shape;
    double p_pre_split; // per-cycle probability a signal photon reaches the splitter
};

inline uint64_t clamp_time(double t, uint64_t duration_ps) {
    if (t < 0.0)
        return 0;
    if (t > static_cast<double>(duration_ps))
        return duration_ps;
    return static_cast<uint64_t>(std::llround(t));
}

inline void emit(std::vector<SimEvent>& out, const SimContext& cx, double t_ps, int ch,
                 EventOrigin origin, RngStream& rng) {
    const double sigma = cx.scenario->detectors[ch].jitter_sigma;
    if (sigma > 0.0)
        t_ps += sigma * rng.gaussian();
    out.push_back({clamp_time(t_ps, cx.duration_ps), static_cast<uint8_t>(ch), origin});
}

// Signal photons of one chunk: geometric skips between emitting cycles,
// per-cycle substream for everything that photon needs.
inline void chunk_signal(std::vector<SimEvent>& out, const SimContext& cx, uint64_t chunk_index,
                         uint64_t c_begin, uint64_t c_end) {
    if (cx.p_pre_split <= 0.0)
        return;
    RngStream skip(cx.seed, chunk_index, StreamPurpose::signal_skip);
    uint64_t c = c_begin;
    while (c < c_end) {
        const uint64_t k = skip.geometric_skip(cx.p_pre_split);
        if (k >= c_end - c)
            break;
        c += k;
        RngStream ev(cx.seed, c, StreamPurpose::signal_event);
        const double offset = cx.shape.sample(ev);
        const int ch = ev.uniform() < cx.scenario->splitter_ratio ? 0 : 1;
        const double qe = cx.scenario->detectors[ch].quantum_efficiency;
        if (qe >= 1.0 || ev.uniform() < qe) {
            const double t = static_cast<double>(c) * static_cast<double>(cx.cycle_ps) +
                             static_cast<double>(cx.drive_start_ps) + offset;
            emit(out, cx, t, ch, EventOrigin::signal, ev);
        }
        ++c;
    }
}

// One Poisson noise source on the concatenated per-cycle gate timeline.
// route_share < 0 pins the event to `fixed_channel`; otherwise each event is
// routed to channel 0 with probability route_share.
inline void chunk_noise(std::vector<SimEvent>& out, const SimContext& cx, uint64_t chunk_index,
                        uint64_t c_begin, uint64_t c_end, double rate_cps, StreamPurpose purpose,
                        double route_share, int fixed_channel, EventOrigin origin) {
    if (rate_cps <= 0.0)
        return;
    const double gate_len = static_cast<double>(cx.gate.length_ps);
    const double mean_gap_ps = cx.scenario->sequence.repetition_rate_hz * gate_len / rate_cps;
    const double axis_len = static_cast<double>(c_end - c_begin) * gate_len;
    RngStream rng(cx.seed, chunk_index, purpose);
    double x = rng.exponential(mean_gap_ps);
    while (x < axis_len) {
        const double cycle_f = std::floor(x / gate_len);
        const double offset = x - cycle_f * gate_len;
        const double t =
            (static_cast<double>(c_begin) + cycle_f) * static_cast<double>(cx.cycle_ps) +
            static_cast<double>(cx.gate.start_ps) + offset;
        int ch = fixed_channel;
        if (route_share >= 0.0)
            ch = rng.uniform() < route_share ? 0 : 1;
        emit(out, cx, t, ch, origin, rng);
        x += rng.exponential(mean_gap_ps);
    }
}

inline std::vector<SimEvent> simulate_chunk(const SimContext& cx, uint64_t chunk_index) {
    const uint64_t c_begin = chunk_index * kChunkCycles;
    const uint64_t c_end = std::min(c_begin + kChunkCycles, cx.n_cycles);
    std::vector<SimEvent> out;
    chunk_signal(out, cx, chunk_index, c_begin, c_end);
    const double stage_total = cx.rates.stage_noise_total;
    if (stage_total > 0.0) {
        const double share0 = cx.rates.stage_noise_ch[0] / stage_total;
        chunk_noise(out, cx, chunk_index, c_begin, c_end, stage_total,
                    StreamPurpose::stage_noise, share0, -1, EventOrigin::stage_noise);
    }
    chunk_noise(out, cx, chunk_index, c_begin, c_end, cx.rates.dark_ch[0],
                StreamPurpose::dark_ch0, -1.0, 0, EventOrigin::dark);
    chunk_noise(out, cx, chunk_index, c_begin, c_end, cx.rates.dark_ch[1],
                StreamPurpose::dark_ch1, -1.0, 1, EventOrigin::dark);
    return out;
}

inline void apply_dead_time_events(std::vector<SimEvent>& events, const LinkScenario& s) {
    if (s.detectors[0].dead_time <= 0.0 && s.detectors[1].dead_time <= 0.0)
        return;
    std::array<bool, 2> armed{false, false};
    std::array<uint64_t, 2> last{0, 0};
    std::vector<SimEvent> kept;
    kept.reserve(events.size());
    for (const SimEvent& e : events) {
        const double dead = s.detectors[e.channel].dead_time;
        if (armed[e.channel] && static_cast<double>(e.timestamp - last[e.channel]) < dead)
            continue;
        armed[e.channel] = true;
        last[e.channel] = e.timestamp;
        kept.push_back(e);
    }
    events.swap(kept);
}

} // namespace detail

/// Origin-tagged event list; `simulate` is a thin wrapper around this.
inline std::vector<SimEvent> simulate_events(const LinkScenario& scenario, double duration_s,
                                             uint64_t seed, int threads = 1) {
    if (!(duration_s > 0.0))
        throw std::invalid_argument("simulation duration must be > 0");
    detail::SimContext cx{
        &scenario,
        expected_rates(scenario),
        seed,
        0,
        static_cast<uint64_t>(std::llround(duration_s * 1e12)),
        scenario.sequence.cycle_period_ps(),
        scenario.sequence.drive_start_ps(),
        scenario.gating.resolve(scenario.sequence),
        scenario.source.shape.resolve(static_cast<double>(scenario.sequence.drive_window_ps())),
        0.0,
    };
    cx.n_cycles = cx.duration_ps / static_cast<uint64_t>(cx.cycle_ps);
    const std::array<double, 2> share = {
        scenario.splitter_ratio * scenario.detectors[0].quantum_efficiency,
        (1.0 - scenario.splitter_ratio) * scenario.detectors[1].quantum_efficiency};
    const double share_sum = share[0] + share[1];
    cx.p_pre_split = share_sum > 0.0
                         ? cx.rates.signal_total / share_sum / scenario.sequence.repetition_rate_hz
                         : 0.0;
    if (cx.p_pre_split > 1.0)
        throw std::invalid_argument("per-cycle signal probability exceeds 1");

    const uint64_t n_chunks =
        cx.n_cycles == 0 ? 0 : (cx.n_cycles + detail::kChunkCycles - 1) / detail::kChunkCycles;
    std::vector<std::vector<SimEvent>> parts(n_chunks);
    if (threads <= 1 || n_chunks <= 1) {
        for (uint64_t i = 0; i < n_chunks; ++i)
            parts[i] = detail::simulate_chunk(cx, i);
    } else {
        std::atomic<uint64_t> next{0};
        auto worker = [&] {
            for (;;) {
                const uint64_t i = next.fetch_add(1);
                if (i >= n_chunks)
                    return;
                parts[i] = detail::simulate_chunk(cx, i);
            }
        };
        std::vector<std::future<void>> pool;
        for (int t = 0; t < threads; ++t)
            pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool)
            f.get();
    }

    std::vector<SimEvent> events;
    size_t total = 0;
    for (const auto& p : parts)
        total += p.size();
    events.reserve(total);
    for (auto& p : parts)
        events.insert(events.end(), p.begin(), p.end());
    std::stable_sort(events.begin(), events.end(), [](const SimEvent& a, const SimEvent& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.channel < b.channel;
    });
    detail::apply_dead_time_events(events, scenario);
    return events;
}

/// Simulates one acquisition. Deterministic for fixed (scenario, duration,
/// seed), independent of `threads`.
inline TagStream simulate(const LinkScenario& scenario, double duration_s, uint64_t seed,
                          int threads = 1) {
    const auto events = simulate_events(scenario, duration_s, seed, threads);
    TagStream s;
    s.header.channel_count = 2;
    s.header.resolution_ps = 1;
    s.header.cycle_period_ps = static_cast<uint64_t>(scenario.sequence.cycle_period_ps());
    s.header.duration_ps = static_cast<uint64_t>(std::llround(duration_s * 1e12));
    s.tags.reserve(events.size());
    for (const SimEvent& e : events)
        s.tags.push_back({e.timestamp, e.channel});
    return s;
}

// ---------------------------------------------------------------------------
// Standalone stream transforms (thinning, jitter, dead time, splitting).
// Randomness is keyed by tag index, so the transforms are deterministic and
// order-independent.

/// Bernoulli thinning with the given survival probability.
inline TagStream apply_loss(const TagStream& in, double survival, uint64_t seed) {
    if (!(survival >= 0.0 && survival <= 1.0))
        throw std::invalid_argument("survival must be in [0,1]");
    TagStream out;
    out.header = in.header;
    for (size_t i = 0; i < in.tags.size(); ++i) {
        RngStream rng(seed, i, StreamPurpose::loss);
        if (survival >= 1.0 || rng.uniform() < survival)
            out.tags.push_back(in.tags[i]);
    }
    return out;
}

/// Adds centered Gaussian timing jitter and restores time order.
inline TagStream apply_jitter(const TagStream& in, double sigma_ps, uint64_t seed) {
    if (!(sigma_ps >= 0.0))
        throw std::invalid_argument("jitter sigma must be >= 0");
    TagStream out;
    out.header = in.header;
    out.tags = in.tags;
    if (sigma_ps == 0.0)
        return out;
    for (size_t i = 0; i < out.tags.size(); ++i) {
        RngStream rng(seed, i, StreamPurpose::jitter);
        const double t = static_cast<double>(out.tags[i].timestamp) + sigma_ps * rng.gaussian();
        out.tags[i].timestamp = detail::clamp_time(t, out.header.duration_ps);
    }
    std::stable_sort(out.tags.begin(), out.tags.end(), [](const TimeTag& a, const TimeTag& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.channel < b.channel;
    });
    return out;
}

/// Drops tags closer than dead_time after an accepted tag on the same channel.
inline TagStream apply_dead_time(const TagStream& in, double dead_time_ps) {
    if (!(dead_time_ps >= 0.0))
        throw std::invalid_argument("dead time must be >= 0");
    TagStream out;
    out.header = in.header;
    if (dead_time_ps == 0.0) {
        out.tags = in.tags;
        return out;
    }
    std::vector<bool> armed(in.header.channel_count, false);
    std::vector<uint64_t> last(in.header.channel_count, 0);
    for (const TimeTag& t : in.tags) {
        if (armed[t.channel] &&
            static_cast<double>(t.timestamp - last[t.channel]) < dead_time_ps)
            continue;
        armed[t.channel] = true;
        last[t.channel] = t.timestamp;
        out.tags.push_back(t);
    }
    return out;
}

/// Routes every tag to output 0 with the given probability (channel 0 in the
/// first stream, channel 1 in the second); counts are conserved.
inline std::pair<TagStream, TagStream> hbt_split(const TagStream& in, double ratio,
                                                 uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw std::invalid_argument("splitter ratio must be in [0,1]");
    TagStream a, b;
    a.header = in.header;
    b.header = in.header;
    a.header.channel_count = std::max<uint16_t>(in.header.channel_count, 2);
    b.header.channel_count = a.header.channel_count;
    for (size_t i = 0; i < in.tags.size(); ++i) {
        RngStream rng(seed, i, StreamPurpose::split);
        if (ratio >= 1.0 || rng.uniform() < ratio)
            a.tags.push_back({in.tags[i].timestamp, 0});
        else
            b.tags.push_back({in.tags[i].timestamp, 1});
    }
    return {std::move(a), std::move(b)};
}

} // namespace photonlink
