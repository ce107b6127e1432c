#pragma once

// Timestamped detector-event streams and their on-disk forms.
//
// Binary layout (little-endian), magic "PTL1":
//   header, 32 bytes: magic[4] | u16 version | u16 channel_count |
//                     u64 resolution_ps | u64 cycle_period_ps | u64 duration_ps
//   records, 9 bytes each: u64 timestamp | u8 channel
// Fixed-width records allow streaming without an index. A text form
// (one "timestamp_ps,channel" line per tag, '#' header lines) is selected
// by the .csv/.txt file extension.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace photonlink {

struct TimeTag {
    uint64_t timestamp = 0; // ps since acquisition start
    uint8_t channel = 0;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

enum class StreamErrorCode {
    bad_magic,
    bad_version,
    truncated,
    unsorted,
    bad_channel,
    bad_header,
    incompatible,
    io_failure,
};

class stream_error : public std::runtime_error {
public:
    stream_error(StreamErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    StreamErrorCode code() const { return code_; }

private:
    StreamErrorCode code_;
};

struct StreamHeader {
    uint16_t version = 1;
    uint16_t channel_count = 2;
    uint64_t resolution_ps = 1;
    uint64_t cycle_period_ps = 0;
    uint64_t duration_ps = 0;

    friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct TagStream {
    StreamHeader header;
    std::vector<TimeTag> tags;

    friend bool operator==(const TagStream&, const TagStream&) = default;

    void validate() const {
        if (header.resolution_ps == 0)
            throw stream_error(StreamErrorCode::bad_header, "resolution must be > 0");
        uint64_t prev = 0;
        for (size_t i = 0; i < tags.size(); ++i) {
            const TimeTag& t = tags[i];
            if (i > 0 && t.timestamp < prev)
                throw stream_error(StreamErrorCode::unsorted,
                                   "timestamps must be non-decreasing (record " +
                                       std::to_string(i) + ")");
            if (t.timestamp > header.duration_ps)
                throw stream_error(StreamErrorCode::bad_header,
                                   "timestamp beyond acquisition duration");
            if (t.channel >= header.channel_count)
                throw stream_error(StreamErrorCode::bad_channel,
                                   "channel " + std::to_string(t.channel) +
                                       " not registered in header");
            prev = t.timestamp;
        }
    }

    size_t count_channel(uint8_t ch) const {
        size_t n = 0;
        for (const TimeTag& t : tags)
            n += (t.channel == ch);
        return n;
    }

    double duration_seconds() const { return static_cast<double>(header.duration_ps) * 1e-12; }
};

namespace detail {

inline void put_u16(std::ostream& os, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_bytes(std::istream& is, unsigned char* out, size_t n) {
    is.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
    return static_cast<size_t>(is.gcount()) == n;
}

inline uint16_t u16_of(const unsigned char* b) {
    return static_cast<uint16_t>(b[0] | (uint16_t(b[1]) << 8));
}

inline uint64_t u64_of(const unsigned char* b) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

} // namespace detail

inline constexpr char kStreamMagic[4] = {'P', 'T', 'L', '1'};
inline constexpr uint16_t kStreamVersion = 1;
inline constexpr size_t kHeaderBytes = 32;
inline constexpr size_t kRecordBytes = 9;

/// Writes the binary form; returns the number of bytes written.
inline size_t write_stream(const TagStream& stream, std::ostream& os) {
    stream.validate();
    os.write(kStreamMagic, 4);
    detail::put_u16(os, stream.header.version);
    detail::put_u16(os, stream.header.channel_count);
    detail::put_u64(os, stream.header.resolution_ps);
    detail::put_u64(os, stream.header.cycle_period_ps);
    detail::put_u64(os, stream.header.duration_ps);
    for (const TimeTag& t : stream.tags) {
        detail::put_u64(os, t.timestamp);
        os.put(static_cast<char>(t.channel));
    }
    if (!os)
        throw stream_error(StreamErrorCode::io_failure, "write failed");
    return kHeaderBytes + kRecordBytes * stream.tags.size();
}

inline TagStream read_stream(std::istream& is) {
    unsigned char hdr[kHeaderBytes];
    if (!detail::get_bytes(is, hdr, kHeaderBytes))
        throw stream_error(StreamErrorCode::truncated, "stream shorter than header");
    if (std::memcmp(hdr, kStreamMagic, 4) != 0)
        throw stream_error(StreamErrorCode::bad_magic, "bad magic, not a tag stream");
    TagStream s;
    s.header.version = detail::u16_of(hdr + 4);
    if (s.header.version != kStreamVersion)
        throw stream_error(StreamErrorCode::bad_version,
                           "unsupported stream version " + std::to_string(s.header.version));
    s.header.channel_count = detail::u16_of(hdr + 6);
    s.header.resolution_ps = detail::u64_of(hdr + 8);
    s.header.cycle_period_ps = detail::u64_of(hdr + 16);
    s.header.duration_ps = detail::u64_of(hdr + 24);
    if (s.header.resolution_ps == 0)
        throw stream_error(StreamErrorCode::bad_header, "resolution must be > 0");

    unsigned char rec[kRecordBytes];
    uint64_t prev = 0;
    bool first = true;
    while (true) {
        is.read(reinterpret_cast<char*>(rec), kRecordBytes);
        const size_t got = static_cast<size_t>(is.gcount());
        if (got == 0)
            break;
        if (got != kRecordBytes)
            throw stream_error(StreamErrorCode::truncated, "truncated record at end of stream");
        TimeTag t{detail::u64_of(rec), rec[8]};
        if (!first && t.timestamp < prev)
            throw stream_error(StreamErrorCode::unsorted, "timestamp regression in stream");
        if (t.channel >= s.header.channel_count)
            throw stream_error(StreamErrorCode::bad_channel, "record channel not in header");
        if (t.timestamp > s.header.duration_ps)
            throw stream_error(StreamErrorCode::bad_header, "timestamp beyond duration");
        prev = t.timestamp;
        first = false;
        s.tags.push_back(t);
    }
    return s;
}

/// Debug text form: '#' metadata lines, then one "timestamp_ps,channel" per tag.
inline void write_stream_text(const TagStream& stream, std::ostream& os) {
    stream.validate();
    os << "# ptl-text 1\n";
    os << "# channel_count=" << stream.header.channel_count << "\n";
    os << "# resolution_ps=" << stream.header.resolution_ps << "\n";
    os << "# cycle_period_ps=" << stream.header.cycle_period_ps << "\n";
    os << "# duration_ps=" << stream.header.duration_ps << "\n";
    for (const TimeTag& t : stream.tags)
        os << t.timestamp << "," << unsigned(t.channel) << "\n";
    if (!os)
        throw stream_error(StreamErrorCode::io_failure, "write failed");
}

inline TagStream read_stream_text(std::istream& is) {
    TagStream s;
    s.header.cycle_period_ps = 0;
    std::string line;
    bool saw_meta = false;
    uint64_t prev = 0;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            auto grab = [&](const char* key, uint64_t& out) {
                const std::string k = std::string("# ") + key + "=";
                if (line.rfind(k, 0) == 0) {
                    out = std::stoull(line.substr(k.size()));
                    saw_meta = true;
                }
            };
            uint64_t v = 0;
            grab("channel_count", v);
            if (v)
                s.header.channel_count = static_cast<uint16_t>(v);
            grab("resolution_ps", s.header.resolution_ps);
            grab("cycle_period_ps", s.header.cycle_period_ps);
            grab("duration_ps", s.header.duration_ps);
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw stream_error(StreamErrorCode::bad_header, "malformed text record: " + line);
        TimeTag t;
        try {
            t.timestamp = std::stoull(line.substr(0, comma));
            const unsigned long ch = std::stoul(line.substr(comma + 1));
            if (ch > 255)
                throw std::out_of_range("channel");
            t.channel = static_cast<uint8_t>(ch);
        } catch (const std::exception&) {
            throw stream_error(StreamErrorCode::bad_header, "malformed text record: " + line);
        }
        if (!first && t.timestamp < prev)
            throw stream_error(StreamErrorCode::unsorted, "timestamp regression in stream");
        prev = t.timestamp;
        first = false;
        s.tags.push_back(t);
    }
    if (!saw_meta)
        throw stream_error(StreamErrorCode::bad_header, "text stream missing metadata lines");
    s.validate();
    return s;
}

inline bool is_text_stream_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".csv" || ext == ".txt";
}

inline void save_stream(const TagStream& stream, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw stream_error(StreamErrorCode::io_failure, "cannot open " + path.string());
    if (is_text_stream_path(path))
        write_stream_text(stream, os);
    else
        write_stream(stream, os);
}

inline TagStream load_stream(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw stream_error(StreamErrorCode::io_failure, "cannot open " + path.string());
    return is_text_stream_path(path) ? read_stream_text(is) : read_stream(is);
}

/// Stable timestamp-ordered merge; ties break by channel ascending, then
/// tags of `a` before tags of `b`. Headers must agree on resolution and
/// cycle period.
inline TagStream merge_streams(const TagStream& a, const TagStream& b) {
    if (a.header.resolution_ps != b.header.resolution_ps ||
        a.header.cycle_period_ps != b.header.cycle_period_ps)
        throw stream_error(StreamErrorCode::incompatible,
                           "streams differ in resolution or cycle period");
    TagStream out;
    out.header = a.header;
    out.header.channel_count = std::max(a.header.channel_count, b.header.channel_count);
    out.header.duration_ps = std::max(a.header.duration_ps, b.header.duration_ps);
    out.tags.resize(a.tags.size() + b.tags.size());
    const auto by_time_channel = [](const TimeTag& x, const TimeTag& y) {
        return x.timestamp != y.timestamp ? x.timestamp < y.timestamp : x.channel < y.channel;
    };
    std::merge(a.tags.begin(), a.tags.end(), b.tags.begin(), b.tags.end(), out.tags.begin(),
               by_time_channel);
    return out;
}

} // namespace photonlink
