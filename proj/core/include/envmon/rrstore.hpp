#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "envmon/errors.hpp"

namespace envmon::rr {

enum class Consolidation : std::uint8_t { Avg = 0, Min = 1, Max = 2, Last = 3 };

const char* consolidation_name(Consolidation c);

struct TierSpec {
    std::uint32_t step_s = 1;
    std::uint32_t capacity = 0;
    Consolidation cons = Consolidation::Avg;
};

struct Sample {
    std::int64_t timestamp_ms = 0;
    double value = 0.0;

    bool operator==(const Sample&) const = default;
};

// Fixed-footprint time series: a raw ring plus coarser consolidated rings.
// Tier k+1's step must be an integer multiple of tier k's.
class Archive {
public:
    explicit Archive(std::vector<TierSpec> tiers);

    // 1 s raw for an hour, minute averages for a week, hour averages for a
    // year. Matches a 1 Hz readout with long-horizon charting.
    static std::vector<TierSpec> default_tiers();

    // Appends to the raw tier; cascades consolidated values when a coarse
    // window completes. Throws OutOfOrder for non-increasing timestamps.
    void append(std::int64_t timestamp_ms, double value);

    // Samples within [from, to], from the finest tier that still covers
    // `from`; window-averaged down to at most max_points.
    std::vector<Sample> query(std::int64_t from_ms, std::int64_t to_ms,
                              std::size_t max_points) const;

    std::size_t tier_count() const { return tiers_.size(); }
    const TierSpec& tier_spec(std::size_t i) const { return tiers_[i].spec; }
    std::vector<Sample> tier_samples(std::size_t i) const;

    void save(const std::string& path) const;  // temp write + atomic rename
    static Archive load(const std::string& path);

private:
    struct Accumulator {
        std::int64_t window = kNoWindow;
        std::uint64_t count = 0;
        double sum = 0.0, min = 0.0, max = 0.0, last = 0.0;
    };

    struct Tier {
        TierSpec spec;
        std::vector<Sample> ring;   // sentinel timestamp marks empty slots
        std::uint32_t write_idx = 0;
        Accumulator acc;
    };

    static constexpr std::int64_t kEmptySlot = INT64_MIN;
    static constexpr std::int64_t kNoWindow = INT64_MIN;

    void push(std::size_t tier_idx, std::int64_t timestamp_ms, double value);
    void rebuild_accumulators();

    std::vector<Tier> tiers_;
};

// Keyed collection of archives backed by one directory.
class Store {
public:
    explicit Store(std::vector<TierSpec> tiers = Archive::default_tiers());

    void append(const std::string& key, std::int64_t timestamp_ms, double value);
    std::vector<Sample> query(const std::string& key, std::int64_t from_ms,
                              std::int64_t to_ms, std::size_t max_points) const;
    std::vector<std::string> keys() const;
    std::uint64_t total_appends() const { return appends_; }

    void flush(const std::string& dir) const;
    static Store open(const std::string& dir);

    static std::string archive_filename(const std::string& key);

private:
    std::vector<TierSpec> tiers_;
    std::map<std::string, Archive> archives_;
    std::uint64_t appends_ = 0;
};

void export_csv(const std::vector<Sample>& samples, std::ostream& out);

}  // namespace envmon::rr
