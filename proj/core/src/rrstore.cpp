#include "envmon/rrstore.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace envmon::rr {

namespace {

constexpr char kMagic[8] = {'E', 'N', 'V', 'R', 'R', 'A', '1', '\0'};

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(Err::CorruptArchive, "truncated archive file");
    return v;
}

}  // namespace

const char* consolidation_name(Consolidation c) {
    switch (c) {
        case Consolidation::Avg: return "avg";
        case Consolidation::Min: return "min";
        case Consolidation::Max: return "max";
        case Consolidation::Last: return "last";
    }
    return "?";
}

Archive::Archive(std::vector<TierSpec> tiers) {
    if (tiers.empty()) throw Error(Err::BadConfig, "archive needs >= 1 tier");
    for (std::size_t i = 0; i < tiers.size(); ++i) {
        if (tiers[i].step_s == 0 || tiers[i].capacity == 0) {
            throw Error(Err::BadConfig, "tier step and capacity must be > 0");
        }
        if (i > 0 && tiers[i].step_s % tiers[i - 1].step_s != 0) {
            throw Error(Err::BadConfig, "tier steps must nest");
        }
    }
    tiers_.reserve(tiers.size());
    for (const auto& spec : tiers) {
        Tier t;
        t.spec = spec;
        t.ring.assign(spec.capacity, Sample{kEmptySlot, 0.0});
        tiers_.push_back(std::move(t));
    }
}

std::vector<TierSpec> Archive::default_tiers() {
    return {
        {1, 3600, Consolidation::Last},
        {60, 10080, Consolidation::Avg},
        {3600, 8760, Consolidation::Avg},
    };
}

void Archive::append(std::int64_t timestamp_ms, double value) {
    const Tier& raw = tiers_[0];
    const std::uint32_t newest =
        (raw.write_idx + raw.spec.capacity - 1) % raw.spec.capacity;
    if (raw.ring[newest].timestamp_ms != kEmptySlot &&
        timestamp_ms <= raw.ring[newest].timestamp_ms) {
        throw Error(Err::OutOfOrder, "sample not newer than newest raw sample");
    }
    push(0, timestamp_ms, value);
}

void Archive::push(std::size_t ti, std::int64_t timestamp_ms, double value) {
    Tier& t = tiers_[ti];
    t.ring[t.write_idx] = {timestamp_ms, value};
    t.write_idx = (t.write_idx + 1) % t.spec.capacity;

    if (ti + 1 >= tiers_.size()) return;

    // Feed the next coarser tier's window accumulator; emit when the window
    // rolls over.
    Tier& up = tiers_[ti + 1];
    const std::int64_t step_ms = (std::int64_t)up.spec.step_s * 1000;
    const std::int64_t window = timestamp_ms >= 0
                                    ? timestamp_ms / step_ms
                                    : (timestamp_ms - step_ms + 1) / step_ms;
    Accumulator& acc = up.acc;
    if (acc.window != kNoWindow && window != acc.window) {
        double v = 0.0;
        switch (up.spec.cons) {
            case Consolidation::Avg: v = acc.sum / (double)acc.count; break;
            case Consolidation::Min: v = acc.min; break;
            case Consolidation::Max: v = acc.max; break;
            case Consolidation::Last: v = acc.last; break;
        }
        push(ti + 1, acc.window * step_ms, v);
        acc = Accumulator{};
    }
    if (acc.window == kNoWindow) {
        acc.window = window;
        acc.count = 1;
        acc.sum = acc.min = acc.max = acc.last = value;
    } else {
        ++acc.count;
        acc.sum += value;
        acc.min = std::min(acc.min, value);
        acc.max = std::max(acc.max, value);
        acc.last = value;
    }
}

std::vector<Sample> Archive::tier_samples(std::size_t i) const {
    const Tier& t = tiers_[i];
    std::vector<Sample> out;
    out.reserve(t.spec.capacity);
    for (std::uint32_t k = 0; k < t.spec.capacity; ++k) {
        const Sample& s = t.ring[(t.write_idx + k) % t.spec.capacity];
        if (s.timestamp_ms != kEmptySlot) out.push_back(s);
    }
    return out;
}

std::vector<Sample> Archive::query(std::int64_t from_ms, std::int64_t to_ms,
                                   std::size_t max_points) const {
    if (to_ms < from_ms || max_points == 0) return {};

    // Finest tier whose oldest retained sample still reaches back to `from`;
    // if no tier reaches that far, the one that reaches back furthest.
    std::size_t pick = 0;
    std::int64_t best_oldest = INT64_MAX;
    bool covered = false;
    for (std::size_t i = 0; i < tiers_.size(); ++i) {
        const auto samples = tier_samples(i);
        if (samples.empty()) continue;
        if (samples.front().timestamp_ms <= from_ms) {
            pick = i;
            covered = true;
            break;
        }
        if (samples.front().timestamp_ms < best_oldest) {
            best_oldest = samples.front().timestamp_ms;
            pick = i;
        }
    }
    (void)covered;
    std::vector<Sample> in_range;
    for (const Sample& s : tier_samples(pick)) {
        if (s.timestamp_ms >= from_ms && s.timestamp_ms <= to_ms) {
            in_range.push_back(s);
        }
    }
    if (in_range.size() <= max_points) return in_range;

    // Window-average down to max_points equal slices of [from, to].
    const double span = (double)(to_ms - from_ms + 1);
    std::vector<double> sums(max_points, 0.0);
    std::vector<std::uint64_t> counts(max_points, 0);
    for (const Sample& s : in_range) {
        auto w = (std::size_t)((double)(s.timestamp_ms - from_ms) / span *
                               (double)max_points);
        w = std::min(w, max_points - 1);
        sums[w] += s.value;
        ++counts[w];
    }
    std::vector<Sample> out;
    for (std::size_t w = 0; w < max_points; ++w) {
        if (counts[w] == 0) continue;
        const auto ts = from_ms + (std::int64_t)((double)w * span / (double)max_points);
        out.push_back({ts, sums[w] / (double)counts[w]});
    }
    return out;
}

void Archive::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Err::IoError, "cannot write " + tmp);
        out.write(kMagic, sizeof kMagic);
        put(out, (std::uint32_t)tiers_.size());
        for (const Tier& t : tiers_) {
            put(out, t.spec.step_s);
            put(out, t.spec.capacity);
            put(out, (std::uint8_t)t.spec.cons);
            put(out, t.write_idx);
        }
        for (const Tier& t : tiers_) {
            for (const Sample& s : t.ring) {
                put(out, s.timestamp_ms);
                put(out, s.value);
            }
        }
        if (!out) throw Error(Err::IoError, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Err::IoError, "cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw Error(Err::CorruptArchive, "bad magic in " + path);
    }
    const auto n = get<std::uint32_t>(in);
    if (n == 0 || n > 64) throw Error(Err::CorruptArchive, "bad tier count");
    std::vector<TierSpec> specs(n);
    std::vector<std::uint32_t> write_idx(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        specs[i].step_s = get<std::uint32_t>(in);
        specs[i].capacity = get<std::uint32_t>(in);
        const auto cons = get<std::uint8_t>(in);
        if (cons > (std::uint8_t)Consolidation::Last) {
            throw Error(Err::CorruptArchive, "bad consolidation tag");
        }
        specs[i].cons = (Consolidation)cons;
        write_idx[i] = get<std::uint32_t>(in);
    }
    Archive a(specs);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (write_idx[i] >= specs[i].capacity) {
            throw Error(Err::CorruptArchive, "write index out of range");
        }
        a.tiers_[i].write_idx = write_idx[i];
        for (auto& slot : a.tiers_[i].ring) {
            slot.timestamp_ms = get<std::int64_t>(in);
            slot.value = get<double>(in);
        }
    }
    in.peek();
    if (!in.eof()) throw Error(Err::CorruptArchive, "trailing bytes in " + path);
    a.rebuild_accumulators();
    return a;
}

void Archive::rebuild_accumulators() {
    // Only the newest, still-open window of each coarse tier can hold
    // unconsolidated finer samples; refill those accumulators by replay.
    for (std::size_t ti = 1; ti < tiers_.size(); ++ti) {
        Tier& up = tiers_[ti];
        const std::int64_t step_ms = (std::int64_t)up.spec.step_s * 1000;
        const auto consolidated = tier_samples(ti);
        const std::int64_t done_until =
            consolidated.empty() ? INT64_MIN
                                 : consolidated.back().timestamp_ms + step_ms;
        for (const Sample& s : tier_samples(ti - 1)) {
            if (s.timestamp_ms < done_until) continue;
            const std::int64_t window =
                s.timestamp_ms >= 0 ? s.timestamp_ms / step_ms
                                    : (s.timestamp_ms - step_ms + 1) / step_ms;
            Accumulator& acc = up.acc;
            if (acc.window == kNoWindow || window != acc.window) {
                acc = Accumulator{};
                acc.window = window;
                acc.count = 1;
                acc.sum = acc.min = acc.max = acc.last = s.value;
            } else {
                ++acc.count;
                acc.sum += s.value;
                acc.min = std::min(acc.min, s.value);
                acc.max = std::max(acc.max, s.value);
                acc.last = s.value;
            }
        }
    }
}

Store::Store(std::vector<TierSpec> tiers) : tiers_(std::move(tiers)) {}

void Store::append(const std::string& key, std::int64_t timestamp_ms, double value) {
    auto it = archives_.find(key);
    if (it == archives_.end()) {
        it = archives_.emplace(key, Archive(tiers_)).first;
    }
    it->second.append(timestamp_ms, value);
    ++appends_;
}

std::vector<Sample> Store::query(const std::string& key, std::int64_t from_ms,
                                 std::int64_t to_ms, std::size_t max_points) const {
    const auto it = archives_.find(key);
    if (it == archives_.end()) throw Error(Err::NoSuchArchive, key);
    return it->second.query(from_ms, to_ms, max_points);
}

std::vector<std::string> Store::keys() const {
    std::vector<std::string> out;
    out.reserve(archives_.size());
    for (const auto& [k, _] : archives_) out.push_back(k);
    return out;
}

std::string Store::archive_filename(const std::string& key) {
    std::string name = key;
    std::replace(name.begin(), name.end(), ':', '.');
    std::replace(name.begin(), name.end(), '/', '_');
    return name + ".rra";
}

void Store::flush(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [key, archive] : archives_) {
        archive.save((std::filesystem::path(dir) / archive_filename(key)).string());
    }
    std::ofstream idx(std::filesystem::path(dir) / "index.txt", std::ios::trunc);
    for (const auto& [key, _] : archives_) idx << key << '\n';
}

Store Store::open(const std::string& dir) {
    Store store;
    std::ifstream idx(std::filesystem::path(dir) / "index.txt");
    if (!idx) throw Error(Err::IoError, "no index.txt in " + dir);
    std::string key;
    while (std::getline(idx, key)) {
        if (key.empty()) continue;
        store.archives_.emplace(
            key,
            Archive::load((std::filesystem::path(dir) / archive_filename(key)).string()));
    }
    return store;
}

void export_csv(const std::vector<Sample>& samples, std::ostream& out) {
    out << "timestamp_ms,value\n";
    for (const Sample& s : samples) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", s.value);
        out << s.timestamp_ms << ',' << buf << '\n';
    }
}

}  // namespace envmon::rr
