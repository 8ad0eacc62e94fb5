#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "envmon/rng.hpp"
#include "envmon/rrstore.hpp"

using namespace envmon;
using namespace envmon::rr;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("envmon-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

// One brute-force consolidation level: group the finer tier's samples by
// window start; every window except the newest seen is closed and emitted.
std::vector<Sample> consolidate_once(const std::vector<Sample>& finer,
                                     const TierSpec& spec) {
    const std::int64_t step_ms = (std::int64_t)spec.step_s * 1000;
    std::map<std::int64_t, std::vector<double>> windows;
    std::int64_t newest_window = INT64_MIN;
    for (const auto& s : finer) {
        const std::int64_t start = s.timestamp_ms / step_ms * step_ms;
        windows[start].push_back(s.value);
        newest_window = std::max(newest_window, start);
    }
    std::vector<Sample> out;
    for (const auto& [start, values] : windows) {
        if (start >= newest_window) continue;  // still accumulating
        double v = values.back();
        if (spec.cons == Consolidation::Avg) {
            v = 0.0;
            for (double x : values) v += x;
            v /= (double)values.size();
        } else if (spec.cons == Consolidation::Min) {
            v = *std::min_element(values.begin(), values.end());
        } else if (spec.cons == Consolidation::Max) {
            v = *std::max_element(values.begin(), values.end());
        }
        out.push_back({start, v});
    }
    return out;
}

// Expected retained content of tier `level` after replaying `history`.
// Tier 0 keeps appends verbatim; tier k consolidates tier k-1's emissions.
std::vector<Sample> brute_force_tier(const std::vector<Sample>& history,
                                     const std::vector<TierSpec>& tiers,
                                     std::size_t level) {
    std::vector<Sample> cur = history;
    for (std::size_t t = 1; t <= level; ++t) cur = consolidate_once(cur, tiers[t]);
    if (cur.size() > tiers[level].capacity) {
        cur.erase(cur.begin(),
                  cur.end() - (std::ptrdiff_t)tiers[level].capacity);
    }
    return cur;
}

}  // namespace

TEST_CASE("consolidation matches brute force over random appends") {
    const std::vector<TierSpec> tiers = {
        {1, 64, Consolidation::Last},
        {5, 40, Consolidation::Avg},
        {20, 12, Consolidation::Avg},
    };
    Archive archive(tiers);
    std::vector<Sample> history;
    Rng rng(0x5704e);
    std::int64_t ts = 0;
    for (int i = 0; i < 100000; ++i) {
        ts += 100 + (std::int64_t)(rng.next_u64() % 3000);
        const double v = rng.next_gaussian() * 10.0 + 20.0;
        archive.append(ts, v);
        history.push_back({ts, v});
    }
    for (std::size_t t = 0; t < tiers.size(); ++t) {
        const auto expect = brute_force_tier(history, tiers, t);
        const auto got = archive.tier_samples(t);
        REQUIRE(got.size() == expect.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].timestamp_ms == expect[i].timestamp_ms);
            CHECK(got[i].value == doctest::Approx(expect[i].value).epsilon(1e-12));
        }
    }
}

TEST_CASE("out-of-order appends are rejected") {
    Archive a(Archive::default_tiers());
    a.append(1000, 1.0);
    CHECK_THROWS_AS(a.append(1000, 2.0), Error);
    CHECK_THROWS_AS(a.append(999, 2.0), Error);
    a.append(1001, 2.0);
}

TEST_CASE("raw-tier query returns exactly the retained suffix") {
    const std::vector<TierSpec> tiers = {{1, 10, Consolidation::Last}};
    Archive a(tiers);
    for (int i = 0; i < 25; ++i) a.append(1000LL * i, (double)i);
    const auto got = a.query(0, 26000, 1000);
    REQUIRE(got.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(got[i].timestamp_ms == 1000LL * (15 + i));
        CHECK(got[i].value == (double)(15 + i));
    }
}

TEST_CASE("query falls back to coarser tiers and caps the point count") {
    Archive a(Archive::default_tiers());
    for (int i = 0; i < 8000; ++i) a.append(1000LL * i, (double)i);
    // The raw hour only covers the last 3600 s; asking from t=0 needs tier 2.
    const auto coarse = a.query(0, 8000 * 1000, 100000);
    REQUIRE(!coarse.empty());
    CHECK(coarse.front().timestamp_ms < (8000 - 3600) * 1000);
    const auto capped = a.query(0, 8000 * 1000, 16);
    CHECK(capped.size() <= 16);
    REQUIRE(!capped.empty());
}

TEST_CASE("file round trip is bit-exact") {
    TempDir dir;
    const auto path = (dir.path / "a.rra").string();
    Archive a(Archive::default_tiers());
    Rng rng(0xf11e);
    std::int64_t ts = 0;
    for (int i = 0; i < 20000; ++i) {
        ts += 1000;
        a.append(ts, rng.next_gaussian());
    }
    a.save(path);
    const Archive b = Archive::load(path);
    REQUIRE(b.tier_count() == a.tier_count());
    for (std::size_t t = 0; t < a.tier_count(); ++t) {
        const auto sa = a.tier_samples(t);
        const auto sb = b.tier_samples(t);
        REQUIRE(sa.size() == sb.size());
        for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i] == sb[i]);
    }
    // Saving the loaded copy reproduces the file byte for byte.
    const auto path2 = (dir.path / "b.rra").string();
    b.save(path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
}

TEST_CASE("appends continue seamlessly after a save/load cycle") {
    TempDir dir;
    const auto path = (dir.path / "c.rra").string();
    const std::vector<TierSpec> tiers = {{1, 100, Consolidation::Last},
                                         {10, 50, Consolidation::Avg}};
    Archive a(tiers);
    std::vector<Sample> history;
    for (int i = 0; i < 57; ++i) {
        a.append(1000LL * i, (double)i);
        history.push_back({1000LL * i, (double)i});
    }
    a.save(path);
    Archive b = Archive::load(path);
    for (int i = 57; i < 130; ++i) {
        b.append(1000LL * i, (double)i);
        history.push_back({1000LL * i, (double)i});
    }
    const auto expect = brute_force_tier(history, tiers, 1);
    const auto got = b.tier_samples(1);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].timestamp_ms == expect[i].timestamp_ms);
        CHECK(got[i].value == doctest::Approx(expect[i].value).epsilon(1e-12));
    }
}

TEST_CASE("corrupted archives are rejected") {
    TempDir dir;
    const auto path = (dir.path / "d.rra").string();
    Archive a(Archive::default_tiers());
    for (int i = 1; i <= 100; ++i) a.append(1000LL * i, (double)i);
    a.save(path);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("JUNK", 4);
        f.close();
        CHECK_THROWS_AS((void)Archive::load(path), Error);
    }
    SUBCASE("truncated file") {
        const auto size = fs::file_size(path);
        fs::resize_file(path, size / 2);
        CHECK_THROWS_AS((void)Archive::load(path), Error);
    }
    SUBCASE("trailing garbage") {
        std::ofstream f(path, std::ios::app | std::ios::binary);
        f << "extra";
        f.close();
        CHECK_THROWS_AS((void)Archive::load(path), Error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)Archive::load((dir.path / "nope.rra").string()),
                        Error);
    }
}

TEST_CASE("store flush/open round-trips keyed archives") {
    TempDir dir;
    Store store;
    store.append("sau-1:1:28ab:temp_c", 1000, 21.5);
    store.append("sau-1:1:28ab:temp_c", 2000, 21.6);
    store.append("sau-2:0:-:heartbeat", 1500, 1.0);
    store.flush(dir.path.string());

    const Store back = Store::open(dir.path.string());
    REQUIRE(back.keys().size() == 2);
    const auto samples = back.query("sau-1:1:28ab:temp_c", 0, 10000, 100);
    REQUIRE(samples.size() == 2);
    CHECK(samples[1].value == 21.6);
    CHECK_THROWS_AS((void)back.query("missing", 0, 1, 10), Error);
}

TEST_CASE("csv export") {
    std::ostringstream out;
    export_csv({{1000, 1.5}, {2000, -2.0}}, out);
    CHECK(out.str() == "timestamp_ms,value\n1000,1.5\n2000,-2\n");
}
