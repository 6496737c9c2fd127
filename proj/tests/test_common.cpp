#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "bcgen/common.hpp"

using namespace bcgen;

TEST_CASE("fnv1a matches known vectors") {
    // Reference values of the standard 64-bit FNV-1a parameters.
    CHECK(fnv1a(std::string("")) == 0xcbf29ce484222325ull);
    CHECK(fnv1a(std::string("a")) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a(std::string("foobar")) == 0x85944171f73967e8ull);
}

TEST_CASE("hex64 is 16 lowercase hex digits") {
    CHECK(hex64(0) == "0000000000000000");
    CHECK(hex64(0xdeadbeefull) == "00000000deadbeef");
    CHECK(hex64(~0ull) == "ffffffffffffffff");
}

TEST_CASE("rng determinism and stream independence") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    // different seeds diverge
    Rng a2(42);
    bool differs = false;
    for (int i = 0; i < 10; ++i)
        if (a2.uniform() != c.uniform()) differs = true;
    CHECK(differs);
}

TEST_CASE("rng child streams are deterministic and distinct") {
    Rng root(7);
    Rng c1 = root.child(1);
    Rng c2 = root.child(2);
    Rng c1_again = Rng(7).child(1);
    CHECK(c1.next_u64() == c1_again.next_u64());
    CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("rng normal has plausible moments") {
    Rng rng(123);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng exponential mean") {
    Rng rng(5);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += rng.exponential(2.5);
    CHECK(sum / n == doctest::Approx(2.5).epsilon(0.02));
}

TEST_CASE("rng index stays in range and covers values") {
    Rng rng(9);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.index(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}
