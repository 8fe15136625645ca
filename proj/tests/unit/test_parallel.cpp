#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "attnparse/parallel.hpp"

using namespace attnparse;

TEST(ParallelFor, VisitsEveryIndexOnce) {
    for (std::size_t threads : {1u, 2u, 8u}) {
        std::vector<std::atomic<int>> hits(1000);
        parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    }
}

TEST(ParallelFor, ResultsIndependentOfThreadCount) {
    auto run = [](std::size_t threads) {
        std::vector<double> out(257);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= i; ++k) s += 1.0 / static_cast<double>(k + 1);
            out[i] = s;
        });
        return out;
    };
    const auto ref = run(1);
    EXPECT_EQ(run(3), ref);
    EXPECT_EQ(run(16), ref);
    EXPECT_EQ(run(0), ref);
}

TEST(ParallelFor, RethrowsLowestIndexException) {
    for (std::size_t threads : {1u, 4u}) {
        std::atomic<int> calls{0};
        try {
            parallel_for(100, threads, [&](std::size_t i) {
                calls.fetch_add(1);
                if (i == 17 || i == 60 || i == 93) throw std::runtime_error("index " + std::to_string(i));
            });
            FAIL() << "no exception";
        } catch (const std::runtime_error& e) {
            EXPECT_STREQ(e.what(), "index 17");
        }
    }
}

TEST(ParallelFor, ZeroCountIsNoOp) {
    bool called = false;
    parallel_for(0, 4, [&](std::size_t) { called = true; });
    EXPECT_FALSE(called);
}

TEST(ParallelFor, DefaultThreadsIsConfigurable) {
    const std::size_t prev = default_threads();
    EXPECT_GE(prev, 1u);
    set_default_threads(3);
    EXPECT_EQ(default_threads(), 3u);
    set_default_threads(prev);
}
