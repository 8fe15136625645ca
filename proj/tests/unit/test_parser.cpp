#include <gtest/gtest.h>

#include "attnparse/evaluation.hpp"
#include "attnparse/parser.hpp"
#include "oracles.hpp"

using namespace attnparse;

namespace {

oracle::Splits as_splits(const BinaryTree& t) {
    oracle::Splits out;
    for (const auto& s : t.splits()) out.emplace_back(s.span.x, s.span.y, s.k);
    return out;
}

Matrix uniform(int n) { return Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 1.0 / n); }

}  // namespace

TEST(ParseAlgorithm, ParsesNames) {
    EXPECT_EQ(parse_algorithm("greedy"), ParseAlgorithm::Greedy);
    EXPECT_EQ(parse_algorithm("chart"), ParseAlgorithm::Chart);
    EXPECT_THROW(parse_algorithm("cyk"), std::invalid_argument);
    EXPECT_EQ(default_algorithm(ScoreMode::OutsideAssociation), ParseAlgorithm::Greedy);
    EXPECT_EQ(default_algorithm(ScoreMode::InsideOutside), ParseAlgorithm::Chart);
}

TEST(Parser, TrivialLengths) {
    for (ScoreMode mode : {ScoreMode::OutsideAssociation, ScoreMode::InsideOutside}) {
        const Scorer one(uniform(1), mode);
        EXPECT_EQ(greedy_parse(one, 1).splits().size(), 0u);
        EXPECT_EQ(chart_parse(one, 1).splits().size(), 0u);
        const Scorer two(uniform(2), mode);
        const BinaryTree expect(2, {{{0, 1}, 1}});
        EXPECT_EQ(greedy_parse(two, 2), expect);
        EXPECT_EQ(chart_parse(two, 2), expect);
    }
}

TEST(Parser, UniformAttentionBreaksTiesLeftmost) {
    // Every split scores the same, so the smallest k wins everywhere and the
    // result is right-branching: (w0 (w1 (w2 ...))).
    for (int n = 2; n <= 9; ++n) {
        for (ScoreMode mode : {ScoreMode::OutsideAssociation, ScoreMode::InsideOutside}) {
            const Scorer s(uniform(n), mode);
            EXPECT_EQ(greedy_parse(s, n), right_branching(n)) << n;
            if (mode == ScoreMode::OutsideAssociation) EXPECT_EQ(chart_parse(s, n), right_branching(n)) << n;
        }
    }
}

TEST(Parser, UniformInsideOutsideChart) {
    // Under uniform attention a span score depends only on its length, and a
    // singleton outranks any longer span, so the chart peels words off the left.
    for (int n = 3; n <= 9; ++n) {
        const Scorer s(uniform(n), ScoreMode::InsideOutside);
        const BinaryTree t = chart_parse(s, n);
        double best = -1e300;
        for (const auto& cand : oracle::all_trees(0, n - 1)) best = std::max(best, oracle::total(uniform(n), cand, true));
        EXPECT_NEAR(tree_score(s, t), best, 1e-12);
    }
}

TEST(Parser, ChartMatchesBruteForce) {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + trial % 7;
        const Matrix a = oracle::random_stochastic(static_cast<std::size_t>(n), rng);
        for (ScoreMode mode : {ScoreMode::OutsideAssociation, ScoreMode::InsideOutside}) {
            const bool io = mode == ScoreMode::InsideOutside;
            const Scorer s(a, mode);
            double best = -1e300;
            for (const auto& cand : oracle::all_trees(0, n - 1)) best = std::max(best, oracle::total(a, cand, io));
            const BinaryTree t = chart_parse(s, n);
            EXPECT_NEAR(oracle::total(a, as_splits(t), io), best, 1e-12);
            EXPECT_NEAR(tree_score(s, t), best, 1e-12);
            EXPECT_NEAR(fill_chart(s, n).best_score(0, n - 1), best, 1e-12);
        }
    }
}

TEST(Parser, GreedyTakesBestTopSplit) {
    Rng rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + trial % 8;
        const Matrix a = oracle::random_stochastic(static_cast<std::size_t>(n), rng);
        const Scorer s(a, ScoreMode::OutsideAssociation);
        const BinaryTree t = greedy_parse(s, n);
        for (const auto& sp : t.splits()) {
            for (int k = sp.span.x + 1; k <= sp.span.y; ++k) {
                EXPECT_LE(oracle::split(a, sp.span.x, sp.span.y, k, false),
                          oracle::split(a, sp.span.x, sp.span.y, sp.k, false) + 1e-12);
            }
        }
    }
}

TEST(Parser, HandBuiltTree) {
    // Words 0-1 and 2-3 attend within their pairs only.
    const Matrix a = Matrix::from_rows({{0.5, 0.5, 0, 0}, {0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}});
    const BinaryTree expect(4, {{{0, 3}, 2}, {{0, 1}, 1}, {{2, 3}, 3}});
    EXPECT_EQ(greedy_parse(Scorer(a, ScoreMode::OutsideAssociation), 4), expect);
    EXPECT_EQ(chart_parse(Scorer(a, ScoreMode::InsideOutside), 4), expect);
    EXPECT_EQ(parse(Scorer(a, ScoreMode::OutsideAssociation), ParseAlgorithm::Greedy), expect);
}

TEST(Parser, LongSentencesDoNotRecurse) {
    const int n = 500;
    const Scorer s(uniform(n), ScoreMode::OutsideAssociation);
    const BinaryTree t = greedy_parse(s, n);
    EXPECT_EQ(t, right_branching(n));
    EXPECT_EQ(t.to_tree(std::vector<std::string>(n, "w")).children.size(), 2u);
}

TEST(Parser, SizeMismatchThrows) {
    const Scorer s(uniform(3), ScoreMode::OutsideAssociation);
    EXPECT_THROW(greedy_parse(s, 4), std::invalid_argument);
    EXPECT_THROW(chart_parse(s, 2), std::invalid_argument);
}
