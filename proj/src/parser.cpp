#include "attnparse/parser.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace attnparse {

namespace {

void check_length(const Scorer& scorer, int n) {
    if (n < 1) throw std::invalid_argument("parse: sentence length must be >= 1");
    if (n != scorer.size()) {
        throw std::invalid_argument("parse: length " + std::to_string(n) + " does not match scorer size " +
                                    std::to_string(scorer.size()));
    }
}

}  // namespace

ParseAlgorithm parse_algorithm(std::string_view s) {
    if (s == "greedy") return ParseAlgorithm::Greedy;
    if (s == "chart") return ParseAlgorithm::Chart;
    throw std::invalid_argument("unknown parse algorithm '" + std::string(s) + "' (expected greedy or chart)");
}

std::string_view to_string(ParseAlgorithm a) { return a == ParseAlgorithm::Greedy ? "greedy" : "chart"; }

ParseAlgorithm default_algorithm(ScoreMode mode) noexcept {
    return mode == ScoreMode::OutsideAssociation ? ParseAlgorithm::Greedy : ParseAlgorithm::Chart;
}

Chart::Chart(int n)
    : n_(n), score_(static_cast<std::size_t>(n) * n, 0.0), split_(static_cast<std::size_t>(n) * n, 0) {
    if (n < 1) throw std::invalid_argument("Chart: sentence length must be >= 1");
}

BinaryTree Chart::tree() const {
    std::vector<SplitPoint> splits;
    splits.reserve(static_cast<std::size_t>(n_ - 1));
    std::vector<Span> stack;
    if (n_ > 1) stack.push_back({0, n_ - 1});
    while (!stack.empty()) {
        const Span s = stack.back();
        stack.pop_back();
        const int k = best_split(s.x, s.y);
        splits.push_back({s, k});
        if (s.y > k) stack.push_back({k, s.y});
        if (k - 1 > s.x) stack.push_back({s.x, k - 1});
    }
    return BinaryTree(n_, std::move(splits));
}

BinaryTree greedy_parse(const Scorer& scorer, int n) {
    check_length(scorer, n);
    std::vector<SplitPoint> splits;
    splits.reserve(static_cast<std::size_t>(n - 1));
    std::vector<Span> stack;
    std::vector<double> scores;
    if (n > 1) stack.push_back({0, n - 1});
    while (!stack.empty()) {
        const Span s = stack.back();
        stack.pop_back();
        scores.clear();
        double best = -std::numeric_limits<double>::infinity();
        for (int k = s.x + 1; k <= s.y; ++k) {
            scores.push_back(scorer.split_score(s, k));
            if (scores.back() > best) best = scores.back();
        }
        int k = s.x + 1;
        while (scores[static_cast<std::size_t>(k - s.x - 1)] < best - kTieEpsilon) ++k;
        splits.push_back({s, k});
        if (s.y > k) stack.push_back({k, s.y});
        if (k - 1 > s.x) stack.push_back({s.x, k - 1});
    }
    return BinaryTree(n, std::move(splits));
}

Chart fill_chart(const Scorer& scorer, int n) {
    check_length(scorer, n);
    Chart chart(n);
    std::vector<double> scores;
    for (int width = 2; width <= n; ++width) {
        for (int x = 0; x + width - 1 < n; ++x) {
            const int y = x + width - 1;
            const Span s{x, y};
            scores.clear();
            double best = -std::numeric_limits<double>::infinity();
            for (int k = x + 1; k <= y; ++k) {
                const double v = scorer.split_score(s, k) + chart.best_score(x, k - 1) + chart.best_score(k, y);
                scores.push_back(v);
                if (v > best) best = v;
            }
            int k = x + 1;
            while (scores[static_cast<std::size_t>(k - x - 1)] < best - kTieEpsilon) ++k;
            chart.set(x, y, best, k);
        }
    }
    return chart;
}

BinaryTree chart_parse(const Scorer& scorer, int n) { return fill_chart(scorer, n).tree(); }

BinaryTree parse(const Scorer& scorer, ParseAlgorithm algo) {
    return algo == ParseAlgorithm::Greedy ? greedy_parse(scorer, scorer.size()) : chart_parse(scorer, scorer.size());
}

double tree_score(const Scorer& scorer, const BinaryTree& tree) {
    double total = 0.0;
    for (const SplitPoint& s : tree.splits()) total += scorer.split_score(s.span, s.k);
    return total;
}

}  // namespace attnparse
