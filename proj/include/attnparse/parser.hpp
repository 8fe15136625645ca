#pragma once

#include <string_view>
#include <vector>

#include "attnparse/scoring.hpp"
#include "attnparse/tree.hpp"

namespace attnparse {

enum class ParseAlgorithm { Greedy, Chart };

ParseAlgorithm parse_algorithm(std::string_view s);  // "greedy" | "chart"
std::string_view to_string(ParseAlgorithm a);

/// Best total split score and best split of every span, filled bottom-up.
class Chart {
public:
    explicit Chart(int n);

    int size() const noexcept { return n_; }
    double best_score(int x, int y) const noexcept { return score_[index(x, y)]; }
    int best_split(int x, int y) const noexcept { return split_[index(x, y)]; }

    void set(int x, int y, double score, int k) noexcept {
        score_[index(x, y)] = score;
        split_[index(x, y)] = k;
    }

    /// Top-down readout of the stored splits.
    BinaryTree tree() const;

private:
    std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(x) * n_ + y; }

    int n_;
    std::vector<double> score_;
    std::vector<int> split_;
};

/// Splits ties within this distance of the maximum go to the smallest k.
inline constexpr double kTieEpsilon = 1e-12;

/// Top-down: each span is split at its highest-scoring point.
BinaryTree greedy_parse(const Scorer& scorer, int n);

/// CKY-style: maximizes the sum of split scores over all binary trees.
/// Width-1 spans have best score 0.
Chart fill_chart(const Scorer& scorer, int n);
BinaryTree chart_parse(const Scorer& scorer, int n);

BinaryTree parse(const Scorer& scorer, ParseAlgorithm algo);

/// Sum of split scores over the internal nodes of `tree`.
double tree_score(const Scorer& scorer, const BinaryTree& tree);

/// The usual pairing: greedy for UPOA, chart for UPIO.
ParseAlgorithm default_algorithm(ScoreMode mode) noexcept;

}  // namespace attnparse
