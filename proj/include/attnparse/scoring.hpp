#pragma once

// Span and split scores computed from a word-level attention matrix.
//
// Every score is linear in the attention entries: a weighted sum of
// rectangular region sums. Scorer evaluates the regions in O(1) from a
// summed-area table; the trainer reuses the same LinearScore terms to
// scatter gradients back onto the matrix.

#include <array>
#include <string_view>
#include <vector>

#include "attnparse/alignment.hpp"
#include "attnparse/matrix.hpp"
#include "attnparse/tree.hpp"

namespace attnparse {

enum class ScoreMode {
    OutsideAssociation,  // UPOA: negative mean cross-span attention
    InsideOutside,       // UPIO: sum of child span scores
};

ScoreMode parse_score_mode(std::string_view s);  // "upoa" | "upio"
std::string_view to_string(ScoreMode m);

/// weight * sum of A[r0..r1][c0..c1] (inclusive bounds).
struct WeightedRegion {
    int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
    double weight = 0.0;
};

class LinearScore {
public:
    void add(int r0, int r1, int c0, int c1, double weight) { terms_[count_++] = {r0, r1, c0, c1, weight}; }
    std::span<const WeightedRegion> terms() const noexcept { return {terms_.data(), count_}; }

private:
    std::array<WeightedRegion, 6> terms_{};
    std::size_t count_ = 0;
};

/// Terms of the split score of `span` at `k` (k = first word of the right
/// part) in a sentence of n words.
LinearScore split_terms(Span span, int k, ScoreMode mode, int n);
/// Terms of inside minus outside association of a proper subspan.
LinearScore span_terms(Span s, int n);

class Scorer {
public:
    Scorer(const WordAttention& attention, ScoreMode mode);
    Scorer(const Matrix& attention, ScoreMode mode);

    int size() const noexcept { return n_; }
    ScoreMode mode() const noexcept { return mode_; }

    /// Sum of A[r0..r1][c0..c1].
    double region_sum(int r0, int r1, int c0, int c1) const noexcept {
        const std::size_t w = static_cast<std::size_t>(n_) + 1;
        return sat_[(r1 + 1) * w + (c1 + 1)] - sat_[r0 * w + (c1 + 1)] - sat_[(r1 + 1) * w + c0] + sat_[r0 * w + c0];
    }
    double evaluate(const LinearScore& score) const noexcept;

    /// Negative mean attention between two adjacent spans, in both directions.
    double syntactic_distance(Span left, Span right) const;
    double inside_assoc(Span s) const;
    /// Throws std::domain_error for the whole-sentence span.
    double outside_assoc(Span s) const;
    double span_score(Span s) const;
    /// Split score of `s` at k, x < k <= y, under this scorer's mode.
    double split_score(Span s, int k) const;

private:
    void check_span(Span s) const;

    int n_ = 0;
    ScoreMode mode_;
    std::vector<double> sat_;
};

}  // namespace attnparse
