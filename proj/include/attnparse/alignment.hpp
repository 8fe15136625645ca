#pragma once

#include <span>

#include "attnparse/matrix.hpp"

namespace attnparse {

/// Word-level attention: entry (i, j) is the weight with which word i attends
/// to word j. Row-stochastic when produced with renormalization on.
class WordAttention {
public:
    WordAttention() = default;
    explicit WordAttention(Matrix m);

    std::size_t size() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }

    /// Throws unless every row sums to 1 within tol and entries are >= -tol.
    void check_stochastic(double tol) const;

private:
    Matrix m_;
};

struct MergeOptions {
    /// After dropping delimiter pieces (alignment -1), rescale each row to
    /// sum to 1 again. With this off, rows lose the delimiter mass.
    bool renormalize = true;
};

/// Collapses piece-level attention to word level: columns of one word are
/// summed (attention to the word), then rows of one word are averaged
/// (attention from the word). Delimiter pieces are dropped first.
WordAttention merge_pieces(const Matrix& piece_attention, std::span<const int> alignment,
                           MergeOptions options = {});

/// Word-level hidden states: rows of a word's pieces are averaged,
/// delimiter rows are dropped.
Matrix merge_piece_rows(const Matrix& piece_rows, std::span<const int> alignment);

}  // namespace attnparse
