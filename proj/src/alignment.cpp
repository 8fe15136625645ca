#include "attnparse/alignment.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnparse {

namespace {

// Returns the word count implied by the alignment and validates it:
// monotone over non-delimiter pieces, covering every word from 0.
std::size_t checked_word_count(std::span<const int> alignment, std::size_t pieces) {
    if (alignment.size() != pieces) {
        throw std::invalid_argument("merge_pieces: alignment length " + std::to_string(alignment.size()) +
                                    " != piece count " + std::to_string(pieces));
    }
    int prev = -1;
    for (std::size_t p = 0; p < alignment.size(); ++p) {
        const int w = alignment[p];
        if (w == -1) continue;
        if (w < 0) throw std::invalid_argument("merge_pieces: negative alignment at piece " + std::to_string(p));
        if (w < prev) throw std::invalid_argument("merge_pieces: non-monotone alignment at piece " + std::to_string(p));
        if (w > prev + 1) throw std::invalid_argument("merge_pieces: word " + std::to_string(prev + 1) + " owns no piece");
        prev = w;
    }
    if (prev < 0) throw std::invalid_argument("merge_pieces: alignment covers no words");
    return static_cast<std::size_t>(prev + 1);
}

}  // namespace

WordAttention::WordAttention(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("WordAttention: matrix is not square");
}

void WordAttention::check_stochastic(double tol) const {
    for (std::size_t i = 0; i < m_.rows(); ++i) {
        double s = 0.0;
        for (double v : m_.row(i)) {
            if (v < -tol) throw std::domain_error("WordAttention: negative entry in row " + std::to_string(i));
            s += v;
        }
        if (std::abs(s - 1.0) > tol) {
            throw std::domain_error("WordAttention: row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }
}

WordAttention merge_pieces(const Matrix& piece_attention, std::span<const int> alignment, MergeOptions options) {
    if (piece_attention.rows() != piece_attention.cols()) {
        throw std::invalid_argument("merge_pieces: piece attention is not square");
    }
    const std::size_t pieces = piece_attention.rows();
    const std::size_t n = checked_word_count(alignment, pieces);

    bool dropped = false;
    for (int w : alignment) dropped = dropped || w < 0;

    // Sum columns into words, per piece row.
    Matrix col_merged(pieces, n);
    for (std::size_t p = 0; p < pieces; ++p) {
        if (alignment[p] < 0) continue;
        double kept = 0.0;
        for (std::size_t q = 0; q < pieces; ++q) {
            const int w = alignment[q];
            if (w < 0) continue;
            col_merged(p, static_cast<std::size_t>(w)) += piece_attention(p, q);
            kept += piece_attention(p, q);
        }
        if (options.renormalize && dropped && kept > 0.0) {
            for (double& v : col_merged.row(p)) v /= kept;
        }
    }

    // Average rows of each word.
    Matrix out(n, n);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t p = 0; p < pieces; ++p) {
        if (alignment[p] < 0) continue;
        const auto w = static_cast<std::size_t>(alignment[p]);
        ++count[w];
        for (std::size_t j = 0; j < n; ++j) out(w, j) += col_merged(p, j);
    }
    for (std::size_t w = 0; w < n; ++w) {
        const double inv = 1.0 / static_cast<double>(count[w]);
        for (double& v : out.row(w)) v *= inv;
    }
    return WordAttention(std::move(out));
}

Matrix merge_piece_rows(const Matrix& piece_rows, std::span<const int> alignment) {
    const std::size_t n = checked_word_count(alignment, piece_rows.rows());
    Matrix out(n, piece_rows.cols());
    std::vector<std::size_t> count(n, 0);
    for (std::size_t p = 0; p < piece_rows.rows(); ++p) {
        if (alignment[p] < 0) continue;
        const auto w = static_cast<std::size_t>(alignment[p]);
        ++count[w];
        for (std::size_t j = 0; j < piece_rows.cols(); ++j) out(w, j) += piece_rows(p, j);
    }
    for (std::size_t w = 0; w < n; ++w) {
        const double inv = 1.0 / static_cast<double>(count[w]);
        for (double& v : out.row(w)) v *= inv;
    }
    return out;
}

}  // namespace attnparse
