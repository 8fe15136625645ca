#pragma once

// Straight-line reference implementations used only by tests. None of these
// call into the library's scoring, parsing, evaluation or training code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "attnparse/matrix.hpp"
#include "attnparse/random.hpp"
#include "attnparse/tree.hpp"

namespace oracle {

using attnparse::Matrix;

inline double region(const Matrix& a, int r0, int r1, int c0, int c1) {
    double s = 0.0;
    for (int i = r0; i <= r1; ++i) {
        for (int j = c0; j <= c1; ++j) s += a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    return s;
}

inline double distance(const Matrix& a, int x, int y, int z) {
    // spans (x, y) and (y + 1, z)
    double cross = 0.0;
    for (int i = x; i <= y; ++i) {
        for (int j = y + 1; j <= z; ++j) {
            cross += a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            cross += a(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
        }
    }
    return -cross / (2.0 * (y - x + 1) * (z - y));
}

inline double inside(const Matrix& a, int x, int y) {
    const double l = y - x + 1;
    return region(a, x, y, x, y) / (l * l);
}

inline double outside(const Matrix& a, int x, int y) {
    const int n = static_cast<int>(a.rows());
    double s = 0.0;
    for (int i = x; i <= y; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j >= x && j <= y) continue;
            s += a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            s += a(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
        }
    }
    const double l = y - x + 1;
    return s / (2.0 * l * n - 2.0 * l * l);
}

inline double span_score(const Matrix& a, int x, int y) { return inside(a, x, y) - outside(a, x, y); }

/// io = false: syntactic distance; io = true: sum of child span scores.
inline double split(const Matrix& a, int x, int y, int k, bool io) {
    if (!io) return distance(a, x, k - 1, y);
    return span_score(a, x, k - 1) + span_score(a, k, y);
}

/// Every binary tree over [x, y] as a list of (x, y, k) triples.
using Splits = std::vector<std::tuple<int, int, int>>;

inline std::vector<Splits> all_trees(int x, int y) {
    if (x == y) return {Splits{}};
    std::vector<Splits> out;
    for (int k = x + 1; k <= y; ++k) {
        for (const Splits& l : all_trees(x, k - 1)) {
            for (const Splits& r : all_trees(k, y)) {
                Splits s{{x, y, k}};
                s.insert(s.end(), l.begin(), l.end());
                s.insert(s.end(), r.begin(), r.end());
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

inline double total(const Matrix& a, const Splits& t, bool io) {
    double s = 0.0;
    for (auto [x, y, k] : t) s += split(a, x, y, k, io);
    return s;
}

/// Unlabeled F1 by set intersection of (x, y) spans, excluding the root and
/// unit spans. Returns {matched, predicted, gold}.
inline std::tuple<long, long, long> counts(const std::set<std::pair<int, int>>& pred,
                                           const std::set<std::pair<int, int>>& gold) {
    long m = 0;
    for (const auto& s : pred) m += gold.count(s);
    return {m, static_cast<long>(pred.size()), static_cast<long>(gold.size())};
}

inline std::set<std::pair<int, int>> span_set(const attnparse::Tree& t) {
    std::set<std::pair<int, int>> out;
    int n = 0;
    std::function<int(const attnparse::Tree&, int)> rec = [&](const attnparse::Tree& node, int start) {
        if (node.children.empty()) return start + 1;
        int end = start;
        for (const auto& c : node.children) end = rec(c, end);
        const bool pre = node.children.size() == 1 && node.children[0].children.empty();
        if (!pre) out.insert({start, end - 1});
        return end;
    };
    n = rec(t, 0);
    std::set<std::pair<int, int>> kept;
    for (const auto& s : out) {
        if (s.first == s.second) continue;
        if (s.first == 0 && s.second == n - 1) continue;
        kept.insert(s);
    }
    return kept;
}

/// softmax_rows((H Wq)(H Wk)^T * scale), written without any helpers.
inline Matrix attention(const Matrix& h, const Matrix& wq, const Matrix& wk, double scale) {
    const std::size_t n = h.rows(), dm = h.cols(), dp = wq.cols();
    Matrix q(n, dp), k(n, dp), a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < dp; ++c) {
            for (std::size_t d = 0; d < dm; ++d) {
                q(i, c) += h(i, d) * wq(d, c);
                k(i, c) += h(i, d) * wk(d, c);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dp; ++c) s += q(i, c) * k(j, c);
            a(i, j) = s * scale;
            mx = std::max(mx, a(i, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(a(i, j) - mx);
        for (std::size_t j = 0; j < n; ++j) a(i, j) = std::exp(a(i, j) - mx) / z;
    }
    return a;
}

/// Per-span softmax negative log-likelihood of the gold splits.
inline double nll(const Matrix& a, const attnparse::BinaryTree& gold, bool io) {
    double loss = 0.0;
    for (const auto& s : gold.splits()) {
        double z = 0.0;
        for (int k = s.span.x + 1; k <= s.span.y; ++k) z += std::exp(split(a, s.span.x, s.span.y, k, io));
        loss -= split(a, s.span.x, s.span.y, s.k, io) - std::log(z);
    }
    return loss;
}

inline double hinge(const Matrix& a, const attnparse::BinaryTree& gold, bool io, double margin, bool include_gold) {
    double loss = 0.0;
    for (const auto& s : gold.splits()) {
        const double g = split(a, s.span.x, s.span.y, s.k, io);
        for (int k = s.span.x + 1; k <= s.span.y; ++k) {
            if (k == s.k && !include_gold) continue;
            loss += std::max(0.0, margin + split(a, s.span.x, s.span.y, k, io) - g);
        }
    }
    return loss;
}

/// Random row-stochastic n x n matrix with strictly positive entries.
inline Matrix random_stochastic(std::size_t n, attnparse::Rng& rng) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = 0.01 + rng.uniform();
            t += m(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) m(i, j) /= t;
    }
    return m;
}

}  // namespace oracle
