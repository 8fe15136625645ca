#include "attnparse/scoring.hpp"

#include <stdexcept>
#include <string>

namespace attnparse {

ScoreMode parse_score_mode(std::string_view s) {
    if (s == "upoa" || s == "fpoa" || s == "oa") return ScoreMode::OutsideAssociation;
    if (s == "upio" || s == "fpio" || s == "io") return ScoreMode::InsideOutside;
    throw std::invalid_argument("unknown score mode '" + std::string(s) + "' (expected upoa or upio)");
}

std::string_view to_string(ScoreMode m) { return m == ScoreMode::OutsideAssociation ? "upoa" : "upio"; }

LinearScore span_terms(Span s, int n) {
    const double l = s.length();
    const double outside_area = 2.0 * l * n - 2.0 * l * l;
    if (outside_area <= 0.0) throw std::domain_error("outside association undefined for the whole-sentence span");
    LinearScore t;
    // inside/l^2 - (rows + cols - 2 inside)/outside_area
    t.add(s.x, s.y, s.x, s.y, 1.0 / (l * l) + 2.0 / outside_area);
    t.add(s.x, s.y, 0, n - 1, -1.0 / outside_area);
    t.add(0, n - 1, s.x, s.y, -1.0 / outside_area);
    return t;
}

LinearScore split_terms(Span span, int k, ScoreMode mode, int n) {
    if (k <= span.x || k > span.y) {
        throw std::invalid_argument("split index " + std::to_string(k) + " outside (" + std::to_string(span.x) + ", " +
                                    std::to_string(span.y) + "]");
    }
    if (mode == ScoreMode::OutsideAssociation) {
        const double left = k - span.x;
        const double right = span.y - k + 1;
        const double w = -1.0 / (2.0 * left * right);
        LinearScore t;
        t.add(span.x, k - 1, k, span.y, w);
        t.add(k, span.y, span.x, k - 1, w);
        return t;
    }
    const LinearScore a = span_terms({span.x, k - 1}, n);
    const LinearScore b = span_terms({k, span.y}, n);
    LinearScore t;
    for (const auto& r : a.terms()) t.add(r.r0, r.r1, r.c0, r.c1, r.weight);
    for (const auto& r : b.terms()) t.add(r.r0, r.r1, r.c0, r.c1, r.weight);
    return t;
}

Scorer::Scorer(const WordAttention& attention, ScoreMode mode) : Scorer(attention.matrix(), mode) {}

Scorer::Scorer(const Matrix& a, ScoreMode mode) : n_(static_cast<int>(a.rows())), mode_(mode) {
    if (a.rows() != a.cols()) throw std::invalid_argument("Scorer: attention matrix is not square");
    if (n_ < 1) throw std::invalid_argument("Scorer: empty attention matrix");
    const std::size_t n = a.rows();
    const std::size_t w = n + 1;
    sat_.assign(w * w, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += a(i, j);
            sat_[(i + 1) * w + (j + 1)] = sat_[i * w + (j + 1)] + row;
        }
    }
}

double Scorer::evaluate(const LinearScore& score) const noexcept {
    double s = 0.0;
    for (const auto& r : score.terms()) s += r.weight * region_sum(r.r0, r.r1, r.c0, r.c1);
    return s;
}

void Scorer::check_span(Span s) const {
    if (s.x < 0 || s.x > s.y || s.y >= n_) {
        throw std::out_of_range("span (" + std::to_string(s.x) + ", " + std::to_string(s.y) +
                                ") out of range for sentence of length " + std::to_string(n_));
    }
}

double Scorer::syntactic_distance(Span left, Span right) const {
    check_span(left);
    check_span(right);
    if (right.x != left.y + 1) throw std::invalid_argument("syntactic_distance: spans are not adjacent");
    const double cross = region_sum(left.x, left.y, right.x, right.y) + region_sum(right.x, right.y, left.x, left.y);
    return -cross / (2.0 * left.length() * right.length());
}

double Scorer::inside_assoc(Span s) const {
    check_span(s);
    const double l = s.length();
    return region_sum(s.x, s.y, s.x, s.y) / (l * l);
}

double Scorer::outside_assoc(Span s) const {
    check_span(s);
    const double l = s.length();
    const double area = 2.0 * l * n_ - 2.0 * l * l;
    if (area <= 0.0) throw std::domain_error("outside association undefined for the whole-sentence span");
    const double inside = region_sum(s.x, s.y, s.x, s.y);
    const double from_span = region_sum(s.x, s.y, 0, n_ - 1) - inside;
    const double to_span = region_sum(0, n_ - 1, s.x, s.y) - inside;
    return (from_span + to_span) / area;
}

double Scorer::span_score(Span s) const { return inside_assoc(s) - outside_assoc(s); }

double Scorer::split_score(Span s, int k) const {
    check_span(s);
    if (k <= s.x || k > s.y) {
        throw std::invalid_argument("split index " + std::to_string(k) + " outside (" + std::to_string(s.x) + ", " +
                                    std::to_string(s.y) + "]");
    }
    if (mode_ == ScoreMode::OutsideAssociation) return syntactic_distance({s.x, k - 1}, {k, s.y});
    return span_score({s.x, k - 1}) + span_score({k, s.y});
}

}  // namespace attnparse
