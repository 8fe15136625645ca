#include "attnparse/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>

namespace attnparse {

namespace {

bool is_phrasal(const Tree& t) { return !t.is_terminal() && !t.is_preterminal(); }

std::optional<Tree> strip_rec(const Tree& t, const std::set<std::string>& punct) {
    if (t.is_terminal()) return t;
    if (t.is_preterminal()) {
        if (punct.contains(t.label)) return std::nullopt;
        return t;
    }
    Tree out{t.label, {}};
    for (const Tree& c : t.children) {
        if (auto s = strip_rec(c, punct)) out.children.push_back(std::move(*s));
    }
    if (out.children.empty()) return std::nullopt;
    while (out.children.size() == 1 && is_phrasal(out.children.front())) {
        std::vector<Tree> grand = std::move(out.children.front().children);
        out.children = std::move(grand);
    }
    return out;
}

bool is_intermediate(const Tree& t) { return !t.is_terminal() && !t.label.empty() && t.label.back() == '|'; }

void unbinarize_into(const Tree& t, std::vector<Tree>& out) {
    if (is_intermediate(t)) {
        for (const Tree& c : t.children) unbinarize_into(c, out);
        return;
    }
    out.push_back(unbinarize(t));
}

int collect(const Tree& t, int start, int n, BracketOptions options, std::vector<LabeledSpan>& out) {
    if (t.is_terminal()) return start + 1;
    const std::size_t slot = out.size();
    const bool phrasal = is_phrasal(t);
    if (phrasal) out.push_back({{start, start}, t.label});
    int end = start;
    for (const Tree& c : t.children) end = collect(c, end, n, options, out);
    if (phrasal) {
        const Span s{start, end - 1};
        const bool unit = s.length() == 1;
        const bool root = s.x == 0 && s.y == n - 1;
        if ((unit && !options.keep_units) || (root && !options.keep_root)) {
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(slot));
        } else {
            out[slot].span = s;
        }
    }
    return end;
}

double percent(std::int64_t num, std::int64_t den) { return den == 0 ? 0.0 : 100.0 * num / den; }

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

const std::set<std::string>& default_punct_tags() {
    static const std::set<std::string> tags{".", ",", ":", "``", "''", "-LRB-", "-RRB-"};
    return tags;
}

Tree strip_punct(const Tree& tree, const std::set<std::string>& punct) {
    auto out = strip_rec(tree, punct);
    if (!out) throw std::invalid_argument("strip_punct: tree is empty after removing punctuation");
    return std::move(*out);
}

Tree binarize(const Tree& tree) {
    if (tree.is_terminal() || tree.is_preterminal()) return tree;
    std::vector<Tree> kids;
    kids.reserve(tree.children.size());
    for (const Tree& c : tree.children) kids.push_back(binarize(c));
    if (kids.size() <= 2) return Tree{tree.label, std::move(kids)};
    const std::string mid = (is_intermediate(tree) ? tree.label : tree.label + "|");
    Tree right{mid, {std::move(kids[kids.size() - 2]), std::move(kids.back())}};
    for (std::size_t i = kids.size() - 2; i-- > 1;) {
        right = Tree{mid, {std::move(kids[i]), std::move(right)}};
    }
    return Tree{tree.label, {std::move(kids[0]), std::move(right)}};
}

Tree unbinarize(const Tree& tree) {
    if (tree.is_terminal()) return tree;
    Tree out{tree.label, {}};
    for (const Tree& c : tree.children) unbinarize_into(c, out.children);
    return out;
}

std::string strip_function_tags(std::string_view label) {
    if (label.empty() || label.front() == '-') return std::string(label);
    const auto cut = label.find_first_of("-=", 1);
    return std::string(label.substr(0, cut));
}

std::vector<LabeledSpan> labeled_brackets(const Tree& tree, BracketOptions options) {
    std::vector<LabeledSpan> out;
    const int n = static_cast<int>(leaf_count(tree));
    collect(tree, 0, n, options, out);
    return out;
}

std::vector<Span> brackets(const Tree& tree, BracketOptions options) {
    std::vector<Span> out;
    for (auto& b : labeled_brackets(tree, options)) out.push_back(b.span);
    return out;
}

std::vector<Span> brackets(const BinaryTree& tree, BracketOptions options) {
    std::vector<Span> out;
    const int n = tree.size();
    for (const Span& s : tree.spans()) {
        if (s.x == 0 && s.y == n - 1 && !options.keep_root) continue;
        out.push_back(s);
    }
    if (options.keep_units) {
        for (int i = 0; i < n; ++i) {
            if (n > 1 || options.keep_root) out.push_back({i, i});
        }
    }
    return out;
}

BracketCounts match_brackets(std::vector<Span> pred, std::vector<Span> gold) {
    std::sort(pred.begin(), pred.end());
    std::sort(gold.begin(), gold.end());
    BracketCounts c;
    c.predicted = static_cast<std::int64_t>(pred.size());
    c.gold = static_cast<std::int64_t>(gold.size());
    auto p = pred.begin();
    auto g = gold.begin();
    while (p != pred.end() && g != gold.end()) {
        if (*p < *g) {
            ++p;
        } else if (*g < *p) {
            ++g;
        } else {
            ++c.matched;
            ++p;
            ++g;
        }
    }
    return c;
}

double sentence_f1(const BracketCounts& c) {
    if (c.gold == 0 && c.predicted == 0) return 100.0;
    return f1_of(percent(c.matched, c.predicted), percent(c.matched, c.gold));
}

LeafCountMismatch::LeafCountMismatch(std::size_t sentence, std::size_t pred, std::size_t gold)
    : std::invalid_argument("sentence " + std::to_string(sentence) + ": prediction has " + std::to_string(pred) +
                            " leaves, gold has " + std::to_string(gold)),
      sentence_(sentence) {}

EvalReport unlabeled_f1(const std::vector<Tree>& pred, const std::vector<Tree>& gold, BracketOptions options) {
    if (pred.size() != gold.size()) {
        throw std::invalid_argument("unlabeled_f1: " + std::to_string(pred.size()) + " predictions for " +
                                    std::to_string(gold.size()) + " gold trees");
    }
    EvalReport r;
    r.sentences = pred.size();
    double f1_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::size_t np = leaf_count(pred[i]);
        const std::size_t ng = leaf_count(gold[i]);
        if (np != ng) throw LeafCountMismatch(i, np, ng);
        const BracketCounts c = match_brackets(brackets(pred[i], options), brackets(gold[i], options));
        r.counts.matched += c.matched;
        r.counts.gold += c.gold;
        r.counts.predicted += c.predicted;
        r.sentence_f1.push_back(sentence_f1(c));
        f1_sum += r.sentence_f1.back();
    }
    r.corpus_precision = percent(r.counts.matched, r.counts.predicted);
    r.corpus_recall = percent(r.counts.matched, r.counts.gold);
    r.corpus_f1 = f1_of(r.corpus_precision, r.corpus_recall);
    if (r.counts.gold == 0 && r.counts.predicted == 0 && r.sentences > 0) r.corpus_f1 = 100.0;
    r.sentence_f1_mean = r.sentences == 0 ? 0.0 : f1_sum / static_cast<double>(r.sentences);
    return r;
}

std::map<std::string, double> label_recall(const std::vector<Tree>& pred, const std::vector<Tree>& gold,
                                           BracketOptions options) {
    if (pred.size() != gold.size()) throw std::invalid_argument("label_recall: corpus sizes differ");
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> hits;  // label -> (found, total)
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::size_t np = leaf_count(pred[i]);
        const std::size_t ng = leaf_count(gold[i]);
        if (np != ng) throw LeafCountMismatch(i, np, ng);
        std::vector<Span> p = brackets(pred[i], options);
        std::sort(p.begin(), p.end());
        for (const LabeledSpan& b : labeled_brackets(gold[i], options)) {
            auto& h = hits[strip_function_tags(b.label)];
            ++h.second;
            if (std::binary_search(p.begin(), p.end(), b.span)) ++h.first;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [label, h] : hits) out[label] = percent(h.first, h.second);
    return out;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["corpus_f1"] = r.corpus_f1;
    j["corpus_precision"] = r.corpus_precision;
    j["corpus_recall"] = r.corpus_recall;
    j["sentence_f1_mean"] = r.sentence_f1_mean;
    j["sentences"] = r.sentences;
    j["matched"] = r.counts.matched;
    j["gold_brackets"] = r.counts.gold;
    j["predicted_brackets"] = r.counts.predicted;
    if (!r.per_label_recall.empty()) j["per_label_recall"] = r.per_label_recall;
    return j;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream os;
    char buf[128];
    auto row = [&](const std::string& name, const std::string& value) {
        std::snprintf(buf, sizeof buf, "%-22s %12s\n", name.c_str(), value.c_str());
        os << buf;
    };
    auto pct = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };
    row("sentences", std::to_string(r.sentences));
    row("gold brackets", std::to_string(r.counts.gold));
    row("predicted brackets", std::to_string(r.counts.predicted));
    row("matched brackets", std::to_string(r.counts.matched));
    row("corpus precision", pct(r.corpus_precision));
    row("corpus recall", pct(r.corpus_recall));
    row("corpus F1", pct(r.corpus_f1));
    row("sentence F1 (mean)", pct(r.sentence_f1_mean));
    for (const auto& [label, v] : r.per_label_recall) row("recall " + label, pct(v));
    return os.str();
}

BaselineKind parse_baseline_kind(std::string_view s) {
    if (s == "left") return BaselineKind::Left;
    if (s == "right") return BaselineKind::Right;
    if (s == "random") return BaselineKind::Random;
    throw std::invalid_argument("unknown baseline '" + std::string(s) + "' (expected left, right or random)");
}

namespace {

template <class Choose>
BinaryTree build_topdown(int n, Choose choose) {
    if (n < 1) throw std::invalid_argument("baseline tree: n must be >= 1");
    std::vector<SplitPoint> splits;
    std::vector<Span> stack;
    if (n > 1) stack.push_back({0, n - 1});
    while (!stack.empty()) {
        const Span s = stack.back();
        stack.pop_back();
        const int k = choose(s);
        splits.push_back({s, k});
        if (s.y > k) stack.push_back({k, s.y});
        if (k - 1 > s.x) stack.push_back({s.x, k - 1});
    }
    return BinaryTree(n, std::move(splits));
}

}  // namespace

BinaryTree left_branching(int n) {
    return build_topdown(n, [](Span s) { return s.y; });
}

BinaryTree right_branching(int n) {
    return build_topdown(n, [](Span s) { return s.x + 1; });
}

BinaryTree random_tree(int n, Rng& rng) {
    return build_topdown(n, [&](Span s) { return rng.uniform_int(s.x + 1, s.y); });
}

BinaryTree baseline_tree(int n, BaselineKind kind, Rng& rng) {
    switch (kind) {
        case BaselineKind::Left: return left_branching(n);
        case BaselineKind::Right: return right_branching(n);
        case BaselineKind::Random: return random_tree(n, rng);
    }
    return right_branching(n);
}

}  // namespace attnparse
