#pragma once

// Unlabeled bracketing F1 in the style of evalb, per-label recall,
// punctuation stripping, binarization and trivial baseline trees.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attnparse/random.hpp"
#include "attnparse/tree.hpp"

namespace attnparse {

/// PTB punctuation preterminal tags removed before evaluation.
const std::set<std::string>& default_punct_tags();

/// Removes preterminals tagged with a label in `punct`, drops nodes left
/// empty and collapses unary chains between phrasal nodes, keeping the top
/// label. Throws std::invalid_argument if nothing remains.
Tree strip_punct(const Tree& tree, const std::set<std::string>& punct = default_punct_tags());

/// Right-branching binarization: (X a b c) -> (X a (X| b c)). Intermediate
/// nodes carry the parent label plus '|' so unbinarize can remove them.
Tree binarize(const Tree& tree);
Tree unbinarize(const Tree& tree);

/// "NP-SBJ-1" -> "NP", "PP=2" -> "PP"; labels starting with '-' are kept.
std::string strip_function_tags(std::string_view label);

struct BracketOptions {
    bool keep_root = false;   // count the whole-sentence span
    bool keep_units = false;  // count length-1 spans
};

struct LabeledSpan {
    Span span;
    std::string label;
};

/// Spans of phrasal nodes (neither terminals nor preterminals), as a multiset
/// in preorder.
std::vector<LabeledSpan> labeled_brackets(const Tree& tree, BracketOptions options = {});
std::vector<Span> brackets(const Tree& tree, BracketOptions options = {});
std::vector<Span> brackets(const BinaryTree& tree, BracketOptions options = {});

struct BracketCounts {
    std::int64_t matched = 0;
    std::int64_t gold = 0;
    std::int64_t predicted = 0;
};

/// Multiset intersection size of two bracket lists.
BracketCounts match_brackets(std::vector<Span> pred, std::vector<Span> gold);

/// Percent F1 of one sentence; 100 when neither side has brackets.
double sentence_f1(const BracketCounts& c);

struct EvalReport {
    double corpus_precision = 0.0;
    double corpus_recall = 0.0;
    double corpus_f1 = 0.0;
    double sentence_f1_mean = 0.0;
    BracketCounts counts;
    std::size_t sentences = 0;
    std::vector<double> sentence_f1;
    std::map<std::string, double> per_label_recall;
};

/// Raised for a pred/gold pair whose leaf counts differ.
class LeafCountMismatch : public std::invalid_argument {
public:
    LeafCountMismatch(std::size_t sentence, std::size_t pred, std::size_t gold);
    std::size_t sentence() const noexcept { return sentence_; }

private:
    std::size_t sentence_;
};

/// Both levels are always filled; trees are compared as given (strip
/// punctuation first if needed).
EvalReport unlabeled_f1(const std::vector<Tree>& pred, const std::vector<Tree>& gold, BracketOptions options = {});

/// Percent of gold constituents of each label whose span occurs among the
/// predicted brackets. Labels absent from gold are omitted.
std::map<std::string, double> label_recall(const std::vector<Tree>& pred, const std::vector<Tree>& gold,
                                           BracketOptions options = {});

nlohmann::json to_json(const EvalReport& report);
/// Aligned plain-text table; per-label rows when the map is non-empty.
std::string format_report(const EvalReport& report);

enum class BaselineKind { Left, Right, Random };
BaselineKind parse_baseline_kind(std::string_view s);

/// Left- or right-branching spine, or a random tree drawn by choosing each
/// split uniformly among the span's split points.
BinaryTree baseline_tree(int n, BaselineKind kind, Rng& rng);
BinaryTree left_branching(int n);
BinaryTree right_branching(int n);
BinaryTree random_tree(int n, Rng& rng);

}  // namespace attnparse
