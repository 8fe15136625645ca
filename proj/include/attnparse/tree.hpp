#pragma once

#include <compare>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attnparse {

/// Inclusive word-index range [x, y].
struct Span {
    int x = 0;
    int y = 0;

    int length() const noexcept { return y - x + 1; }
    auto operator<=>(const Span&) const = default;
};

/// Labeled n-ary constituency tree as read from PTB brackets. A terminal is a
/// node without children whose label is the word; a preterminal is a node
/// whose single child is a terminal.
struct Tree {
    std::string label;
    std::vector<Tree> children;

    static Tree terminal(std::string word) { return Tree{std::move(word), {}}; }
    static Tree node(std::string label, std::vector<Tree> children) {
        return Tree{std::move(label), std::move(children)};
    }

    bool is_terminal() const noexcept { return children.empty(); }
    bool is_preterminal() const noexcept { return children.size() == 1 && children.front().is_terminal(); }

    bool operator==(const Tree&) const = default;
};

class TreeParseError : public std::runtime_error {
public:
    TreeParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Parses one PTB s-expression. `line` is only used for error messages.
Tree parse_tree(std::string_view text, std::size_t line = 1);
std::string to_string(const Tree& tree);

/// One tree per non-blank line.
std::vector<Tree> read_trees(const std::filesystem::path& path);
std::vector<Tree> parse_trees(std::string_view text);
void write_trees(const std::filesystem::path& path, const std::vector<Tree>& trees);

std::vector<std::string> leaves(const Tree& tree);
std::size_t leaf_count(const Tree& tree);

/// One internal node of a binary tree: `span` is split into [x, k-1] and [k, y].
struct SplitPoint {
    Span span;
    int k = 0;
    auto operator<=>(const SplitPoint&) const = default;
};

/// Unlabeled binary tree over words 0..n-1, stored as its n-1 internal nodes
/// in preorder.
class BinaryTree {
public:
    BinaryTree() = default;
    /// Validates structure; throws std::invalid_argument on malformed input.
    BinaryTree(int n, std::vector<SplitPoint> splits);

    static BinaryTree single_leaf() { return BinaryTree(1, {}); }

    int size() const noexcept { return n_; }
    const std::vector<SplitPoint>& splits() const noexcept { return splits_; }
    /// Spans of all internal nodes, root included, in preorder.
    std::vector<Span> spans() const;

    /// Strictly binary conversion of a labeled tree: terminals become leaves,
    /// unary chains and preterminals are skipped. Throws std::invalid_argument
    /// for nodes with more than two children (binarize first).
    static BinaryTree from_tree(const Tree& tree);
    /// Bracketed rendering, internal nodes labeled `label` and words wrapped
    /// in preterminals tagged `tag`.
    Tree to_tree(const std::vector<std::string>& words, const std::string& label = "X",
                 const std::string& tag = "X") const;

    bool operator==(const BinaryTree&) const = default;

private:
    int n_ = 0;
    std::vector<SplitPoint> splits_;
};

}  // namespace attnparse
