#include "attnparse/tree.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace attnparse {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    enum class Tok { Open, Close, Atom, End };

    Tok next(std::string_view& atom) {
        while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
        if (pos_ >= s_.size()) return Tok::End;
        const char c = s_[pos_];
        if (c == '(') { ++pos_; return Tok::Open; }
        if (c == ')') { ++pos_; return Tok::Close; }
        const std::size_t start = pos_;
        while (pos_ < s_.size() && !is_space(s_[pos_]) && s_[pos_] != '(' && s_[pos_] != ')') ++pos_;
        atom = s_.substr(start, pos_ - start);
        return Tok::Atom;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

void render(const Tree& t, std::string& out) {
    if (t.is_terminal()) {
        out += t.label;
        return;
    }
    out += '(';
    out += t.label;
    for (const Tree& c : t.children) {
        out += ' ';
        render(c, out);
    }
    out += ')';
}

void collect_leaves(const Tree& t, std::vector<std::string>& out) {
    if (t.is_terminal()) {
        out.push_back(t.label);
        return;
    }
    for (const Tree& c : t.children) collect_leaves(c, out);
}

int build_splits(const Tree& t, int start, std::vector<SplitPoint>& out) {
    if (t.is_terminal()) return start + 1;
    if (t.children.size() == 1) return build_splits(t.children.front(), start, out);
    if (t.children.size() > 2) {
        throw std::invalid_argument("BinaryTree::from_tree: node '" + t.label + "' has " +
                                    std::to_string(t.children.size()) + " children");
    }
    const std::size_t slot = out.size();
    out.emplace_back();
    const int mid = build_splits(t.children[0], start, out);
    const int end = build_splits(t.children[1], mid, out);
    out[slot] = SplitPoint{{start, end - 1}, mid};
    return end;
}

}  // namespace

Tree parse_tree(std::string_view text, std::size_t line) {
    Lexer lex(text);
    std::vector<Tree> stack;
    Tree root;
    bool have_root = false;
    std::string_view atom;
    for (;;) {
        const auto tok = lex.next(atom);
        if (tok == Lexer::Tok::End) break;
        if (have_root) throw TreeParseError(line, "trailing input after tree");
        switch (tok) {
            case Lexer::Tok::Open: {
                Tree node;
                std::string_view label;
                Lexer peek = lex;
                if (peek.next(label) == Lexer::Tok::Atom) {
                    lex = peek;
                    node.label = std::string(label);
                }
                stack.push_back(std::move(node));
                break;
            }
            case Lexer::Tok::Close: {
                if (stack.empty()) throw TreeParseError(line, "unbalanced brackets: unexpected ')'");
                Tree done = std::move(stack.back());
                stack.pop_back();
                if (done.children.empty()) throw TreeParseError(line, "empty tree node '(" + done.label + ")'");
                if (stack.empty()) {
                    root = std::move(done);
                    have_root = true;
                } else {
                    stack.back().children.push_back(std::move(done));
                }
                break;
            }
            case Lexer::Tok::Atom:
                if (stack.empty()) throw TreeParseError(line, "token '" + std::string(atom) + "' outside brackets");
                stack.back().children.push_back(Tree::terminal(std::string(atom)));
                break;
            case Lexer::Tok::End:
                break;
        }
    }
    if (!stack.empty()) throw TreeParseError(line, "unbalanced brackets: missing ')'");
    if (!have_root) throw TreeParseError(line, "empty tree");
    return root;
}

std::string to_string(const Tree& tree) {
    std::string out;
    render(tree, out);
    return out;
}

std::vector<Tree> parse_trees(std::string_view text) {
    std::vector<Tree> trees;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        ++line_no;
        bool blank = true;
        for (char c : line) blank = blank && is_space(c);
        if (!blank) trees.push_back(parse_tree(line, line_no));
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return trees;
}

std::vector<Tree> read_trees(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tree file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_trees(ss.str());
}

void write_trees(const std::filesystem::path& path, const std::vector<Tree>& trees) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write tree file " + path.string());
    for (const Tree& t : trees) out << to_string(t) << '\n';
}

std::vector<std::string> leaves(const Tree& tree) {
    std::vector<std::string> out;
    collect_leaves(tree, out);
    return out;
}

std::size_t leaf_count(const Tree& tree) {
    if (tree.is_terminal()) return 1;
    std::size_t n = 0;
    for (const Tree& c : tree.children) n += leaf_count(c);
    return n;
}

BinaryTree::BinaryTree(int n, std::vector<SplitPoint> splits) : n_(n), splits_(std::move(splits)) {
    if (n_ < 1) throw std::invalid_argument("BinaryTree: sentence length must be >= 1");
    if (splits_.size() != static_cast<std::size_t>(n_ - 1)) {
        throw std::invalid_argument("BinaryTree: expected " + std::to_string(n_ - 1) + " internal nodes, got " +
                                    std::to_string(splits_.size()));
    }
    std::vector<Span> pending;
    if (n_ > 1) pending.push_back({0, n_ - 1});
    for (const SplitPoint& s : splits_) {
        if (pending.empty() || pending.back() != s.span) {
            throw std::invalid_argument("BinaryTree: internal nodes are not a preorder of a binary tree");
        }
        pending.pop_back();
        if (s.k <= s.span.x || s.k > s.span.y) throw std::invalid_argument("BinaryTree: split outside span");
        if (s.span.y > s.k) pending.push_back({s.k, s.span.y});
        if (s.k - 1 > s.span.x) pending.push_back({s.span.x, s.k - 1});
    }
}

std::vector<Span> BinaryTree::spans() const {
    std::vector<Span> out;
    out.reserve(splits_.size());
    for (const SplitPoint& s : splits_) out.push_back(s.span);
    return out;
}

BinaryTree BinaryTree::from_tree(const Tree& tree) {
    std::vector<SplitPoint> splits;
    const int n = build_splits(tree, 0, splits);
    return BinaryTree(n, std::move(splits));
}

Tree BinaryTree::to_tree(const std::vector<std::string>& words, const std::string& label,
                         const std::string& tag) const {
    if (words.size() != static_cast<std::size_t>(n_)) {
        throw std::invalid_argument("BinaryTree::to_tree: " + std::to_string(words.size()) + " words for " +
                                    std::to_string(n_) + " leaves");
    }
    std::size_t next = 0;
    auto rec = [&](auto&& self, Span span) -> Tree {
        if (span.x == span.y) return Tree::node(tag, {Tree::terminal(words[static_cast<std::size_t>(span.x)])});
        const SplitPoint& s = splits_[next++];
        Tree left = self(self, Span{span.x, s.k - 1});
        Tree right = self(self, Span{s.k, span.y});
        return Tree::node(label, {std::move(left), std::move(right)});
    };
    return rec(rec, Span{0, n_ - 1});
}

}  // namespace attnparse
