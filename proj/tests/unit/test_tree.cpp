#include <gtest/gtest.h>

#include "attnparse/tree.hpp"
#include "temp_dir.hpp"

using namespace attnparse;

TEST(TreeParse, RoundTripsBrackets) {
    const std::string text = "(S (NP (DT the) (NN dog)) (VP (VBD barked)))";
    const Tree t = parse_tree(text);
    EXPECT_EQ(t.label, "S");
    EXPECT_EQ(to_string(t), text);
    EXPECT_EQ(leaves(t), (std::vector<std::string>{"the", "dog", "barked"}));
    EXPECT_EQ(leaf_count(t), 3u);
}

TEST(TreeParse, AcceptsEmptyRootWrapper) {
    const Tree t = parse_tree("( (S (NN a) (NN b)) )");
    EXPECT_EQ(leaves(t), (std::vector<std::string>{"a", "b"}));
}

TEST(TreeParse, ToleratesExtraWhitespace) {
    const Tree a = parse_tree("(S (A x) (B y))");
    const Tree b = parse_tree("  (S\n\t(A   x)(B y) )  ");
    EXPECT_EQ(a, b);
}

TEST(TreeParse, RejectsMalformedInputWithLineNumber) {
    for (const char* bad : {"(S (A x)", "(S (A x)))", "S A x", "", "(S (A x)) (T y)"}) {
        try {
            parse_tree(bad, 7);
            FAIL() << "accepted '" << bad << "'";
        } catch (const TreeParseError& e) {
            EXPECT_EQ(e.line(), 7u);
            EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
        }
    }
}

TEST(TreeParse, ParseTreesSkipsBlankLinesAndReportsLine) {
    EXPECT_EQ(parse_trees("(S (A x))\n\n(S (B y))\n").size(), 2u);
    try {
        parse_trees("(S (A x))\n(S (B y)\n");
        FAIL();
    } catch (const TreeParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(TreeIo, WriteThenReadRoundTrips) {
    TempDir dir;
    const std::vector<Tree> trees = parse_trees("(S (A x) (B y))\n(S (C z))\n");
    write_trees(dir / "t.txt", trees);
    EXPECT_EQ(read_trees(dir / "t.txt"), trees);
    EXPECT_THROW(read_trees(dir / "missing.txt"), std::runtime_error);
}

TEST(BinaryTree, FromTreeSkipsPreterminalsAndUnaries) {
    const Tree t = parse_tree("(S (NP (NP (DT a) (NN b))) (VP (V c)))");
    const BinaryTree b = BinaryTree::from_tree(t);
    EXPECT_EQ(b.size(), 3);
    ASSERT_EQ(b.splits().size(), 2u);
    EXPECT_EQ(b.splits()[0], (SplitPoint{{0, 2}, 2}));
    EXPECT_EQ(b.splits()[1], (SplitPoint{{0, 1}, 1}));
}

TEST(BinaryTree, FromTreeRejectsTernary) {
    EXPECT_THROW(BinaryTree::from_tree(parse_tree("(S (A x) (B y) (C z))")), std::invalid_argument);
}

TEST(BinaryTree, ValidatesStructure) {
    EXPECT_NO_THROW(BinaryTree(2, {{{0, 1}, 1}}));
    EXPECT_THROW(BinaryTree(2, {}), std::invalid_argument);
    EXPECT_THROW(BinaryTree(2, {{{0, 1}, 0}}), std::invalid_argument);
    EXPECT_THROW(BinaryTree(3, {{{0, 2}, 1}, {{0, 1}, 1}}), std::invalid_argument);
    EXPECT_THROW(BinaryTree(0, {}), std::invalid_argument);
}

TEST(BinaryTree, SpansInPreorder) {
    const BinaryTree b(4, {{{0, 3}, 2}, {{0, 1}, 1}, {{2, 3}, 3}});
    EXPECT_EQ(b.spans(), (std::vector<Span>{{0, 3}, {0, 1}, {2, 3}}));
}

TEST(BinaryTree, ToTreeRoundTrips) {
    const BinaryTree b(4, {{{0, 3}, 1}, {{1, 3}, 3}, {{1, 2}, 2}});
    const Tree t = b.to_tree({"a", "b", "c", "d"});
    EXPECT_EQ(to_string(t), "(X (X a) (X (X (X b) (X c)) (X d)))");
    EXPECT_EQ(BinaryTree::from_tree(t), b);
}
