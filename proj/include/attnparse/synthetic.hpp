#pragma once

// Synthetic oracle corpora. Each sentence gets a random binary tree, the
// pairwise tree distance matrix D (height of the lowest common ancestor), and
// a fabricated head A = row_softmax(-D / T) with optional uniform noise.
// Hidden states are built so that a known projection pair reproduces the
// noise-free A exactly.

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attnparse/matrix.hpp"
#include "attnparse/random.hpp"
#include "attnparse/tensor_io.hpp"
#include "attnparse/trainer.hpp"
#include "attnparse/tree.hpp"

namespace attnparse {

/// Diagonal of D: 0, or the height of the leaf's parent minus one (the
/// convention of the distance-matrix figure, where each row's minimum sits on
/// the diagonal).
enum class SelfDistance { Zero, Parent };
SelfDistance parse_self_distance(std::string_view s);
std::string_view to_string(SelfDistance s);

struct SyntheticSpec {
    int n_sentences = 50;
    int min_length = 2;
    int max_length = 10;
    double noise = 0.0;  // tau: elementwise uniform(0, tau) before renormalizing
    double temperature = 1.0;
    std::uint64_t seed = 0;
    SelfDistance self_distance = SelfDistance::Zero;

    int distractor_heads = 0;     // extra uniform heads h1..hK
    int max_pieces = 1;           // words split into 1..max_pieces pieces
    bool delimiters = false;      // add delimiter pieces at both ends
    double delimiter_mass = 0.05; // attention mass each word piece gives to delimiters

    bool hidden = true;            // emit hidden states and projections
    double hidden_noise = 0.3;     // gaussian std on the syntactic block is hidden_noise * tau
    int distractor_dims = 12;      // positional + gaussian feature columns
    double distractor_scale = 0.3; // gaussian std on the distractor columns
    int layer = 1;                 // attention layer; hidden states go to layer - 1

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    /// Syntactic block (2 * max_length) plus distractor columns.
    int d_model() const noexcept { return 2 * max_length + distractor_dims; }
};

nlohmann::json to_json(const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// D[i][j] = height of the lowest common ancestor of leaves i and j, leaves
/// having height 0.
Matrix distance_matrix(const BinaryTree& tree, SelfDistance self = SelfDistance::Zero);

/// row_softmax(-D / temperature).
Matrix tree_attention(const Matrix& distances, double temperature);

/// The projection pair under which the generated hidden states reproduce
/// row_softmax(-D / T) when noise is zero (full width, d_proj = d_model).
ProjectionPair oracle_projection(const SyntheticSpec& spec);

struct SyntheticCorpus {
    std::vector<BinaryTree> trees;
    Corpus corpus;

    /// Gold trees as labeled bracket trees over the sentence words.
    std::vector<Tree> gold() const;
};

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec);

/// Writes corpus.atn (+ sidecar), gold.txt and spec.json into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec, const SyntheticCorpus& corpus);

}  // namespace attnparse
