#pragma once

// Head selection and combination. A selector lists (layer, head, weight)
// triples; combining merges each head to word level and mixes them with the
// weights normalized to sum to 1.

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "attnparse/alignment.hpp"
#include "attnparse/evaluation.hpp"
#include "attnparse/parser.hpp"
#include "attnparse/scoring.hpp"
#include "attnparse/tensor_io.hpp"

namespace attnparse {

struct WeightedHead {
    HeadId id;
    double weight = 1.0;
    bool operator==(const WeightedHead&) const = default;
};

class HeadSelector {
public:
    /// Throws std::invalid_argument if empty, if a weight is negative or not
    /// finite, if all weights are zero, or on duplicate heads.
    explicit HeadSelector(std::vector<WeightedHead> entries);

    /// Equal weights over the given heads.
    static HeadSelector uniform(const std::vector<HeadId>& heads);

    const std::vector<WeightedHead>& entries() const noexcept { return entries_; }
    /// Weights divided by their sum.
    std::vector<double> normalized_weights() const;

    nlohmann::json to_json() const;
    static HeadSelector from_json(const nlohmann::json& j);
    static HeadSelector load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<WeightedHead> entries_;
};

/// Σ w_i A_i over word-level matrices with normalized weights.
Matrix combine_matrices(std::span<const Matrix> heads, std::span<const double> weights);

WordAttention combine(const HeadSelector& selector, const SentenceRecord& record, MergeOptions merge = {});

struct HeadScore {
    HeadId id;
    double f1 = 0.0;  // mean sentence-level F1, percent
};

/// Parses every sentence with every head alone and ranks heads by mean
/// sentence F1, best first; ties keep (layer, head) order. Gold trees are
/// compared as given, so strip punctuation beforehand.
std::vector<HeadScore> rank_heads(const Corpus& corpus, const std::vector<Tree>& gold, ScoreMode mode,
                                  ParseAlgorithm algo, std::size_t threads = 0, MergeOptions merge = {});

/// The first k entries of a ranking as an equally weighted selector.
HeadSelector top_k(const std::vector<HeadScore>& ranking, std::size_t k);

}  // namespace attnparse
