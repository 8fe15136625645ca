#include "attnparse/heads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "attnparse/kernels.hpp"
#include "attnparse/parallel.hpp"

namespace attnparse {

HeadSelector::HeadSelector(std::vector<WeightedHead> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw std::invalid_argument("HeadSelector: no heads selected");
    std::set<HeadId> seen;
    double total = 0.0;
    for (const auto& e : entries_) {
        if (!std::isfinite(e.weight) || e.weight < 0.0) {
            throw std::invalid_argument("HeadSelector: invalid weight for layer " + std::to_string(e.id.layer) +
                                        " head " + std::to_string(e.id.head));
        }
        if (!seen.insert(e.id).second) {
            throw std::invalid_argument("HeadSelector: duplicate layer " + std::to_string(e.id.layer) + " head " +
                                        std::to_string(e.id.head));
        }
        total += e.weight;
    }
    if (total <= 0.0) throw std::invalid_argument("HeadSelector: all weights are zero");
}

HeadSelector HeadSelector::uniform(const std::vector<HeadId>& heads) {
    std::vector<WeightedHead> e;
    e.reserve(heads.size());
    for (const HeadId& h : heads) e.push_back({h, 1.0});
    return HeadSelector(std::move(e));
}

std::vector<double> HeadSelector::normalized_weights() const {
    double total = 0.0;
    for (const auto& e : entries_) total += e.weight;
    std::vector<double> w;
    w.reserve(entries_.size());
    for (const auto& e : entries_) w.push_back(e.weight / total);
    return w;
}

nlohmann::json HeadSelector::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : entries_) j.push_back({{"layer", e.id.layer}, {"head", e.id.head}, {"weight", e.weight}});
    return j;
}

HeadSelector HeadSelector::from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("head selector JSON must be an array");
    std::vector<WeightedHead> e;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("layer") || !item.contains("head")) {
            throw std::invalid_argument("head selector entries need \"layer\" and \"head\"");
        }
        e.push_back({{item.at("layer").get<int>(), item.at("head").get<int>()}, item.value("weight", 1.0)});
    }
    return HeadSelector(std::move(e));
}

HeadSelector HeadSelector::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open head selector " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void HeadSelector::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write head selector " + path.string());
    out << to_json().dump(2) << '\n';
}

Matrix combine_matrices(std::span<const Matrix> heads, std::span<const double> weights) {
    if (heads.empty() || heads.size() != weights.size()) {
        throw std::invalid_argument("combine: need one weight per head");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("combine: invalid weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("combine: all weights are zero");
    Matrix out(heads.front().rows(), heads.front().cols());
    for (std::size_t h = 0; h < heads.size(); ++h) {
        if (heads[h].rows() != out.rows() || heads[h].cols() != out.cols()) {
            throw std::invalid_argument("combine: head matrices differ in shape");
        }
        kernels::axpy(weights[h] / total, heads[h], out);
    }
    return out;
}

WordAttention combine(const HeadSelector& selector, const SentenceRecord& record, MergeOptions merge) {
    std::vector<Matrix> mats;
    mats.reserve(selector.entries().size());
    for (const auto& e : selector.entries()) {
        if (!record.has_attention(e.id.layer, e.id.head)) {
            throw std::invalid_argument("sentence " + std::to_string(record.index()) + " has no attention for layer " +
                                        std::to_string(e.id.layer) + " head " + std::to_string(e.id.head));
        }
        mats.push_back(merge_pieces(record.attention(e.id.layer, e.id.head), record.meta().alignment, merge).matrix());
    }
    const std::vector<double> w = selector.normalized_weights();
    return WordAttention(combine_matrices(mats, w));
}

std::vector<HeadScore> rank_heads(const Corpus& corpus, const std::vector<Tree>& gold, ScoreMode mode,
                                  ParseAlgorithm algo, std::size_t threads, MergeOptions merge) {
    if (corpus.size() == 0) throw std::invalid_argument("rank_heads: empty corpus");
    if (gold.size() != corpus.size()) {
        throw std::invalid_argument("rank_heads: " + std::to_string(gold.size()) + " gold trees for " +
                                    std::to_string(corpus.size()) + " sentences");
    }
    std::vector<std::vector<Span>> gold_brackets(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (leaf_count(gold[i]) != corpus.sentence(i).words.size()) {
            throw LeafCountMismatch(i, corpus.sentence(i).words.size(), leaf_count(gold[i]));
        }
        gold_brackets[i] = brackets(gold[i]);
    }
    const std::vector<HeadId> heads = corpus.heads();
    std::vector<HeadScore> out(heads.size());
    // One task per (head, sentence); sums are reduced in index order.
    std::vector<double> f1(heads.size() * corpus.size());
    parallel_for(f1.size(), threads, [&](std::size_t t) {
        const HeadId h = heads[t / corpus.size()];
        const std::size_t s = t % corpus.size();
        const SentenceRecord rec = corpus.record(s);
        const WordAttention a = merge_pieces(rec.attention(h.layer, h.head), rec.meta().alignment, merge);
        const BinaryTree pred = parse(Scorer(a, mode), algo);
        f1[t] = sentence_f1(match_brackets(brackets(pred), gold_brackets[s]));
    });
    for (std::size_t h = 0; h < heads.size(); ++h) {
        double sum = 0.0;
        for (std::size_t s = 0; s < corpus.size(); ++s) sum += f1[h * corpus.size() + s];
        out[h] = {heads[h], sum / static_cast<double>(corpus.size())};
    }
    std::stable_sort(out.begin(), out.end(), [](const HeadScore& a, const HeadScore& b) { return a.f1 > b.f1; });
    return out;
}

HeadSelector top_k(const std::vector<HeadScore>& ranking, std::size_t k) {
    if (k == 0) throw std::invalid_argument("top_k: k must be >= 1");
    std::vector<HeadId> ids;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) ids.push_back(ranking[i].id);
    return HeadSelector::uniform(ids);
}

}  // namespace attnparse
