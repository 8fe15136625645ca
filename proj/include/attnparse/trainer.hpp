#pragma once

// Few-shot training of the query/key projections (FPOA/FPIO).
//
// Attention is recomputed from frozen word-level hidden states H:
//   A = softmax_rows((H W_Q)(H W_K)^T / sqrt(c)),  c = d_proj or d_model
// and the split scores of A feed a per-span softmax likelihood or a margin
// loss over the gold tree. Gradients are derived by hand: the loss is a
// function of split scores, each split score is a weighted sum of regions of
// A, and the remaining chain runs through the row softmax and two matmuls.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attnparse/alignment.hpp"
#include "attnparse/matrix.hpp"
#include "attnparse/random.hpp"
#include "attnparse/scoring.hpp"
#include "attnparse/tensor_io.hpp"
#include "attnparse/tree.hpp"

namespace attnparse {

enum class LossKind { Mle, Margin };
/// Which splits the softmax of a gold span normalizes over: the span's own
/// split points, or one candidate per sentence split point (points outside
/// the span are scored as splits of the whole sentence).
enum class SplitNormalization { Span, Sentence };
enum class LogitDivisor { DProj, DModel };
enum class InitKind { Pretrained, Random };

LossKind parse_loss_kind(std::string_view s);
SplitNormalization parse_normalization(std::string_view s);
LogitDivisor parse_logit_divisor(std::string_view s);
InitKind parse_init_kind(std::string_view s);
std::string_view to_string(LossKind k);
std::string_view to_string(SplitNormalization k);
std::string_view to_string(LogitDivisor k);
std::string_view to_string(InitKind k);

struct TrainConfig {
    ScoreMode mode = ScoreMode::InsideOutside;
    /// Unset: MLE for FPIO, margin for FPOA.
    std::optional<LossKind> loss;
    double margin = 1.0;
    /// Count the constant k = k* hinge term in the margin loss.
    bool margin_include_gold = false;
    SplitNormalization normalization = SplitNormalization::Span;
    LogitDivisor logit_divisor = LogitDivisor::DProj;

    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 10;
    double dropout = 0.3;
    int epochs = 10;
    std::uint64_t seed = 0;

    /// Attention layer L; hidden states are read from layer L-1.
    int layer = 1;
    /// 0 means d_model.
    int d_proj = 0;
    InitKind init = InitKind::Pretrained;
    /// Train softmax-parameterized head weights instead of the projections.
    bool learn_head_weights = false;
    std::size_t threads = 0;

    LossKind effective_loss() const noexcept;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

struct ProjectionPair {
    Matrix wq;  // d_model x d_proj
    Matrix wk;  // d_model x d_proj

    std::size_t d_model() const noexcept { return wq.rows(); }
    std::size_t d_proj() const noexcept { return wq.cols(); }
    /// Throws unless both matrices share a non-empty shape and are finite.
    void validate() const;
};

/// Reads "proj/l{layer}/wq" and "proj/l{layer}/wk" and keeps the first
/// d_proj columns (0 keeps all).
ProjectionPair init_from_pretrained(const TensorFile& tensors, int layer, int d_proj = 0);
/// Entries uniform in [-1/sqrt(d_model), 1/sqrt(d_model)].
ProjectionPair random_projection(std::size_t d_model, std::size_t d_proj, Rng& rng);

double logit_scale(const ProjectionPair& p, LogitDivisor divisor) noexcept;

Matrix recompute_attention(const Matrix& hidden, const ProjectionPair& p,
                           LogitDivisor divisor = LogitDivisor::DProj);

/// Log-softmax of the candidate scores. Throws on an empty candidate list.
std::vector<double> split_log_prob(std::span<const double> scores);

double tree_neg_log_likelihood(const BinaryTree& gold, const Scorer& scorer,
                               SplitNormalization norm = SplitNormalization::Span);
double margin_loss(const BinaryTree& gold, const Scorer& scorer, double margin, bool include_gold = false);

/// Loss of `gold` under attention `a` with the config's mode, loss and
/// normalization. When `d_attention` is non-null it receives dLoss/dA.
double attention_loss(const Matrix& a, const BinaryTree& gold, const TrainConfig& config,
                      Matrix* d_attention = nullptr);

struct TrainingExample {
    Matrix hidden;              // n_words x d_model
    BinaryTree gold;            // binary tree over the n words
    std::vector<Matrix> heads;  // word-level attention per head, for head-weight learning
};

/// Hidden states of layer config.layer - 1 merged to words, gold trees
/// binarized right-branching; heads are filled when config.learn_head_weights.
std::vector<TrainingExample> build_examples(const Corpus& corpus, const std::vector<Tree>& gold,
                                            const TrainConfig& config, MergeOptions merge = {});

struct LossGradient {
    double loss = 0.0;
    Matrix d_wq;
    Matrix d_wk;
    std::vector<double> d_head_logits;
};

/// Loss and gradients of one example. `dropout_mask` (n x d_model, already
/// scaled by 1/(1-rate)) multiplies the hidden states when given.
LossGradient projection_loss_gradient(const Matrix& hidden, const BinaryTree& gold, const ProjectionPair& p,
                                      const TrainConfig& config, const Matrix* dropout_mask = nullptr);
LossGradient head_weight_loss_gradient(std::span<const Matrix> heads, std::span<const double> logits,
                                       const BinaryTree& gold, const TrainConfig& config);

std::vector<double> softmax(std::span<const double> logits);

class TrainingError : public std::runtime_error {
public:
    TrainingError(std::size_t sentence, const std::string& what)
        : std::runtime_error("sentence " + std::to_string(sentence) + ": " + what), sentence_(sentence) {}
    std::size_t sentence() const noexcept { return sentence_; }

private:
    std::size_t sentence_;
};

struct TrainResult {
    ProjectionPair params;
    std::vector<double> head_logits;
    /// Mean training loss of each epoch.
    std::vector<double> loss_history;
};

/// Mini-batch Adam. Batches follow a seeded shuffle; the batch gradient is
/// the mean over its sentences. Hidden states are never modified.
TrainResult train(const std::vector<TrainingExample>& corpus, const TrainConfig& config, ProjectionPair init,
                  std::vector<double> head_logits = {});

/// Head weights (summing to 1) learned on the loss with frozen attention;
/// starts from the uniform distribution.
std::vector<double> learn_head_weights(const std::vector<TrainingExample>& corpus, const TrainConfig& config);

struct Checkpoint {
    ProjectionPair params;
    std::vector<double> head_logits;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Tensors "wq", "wk", optional "head_logits"; metadata in the header.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace attnparse
