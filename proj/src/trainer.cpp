#include "attnparse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "attnparse/evaluation.hpp"
#include "attnparse/kernels.hpp"
#include "attnparse/parallel.hpp"

namespace attnparse {

using nlohmann::json;

LossKind parse_loss_kind(std::string_view s) {
    if (s == "mle") return LossKind::Mle;
    if (s == "margin") return LossKind::Margin;
    throw std::invalid_argument("unknown loss '" + std::string(s) + "' (expected mle or margin)");
}

SplitNormalization parse_normalization(std::string_view s) {
    if (s == "span") return SplitNormalization::Span;
    if (s == "sentence") return SplitNormalization::Sentence;
    throw std::invalid_argument("unknown normalization '" + std::string(s) + "' (expected span or sentence)");
}

LogitDivisor parse_logit_divisor(std::string_view s) {
    if (s == "dproj") return LogitDivisor::DProj;
    if (s == "dmodel") return LogitDivisor::DModel;
    throw std::invalid_argument("unknown logit divisor '" + std::string(s) + "' (expected dproj or dmodel)");
}

InitKind parse_init_kind(std::string_view s) {
    if (s == "pretrained") return InitKind::Pretrained;
    if (s == "random") return InitKind::Random;
    throw std::invalid_argument("unknown init '" + std::string(s) + "' (expected pretrained or random)");
}

std::string_view to_string(LossKind k) { return k == LossKind::Mle ? "mle" : "margin"; }
std::string_view to_string(SplitNormalization k) { return k == SplitNormalization::Span ? "span" : "sentence"; }
std::string_view to_string(LogitDivisor k) { return k == LogitDivisor::DProj ? "dproj" : "dmodel"; }
std::string_view to_string(InitKind k) { return k == InitKind::Pretrained ? "pretrained" : "random"; }

LossKind TrainConfig::effective_loss() const noexcept {
    if (loss) return *loss;
    return mode == ScoreMode::InsideOutside ? LossKind::Mle : LossKind::Margin;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("train config: " + field + " " + why);
    };
    if (effective_loss() == LossKind::Margin && !(margin > 0.0)) fail("margin", "must be > 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be finite and >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must be in [0, 1)");
    if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");
    if (batch_size < 1) fail("batch_size", "must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must be in [0, 1)");
    if (epochs < 0) fail("epochs", "must be >= 0");
    if (layer < 1) fail("layer", "must be >= 1 (hidden states come from layer - 1)");
    if (d_proj < 0) fail("d_proj", "must be >= 0");
}

json to_json(const TrainConfig& c) {
    json j;
    j["mode"] = c.mode == ScoreMode::InsideOutside ? "fpio" : "fpoa";
    j["loss"] = to_string(c.effective_loss());
    j["margin"] = c.margin;
    j["margin_include_gold"] = c.margin_include_gold;
    j["normalization"] = to_string(c.normalization);
    j["logit_divisor"] = to_string(c.logit_divisor);
    j["learning_rate"] = c.learning_rate;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["batch_size"] = c.batch_size;
    j["dropout"] = c.dropout;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["layer"] = c.layer;
    j["d_proj"] = c.d_proj;
    j["init"] = to_string(c.init);
    j["learn_head_weights"] = c.learn_head_weights;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
    static const std::set<std::string> known{"mode",          "loss",          "margin",        "margin_include_gold",
                                             "normalization", "logit_divisor", "learning_rate", "beta1",
                                             "beta2",         "epsilon",       "batch_size",    "dropout",
                                             "epochs",        "seed",          "layer",         "d_proj",
                                             "init",          "learn_head_weights"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("train config: unknown key '" + key + "'");
    }
    TrainConfig c;
    try {
        if (j.contains("mode")) c.mode = parse_score_mode(j["mode"].get<std::string>());
        if (j.contains("loss") && !j["loss"].is_null()) c.loss = parse_loss_kind(j["loss"].get<std::string>());
        c.margin = j.value("margin", c.margin);
        c.margin_include_gold = j.value("margin_include_gold", c.margin_include_gold);
        if (j.contains("normalization")) c.normalization = parse_normalization(j["normalization"].get<std::string>());
        if (j.contains("logit_divisor")) c.logit_divisor = parse_logit_divisor(j["logit_divisor"].get<std::string>());
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.dropout = j.value("dropout", c.dropout);
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        c.layer = j.value("layer", c.layer);
        c.d_proj = j.value("d_proj", c.d_proj);
        if (j.contains("init")) c.init = parse_init_kind(j["init"].get<std::string>());
        c.learn_head_weights = j.value("learn_head_weights", c.learn_head_weights);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open train config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return train_config_from_json(j);
}

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Matrix truncate_columns(const Matrix& m, std::size_t cols) {
    Matrix out(m.rows(), cols);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = m(i, j);
    }
    return out;
}

}  // namespace

void ProjectionPair::validate() const {
    if (wq.empty() || wk.empty()) throw std::invalid_argument("projection pair is empty");
    if (wq.rows() != wk.rows() || wq.cols() != wk.cols()) {
        throw std::invalid_argument("W_Q and W_K differ in shape");
    }
    if (!all_finite(wq.flat()) || !all_finite(wk.flat())) throw std::invalid_argument("projection has non-finite entries");
}

ProjectionPair init_from_pretrained(const TensorFile& tensors, int layer, int d_proj) {
    const std::string qn = projection_name(layer, true);
    const std::string kn = projection_name(layer, false);
    for (const auto& n : {qn, kn}) {
        if (!tensors.contains(n)) {
            throw TensorIoError(TensorIoError::Kind::MissingEntry, n, "missing projection tensor '" + n + "'");
        }
    }
    ProjectionPair p{tensors.matrix(qn), tensors.matrix(kn)};
    p.validate();
    if (d_proj > 0) {
        const auto dp = static_cast<std::size_t>(d_proj);
        if (dp > p.d_proj()) {
            throw std::invalid_argument("d_proj " + std::to_string(d_proj) + " exceeds exported width " +
                                        std::to_string(p.d_proj()));
        }
        p.wq = truncate_columns(p.wq, dp);
        p.wk = truncate_columns(p.wk, dp);
    }
    return p;
}

ProjectionPair random_projection(std::size_t d_model, std::size_t d_proj, Rng& rng) {
    if (d_model == 0 || d_proj == 0) throw std::invalid_argument("random_projection: zero dimension");
    const double r = 1.0 / std::sqrt(static_cast<double>(d_model));
    ProjectionPair p{Matrix(d_model, d_proj), Matrix(d_model, d_proj)};
    for (double& v : p.wq.flat()) v = rng.uniform(-r, r);
    for (double& v : p.wk.flat()) v = rng.uniform(-r, r);
    return p;
}

double logit_scale(const ProjectionPair& p, LogitDivisor divisor) noexcept {
    const double d = static_cast<double>(divisor == LogitDivisor::DProj ? p.d_proj() : p.d_model());
    return 1.0 / std::sqrt(d);
}

namespace {

struct Forward {
    Matrix q, k, a;
};

Forward forward(const Matrix& hidden, const ProjectionPair& p, LogitDivisor divisor) {
    if (hidden.cols() != p.d_model()) {
        throw std::invalid_argument("hidden width " + std::to_string(hidden.cols()) + " does not match projection input " +
                                    std::to_string(p.d_model()));
    }
    Forward f{kernels::matmul(hidden, p.wq), kernels::matmul(hidden, p.wk), {}};
    f.a = kernels::matmul_nt(f.q, f.k);
    const double scale = logit_scale(p, divisor);
    kernels::active().scale(scale, f.a.data(), f.a.size());
    kernels::softmax_rows(f.a);
    if (!all_finite(f.a.flat())) throw std::domain_error("recomputed attention is not finite");
    return f;
}

struct Candidate {
    Span span;
    int k;
};

// Candidate splits competing with the gold split of `gold_span`.
std::size_t candidates_for(const SplitPoint& gold, int n, SplitNormalization norm, std::vector<Candidate>& out) {
    out.clear();
    const Span root{0, n - 1};
    std::size_t gold_index = 0;
    for (int k = 1; k <= n - 1; ++k) {
        const bool inside = k > gold.span.x && k <= gold.span.y;
        if (inside) {
            if (k == gold.k) gold_index = out.size();
            out.push_back({gold.span, k});
        } else if (norm == SplitNormalization::Sentence) {
            out.push_back({root, k});
        }
    }
    return gold_index;
}

// 2-D difference array receiving weighted regions, integrated into dL/dA.
class RegionScatter {
public:
    explicit RegionScatter(int n) : n_(n), d_(static_cast<std::size_t>(n + 1) * (n + 1), 0.0) {}

    void add(const LinearScore& score, double g) {
        if (g == 0.0) return;
        for (const auto& r : score.terms()) {
            const double w = r.weight * g;
            at(r.r0, r.c0) += w;
            at(r.r0, r.c1 + 1) -= w;
            at(r.r1 + 1, r.c0) -= w;
            at(r.r1 + 1, r.c1 + 1) += w;
        }
    }

    Matrix integrate() const {
        Matrix out(static_cast<std::size_t>(n_), static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            double run = 0.0;
            for (int j = 0; j < n_; ++j) {
                run += d_[idx(i, j)];
                out(i, j) = run + (i > 0 ? out(i - 1, j) : 0.0);
            }
        }
        return out;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * (n_ + 1) + j; }
    double& at(int i, int j) { return d_[idx(i, j)]; }

    int n_;
    std::vector<double> d_;
};

struct Objective {
    LossKind loss;
    double margin;
    bool include_gold;
    SplitNormalization norm;
};

double objective(const Scorer& scorer, const BinaryTree& gold, const Objective& obj, RegionScatter* scatter) {
    const int n = scorer.size();
    if (gold.size() != n) {
        throw std::invalid_argument("gold tree has " + std::to_string(gold.size()) + " leaves, attention has " +
                                    std::to_string(n) + " words");
    }
    double loss = 0.0;
    std::vector<Candidate> cands;
    std::vector<LinearScore> terms;
    std::vector<double> scores;
    std::vector<double> grad;
    for (const SplitPoint& g : gold.splits()) {
        const std::size_t gi = candidates_for(g, n, obj.norm, cands);
        terms.clear();
        scores.clear();
        for (const Candidate& c : cands) {
            terms.push_back(split_terms(c.span, c.k, scorer.mode(), n));
            scores.push_back(scorer.evaluate(terms.back()));
        }
        grad.assign(cands.size(), 0.0);
        if (obj.loss == LossKind::Mle) {
            const std::vector<double> lp = split_log_prob(scores);
            loss -= lp[gi];
            for (std::size_t i = 0; i < cands.size(); ++i) grad[i] = std::exp(lp[i]) - (i == gi ? 1.0 : 0.0);
        } else {
            if (obj.include_gold) loss += obj.margin;
            for (std::size_t i = 0; i < cands.size(); ++i) {
                if (i == gi || cands[i].span != g.span) continue;
                const double h = obj.margin + scores[i] - scores[gi];
                if (h > 0.0) {
                    loss += h;
                    grad[i] += 1.0;
                    grad[gi] -= 1.0;
                }
            }
        }
        if (scatter) {
            for (std::size_t i = 0; i < cands.size(); ++i) scatter->add(terms[i], grad[i]);
        }
    }
    return loss;
}

Objective objective_of(const TrainConfig& c) {
    return {c.effective_loss(), c.margin, c.margin_include_gold, c.normalization};
}

}  // namespace

Matrix recompute_attention(const Matrix& hidden, const ProjectionPair& p, LogitDivisor divisor) {
    p.validate();
    return forward(hidden, p, divisor).a;
}

std::vector<double> split_log_prob(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("split_log_prob: no candidate splits");
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - m);
    const double lz = m + std::log(z);
    std::vector<double> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(s - lz);
    return out;
}

double tree_neg_log_likelihood(const BinaryTree& gold, const Scorer& scorer, SplitNormalization norm) {
    return objective(scorer, gold, {LossKind::Mle, 0.0, false, norm}, nullptr);
}

double margin_loss(const BinaryTree& gold, const Scorer& scorer, double margin, bool include_gold) {
    if (!(margin > 0.0)) throw std::invalid_argument("margin_loss: margin must be > 0");
    return objective(scorer, gold, {LossKind::Margin, margin, include_gold, SplitNormalization::Span}, nullptr);
}

double attention_loss(const Matrix& a, const BinaryTree& gold, const TrainConfig& config, Matrix* d_attention) {
    const Scorer scorer(a, config.mode);
    if (!d_attention) return objective(scorer, gold, objective_of(config), nullptr);
    RegionScatter scatter(scorer.size());
    const double loss = objective(scorer, gold, objective_of(config), &scatter);
    *d_attention = scatter.integrate();
    return loss;
}

std::vector<TrainingExample> build_examples(const Corpus& corpus, const std::vector<Tree>& gold,
                                            const TrainConfig& config, MergeOptions merge) {
    if (gold.size() != corpus.size()) {
        throw std::invalid_argument(std::to_string(gold.size()) + " gold trees for " + std::to_string(corpus.size()) +
                                    " sentences");
    }
    const std::vector<HeadId> heads = config.learn_head_weights ? corpus.heads() : std::vector<HeadId>{};
    std::vector<TrainingExample> out;
    out.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const SentenceRecord rec = corpus.record(i);
        const std::size_t n = rec.word_count();
        if (leaf_count(gold[i]) != n) throw LeafCountMismatch(i, n, leaf_count(gold[i]));
        TrainingExample ex;
        ex.gold = BinaryTree::from_tree(binarize(gold[i]));
        if (config.learn_head_weights) {
            for (const HeadId& h : heads) {
                ex.heads.push_back(merge_pieces(rec.attention(h.layer, h.head), rec.meta().alignment, merge).matrix());
            }
        } else {
            ex.hidden = merge_piece_rows(rec.hidden(config.layer - 1), rec.meta().alignment);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

LossGradient projection_loss_gradient(const Matrix& hidden, const BinaryTree& gold, const ProjectionPair& p,
                                      const TrainConfig& config, const Matrix* dropout_mask) {
    Matrix h = hidden;
    if (dropout_mask) {
        if (dropout_mask->rows() != h.rows() || dropout_mask->cols() != h.cols()) {
            throw std::invalid_argument("dropout mask shape mismatch");
        }
        for (std::size_t i = 0; i < h.size(); ++i) h.flat()[i] *= dropout_mask->flat()[i];
    }
    const Forward f = forward(h, p, config.logit_divisor);
    Matrix d_a;
    LossGradient g;
    g.loss = attention_loss(f.a, gold, config, &d_a);

    // Row softmax: dS_ij = a_ij (dA_ij - sum_k dA_ik a_ik).
    const std::size_t n = f.a.rows();
    Matrix d_s(n, n);
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < n; ++i) {
        const double inner = kt.dot(d_a.row(i).data(), f.a.row(i).data(), n);
        for (std::size_t j = 0; j < n; ++j) d_s(i, j) = f.a(i, j) * (d_a(i, j) - inner);
    }
    const double scale = logit_scale(p, config.logit_divisor);
    Matrix d_q = kernels::matmul(d_s, f.k);
    Matrix d_k = kernels::matmul_tn(d_s, f.q);
    kt.scale(scale, d_q.data(), d_q.size());
    kt.scale(scale, d_k.data(), d_k.size());
    g.d_wq = kernels::matmul_tn(h, d_q);
    g.d_wk = kernels::matmul_tn(h, d_k);
    return g;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> w(logits.begin(), logits.end());
    if (!w.empty()) kernels::active().softmax(w.data(), w.size());
    return w;
}

LossGradient head_weight_loss_gradient(std::span<const Matrix> heads, std::span<const double> logits,
                                       const BinaryTree& gold, const TrainConfig& config) {
    if (heads.empty() || heads.size() != logits.size()) {
        throw std::invalid_argument("head weights: need one logit per head");
    }
    const std::vector<double> w = softmax(logits);
    const std::size_t n = heads.front().rows();
    Matrix a(n, n);
    for (std::size_t h = 0; h < heads.size(); ++h) kernels::axpy(w[h], heads[h], a);
    Matrix d_a;
    LossGradient g;
    g.loss = attention_loss(a, gold, config, &d_a);
    // dL/dw_h = <dA, A_h>; through the softmax: w_h (dL/dw_h - sum_g w_g dL/dw_g).
    std::vector<double> dw(heads.size());
    double mean = 0.0;
    for (std::size_t h = 0; h < heads.size(); ++h) {
        dw[h] = kernels::active().dot(d_a.data(), heads[h].data(), d_a.size());
        mean += w[h] * dw[h];
    }
    g.d_head_logits.resize(heads.size());
    for (std::size_t h = 0; h < heads.size(); ++h) g.d_head_logits[h] = w[h] * (dw[h] - mean);
    return g;
}

namespace {

class Adam {
public:
    Adam(const TrainConfig& c, std::size_t size) : c_(c), m_(size, 0.0), v_(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(c_.beta1, t_);
        const double bc2 = 1.0 - std::pow(c_.beta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = c_.beta1 * m_[i] + (1.0 - c_.beta1) * grad[i];
            v_[i] = c_.beta2 * v_[i] + (1.0 - c_.beta2) * grad[i] * grad[i];
            const double m_hat = m_[i] / bc1;
            const double v_hat = v_[i] / bc2;
            params[i] -= c_.learning_rate * m_hat / (std::sqrt(v_hat) + c_.epsilon);
        }
    }

private:
    const TrainConfig& c_;
    std::vector<double> m_, v_;
    int t_ = 0;
};

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    for (double& v : m.flat()) v = rng.bernoulli(rate) ? 0.0 : keep;
    return m;
}

}  // namespace

TrainResult train(const std::vector<TrainingExample>& corpus, const TrainConfig& config, ProjectionPair init,
                  std::vector<double> head_logits) {
    config.validate();
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
    const bool heads_mode = config.learn_head_weights;
    std::size_t n_heads = 0;
    if (heads_mode) {
        n_heads = corpus.front().heads.size();
        if (n_heads == 0) throw std::invalid_argument("train: head-weight learning needs attention heads");
        if (head_logits.empty()) head_logits.assign(n_heads, 0.0);
        if (head_logits.size() != n_heads) throw std::invalid_argument("train: head logit count mismatch");
    } else {
        init.validate();
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const TrainingExample& ex = corpus[i];
        const std::size_t n = heads_mode ? (ex.heads.empty() ? 0 : ex.heads.front().rows()) : ex.hidden.rows();
        if (heads_mode && ex.heads.size() != n_heads) throw TrainingError(i, "head count differs from sentence 0");
        if (!heads_mode && ex.hidden.cols() != init.d_model()) {
            throw TrainingError(i, "hidden width " + std::to_string(ex.hidden.cols()) + " != d_model " +
                                       std::to_string(init.d_model()));
        }
        if (static_cast<std::size_t>(ex.gold.size()) != n) throw TrainingError(i, "gold tree does not match sentence length");
    }

    TrainResult result{std::move(init), std::move(head_logits), {}};
    ProjectionPair& p = result.params;
    const std::size_t n_params = heads_mode ? n_heads : p.wq.size() + p.wk.size();
    Adam adam(config, n_params);
    std::vector<double> flat(n_params);
    std::vector<double> grad(n_params);

    Rng rng(config.seed);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::size_t b = end - start;
            std::vector<std::uint64_t> seeds(b);
            for (auto& s : seeds) s = rng.engine()();
            std::vector<LossGradient> parts(b);
            parallel_for(b, config.threads, [&](std::size_t t) {
                const std::size_t idx = order[start + t];
                const TrainingExample& ex = corpus[idx];
                try {
                    if (heads_mode) {
                        parts[t] = head_weight_loss_gradient(ex.heads, result.head_logits, ex.gold, config);
                    } else if (config.dropout > 0.0) {
                        const Matrix mask = dropout_mask(ex.hidden.rows(), ex.hidden.cols(), config.dropout, seeds[t]);
                        parts[t] = projection_loss_gradient(ex.hidden, ex.gold, p, config, &mask);
                    } else {
                        parts[t] = projection_loss_gradient(ex.hidden, ex.gold, p, config);
                    }
                } catch (const std::exception& e) {
                    throw TrainingError(idx, e.what());
                }
                const LossGradient& g = parts[t];
                const bool finite = std::isfinite(g.loss) && all_finite(g.d_wq.flat()) && all_finite(g.d_wk.flat()) &&
                                    all_finite(g.d_head_logits);
                if (!finite) throw TrainingError(idx, "non-finite loss or gradient at epoch " + std::to_string(epoch));
            });
            std::fill(grad.begin(), grad.end(), 0.0);
            const double inv = 1.0 / static_cast<double>(b);
            for (const LossGradient& g : parts) {
                epoch_loss += g.loss;
                if (heads_mode) {
                    for (std::size_t i = 0; i < n_heads; ++i) grad[i] += inv * g.d_head_logits[i];
                } else {
                    const std::size_t nq = g.d_wq.size();
                    for (std::size_t i = 0; i < nq; ++i) grad[i] += inv * g.d_wq.flat()[i];
                    for (std::size_t i = 0; i < g.d_wk.size(); ++i) grad[nq + i] += inv * g.d_wk.flat()[i];
                }
            }
            if (heads_mode) {
                adam.step(result.head_logits, grad);
            } else {
                std::copy(p.wq.flat().begin(), p.wq.flat().end(), flat.begin());
                std::copy(p.wk.flat().begin(), p.wk.flat().end(), flat.begin() + static_cast<std::ptrdiff_t>(p.wq.size()));
                adam.step(flat, grad);
                std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(p.wq.size()), p.wq.flat().begin());
                std::copy(flat.begin() + static_cast<std::ptrdiff_t>(p.wq.size()), flat.end(), p.wk.flat().begin());
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(corpus.size()));
    }
    return result;
}

std::vector<double> learn_head_weights(const std::vector<TrainingExample>& corpus, const TrainConfig& config) {
    TrainConfig c = config;
    c.learn_head_weights = true;
    return softmax(train(corpus, c, ProjectionPair{}).head_logits);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    TensorFile f;
    if (!ckpt.params.wq.empty()) {
        f.add("wq", ckpt.params.wq);
        f.add("wk", ckpt.params.wk);
    }
    if (!ckpt.head_logits.empty()) {
        std::vector<float> v(ckpt.head_logits.begin(), ckpt.head_logits.end());
        f.add("head_logits", {v.size()}, v);
    }
    f.set_metadata(ckpt.metadata);
    write_tensor_file(path, f);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const TensorFile f = read_tensor_file(path);
    Checkpoint c;
    if (f.contains("wq") != f.contains("wk")) {
        throw TensorIoError(TensorIoError::Kind::MissingEntry, f.contains("wq") ? "wk" : "wq",
                            "checkpoint " + path.string() + " has only one projection");
    }
    if (f.contains("wq")) {
        c.params = {f.matrix("wq"), f.matrix("wk")};
        c.params.validate();
    }
    if (f.contains("head_logits")) {
        const auto v = f.values("head_logits");
        c.head_logits.assign(v.begin(), v.end());
    }
    if (c.params.wq.empty() && c.head_logits.empty()) {
        throw TensorIoError(TensorIoError::Kind::MissingEntry, "wq", "checkpoint " + path.string() + " holds no parameters");
    }
    c.metadata = f.metadata();
    return c;
}

}  // namespace attnparse
