#include "attnparse/synthetic.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "attnparse/evaluation.hpp"
#include "attnparse/kernels.hpp"

namespace attnparse {

using nlohmann::json;

SelfDistance parse_self_distance(std::string_view s) {
    if (s == "zero") return SelfDistance::Zero;
    if (s == "parent") return SelfDistance::Parent;
    throw std::invalid_argument("unknown self distance '" + std::string(s) + "' (expected zero or parent)");
}

std::string_view to_string(SelfDistance s) { return s == SelfDistance::Zero ? "zero" : "parent"; }

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("synthetic spec: " + field + " " + why);
    };
    if (n_sentences < 1) fail("n_sentences", "must be >= 1");
    if (min_length < 2) fail("min_length", "must be >= 2");
    if (max_length < min_length) fail("max_length", "must be >= min_length");
    if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise", "must be finite and >= 0");
    if (!(temperature > 0.0)) fail("temperature", "must be > 0");
    if (distractor_heads < 0) fail("distractor_heads", "must be >= 0");
    if (max_pieces < 1) fail("max_pieces", "must be >= 1");
    if (!(delimiter_mass >= 0.0 && delimiter_mass < 1.0)) fail("delimiter_mass", "must be in [0, 1)");
    if (!(hidden_noise >= 0.0)) fail("hidden_noise", "must be >= 0");
    if (distractor_dims < 0) fail("distractor_dims", "must be >= 0");
    if (!(distractor_scale >= 0.0)) fail("distractor_scale", "must be >= 0");
    if (layer < 1) fail("layer", "must be >= 1");
}

json to_json(const SyntheticSpec& s) {
    return json{{"n_sentences", s.n_sentences},
                {"min_length", s.min_length},
                {"max_length", s.max_length},
                {"noise", s.noise},
                {"temperature", s.temperature},
                {"seed", s.seed},
                {"self_distance", to_string(s.self_distance)},
                {"distractor_heads", s.distractor_heads},
                {"max_pieces", s.max_pieces},
                {"delimiters", s.delimiters},
                {"delimiter_mass", s.delimiter_mass},
                {"hidden", s.hidden},
                {"hidden_noise", s.hidden_noise},
                {"distractor_dims", s.distractor_dims},
                {"distractor_scale", s.distractor_scale},
                {"layer", s.layer}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("synthetic spec must be a JSON object");
    const json defaults = to_json(SyntheticSpec{});
    for (const auto& [key, _] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("synthetic spec: unknown key '" + key + "'");
    }
    SyntheticSpec s;
    try {
        s.n_sentences = j.value("n_sentences", s.n_sentences);
        s.min_length = j.value("min_length", s.min_length);
        s.max_length = j.value("max_length", s.max_length);
        s.noise = j.value("noise", s.noise);
        s.temperature = j.value("temperature", s.temperature);
        s.seed = j.value("seed", s.seed);
        if (j.contains("self_distance")) s.self_distance = parse_self_distance(j["self_distance"].get<std::string>());
        s.distractor_heads = j.value("distractor_heads", s.distractor_heads);
        s.max_pieces = j.value("max_pieces", s.max_pieces);
        s.delimiters = j.value("delimiters", s.delimiters);
        s.delimiter_mass = j.value("delimiter_mass", s.delimiter_mass);
        s.hidden = j.value("hidden", s.hidden);
        s.hidden_noise = j.value("hidden_noise", s.hidden_noise);
        s.distractor_dims = j.value("distractor_dims", s.distractor_dims);
        s.distractor_scale = j.value("distractor_scale", s.distractor_scale);
        s.layer = j.value("layer", s.layer);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open synthetic spec " + path.string());
    try {
        return synthetic_spec_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

Matrix distance_matrix(const BinaryTree& tree, SelfDistance self) {
    const int n = tree.size();
    const auto un = static_cast<std::size_t>(n);
    Matrix d(un, un);
    const auto& splits = tree.splits();
    std::vector<int> height(un * un, 0);  // by span (x, y)
    auto h = [&](int x, int y) -> int& { return height[static_cast<std::size_t>(x) * un + y]; };
    // Children follow their parent in preorder, so reverse order is bottom-up.
    for (auto it = splits.rbegin(); it != splits.rend(); ++it) {
        const Span s = it->span;
        const int k = it->k;
        const int node = 1 + std::max(h(s.x, k - 1), h(k, s.y));
        h(s.x, s.y) = node;
        for (int i = s.x; i < k; ++i) {
            for (int j = k; j <= s.y; ++j) {
                d(i, j) = node;
                d(j, i) = node;
            }
        }
        if (self == SelfDistance::Parent) {
            if (k - 1 == s.x) d(s.x, s.x) = node - 1;
            if (k == s.y) d(s.y, s.y) = node - 1;
        }
    }
    return d;
}

Matrix tree_attention(const Matrix& distances, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("tree_attention: temperature must be > 0");
    Matrix a(distances.rows(), distances.cols());
    for (std::size_t i = 0; i < a.size(); ++i) a.flat()[i] = -distances.flat()[i] / temperature;
    kernels::softmax_rows(a);
    return a;
}

ProjectionPair oracle_projection(const SyntheticSpec& spec) {
    const auto dm = static_cast<std::size_t>(spec.d_model());
    const auto m = static_cast<std::size_t>(spec.max_length);
    // QK^T / sqrt(d_model) = H_pos H_pos^T - H_neg H_neg^T needs c^2 = sqrt(d_model).
    const double c = std::pow(static_cast<double>(dm), 0.25);
    ProjectionPair p{Matrix(dm, dm), Matrix(dm, dm)};
    for (std::size_t i = 0; i < 2 * m; ++i) {
        p.wq(i, i) = c;
        p.wk(i, i) = i < m ? c : -c;
    }
    return p;
}

namespace {

std::string word_text(int i) { return "w" + std::to_string(i); }

// Hidden rows whose product under the oracle projection is -D / T: the
// eigendecomposition of -D/T split by eigenvalue sign.
Matrix syntactic_hidden(const Matrix& logits, const SyntheticSpec& spec, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(logits.rows());
    Eigen::MatrixXd l(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) l(i, j) = logits(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(l);
    const auto m = static_cast<std::size_t>(spec.max_length);
    Matrix h(static_cast<std::size_t>(n), static_cast<std::size_t>(spec.d_model()));
    std::size_t pos = 0, neg = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double lambda = eig.eigenvalues()(c);
        if (std::abs(lambda) < 1e-12) continue;
        const std::size_t col = lambda > 0 ? pos++ : m + neg++;
        const double s = std::sqrt(std::abs(lambda));
        for (Eigen::Index i = 0; i < n; ++i) h(static_cast<std::size_t>(i), col) = eig.eigenvectors()(i, c) * s;
    }
    const double noise = spec.hidden_noise * spec.noise;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        for (std::size_t j = 0; j < 2 * m; ++j) h(i, j) += noise * rng.normal();
        for (std::size_t j = 2 * m; j < h.cols(); ++j) {
            const std::size_t f = j - 2 * m;
            const double freq = std::pow(3.0, static_cast<double>(f / 2));
            const double phase = static_cast<double>(i) / freq;
            h(i, j) = (f % 2 == 0 ? std::sin(phase) : std::cos(phase)) + spec.distractor_scale * rng.normal();
        }
    }
    return h;
}

struct Pieces {
    SentenceMeta meta;
    std::vector<int> word_pieces;  // pieces per word
};

Pieces make_pieces(int n, const SyntheticSpec& spec, Rng& rng) {
    Pieces p;
    p.word_pieces.assign(static_cast<std::size_t>(n), 1);
    if (spec.delimiters) {
        p.meta.pieces.push_back("[CLS]");
        p.meta.alignment.push_back(-1);
    }
    for (int w = 0; w < n; ++w) {
        const std::string word = word_text(w);
        p.meta.words.push_back(word);
        const int count = spec.max_pieces > 1 ? rng.uniform_int(1, spec.max_pieces) : 1;
        p.word_pieces[static_cast<std::size_t>(w)] = count;
        for (int c = 0; c < count; ++c) {
            p.meta.pieces.push_back(c == 0 ? word : "##" + std::to_string(c));
            p.meta.alignment.push_back(w);
        }
    }
    if (spec.delimiters) {
        p.meta.pieces.push_back("[SEP]");
        p.meta.alignment.push_back(-1);
    }
    return p;
}

// Spreads word-level attention over pieces so that merging recovers it.
Matrix piece_attention(const Matrix& a, const Pieces& p, double delimiter_mass) {
    const auto& al = p.meta.alignment;
    const std::size_t np = al.size();
    std::size_t delims = 0;
    for (int w : al) delims += w < 0 ? 1 : 0;
    const double keep = delims > 0 ? 1.0 - delimiter_mass : 1.0;
    Matrix out(np, np);
    for (std::size_t r = 0; r < np; ++r) {
        if (al[r] < 0) {
            for (double& v : out.row(r)) v = 1.0 / static_cast<double>(np);
            continue;
        }
        const auto wr = static_cast<std::size_t>(al[r]);
        for (std::size_t c = 0; c < np; ++c) {
            if (al[c] < 0) {
                out(r, c) = delimiter_mass / static_cast<double>(delims);
            } else {
                const auto wc = static_cast<std::size_t>(al[c]);
                out(r, c) = keep * a(wr, wc) / p.word_pieces[wc];
            }
        }
    }
    return out;
}

Matrix expand_rows(const Matrix& h, const std::vector<int>& alignment) {
    Matrix out(alignment.size(), h.cols());
    for (std::size_t r = 0; r < alignment.size(); ++r) {
        if (alignment[r] < 0) continue;
        const auto w = static_cast<std::size_t>(alignment[r]);
        for (std::size_t j = 0; j < h.cols(); ++j) out(r, j) = h(w, j);
    }
    return out;
}

}  // namespace

std::vector<Tree> SyntheticCorpus::gold() const {
    std::vector<Tree> out;
    out.reserve(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i) out.push_back(trees[i].to_tree(corpus.sentence(i).words));
    return out;
}

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SyntheticCorpus out;
    TensorFile tensors;
    std::vector<SentenceMeta> metas;
    for (int s = 0; s < spec.n_sentences; ++s) {
        const auto si = static_cast<std::size_t>(s);
        const int n = rng.uniform_int(spec.min_length, spec.max_length);
        BinaryTree tree = random_tree(n, rng);
        const Matrix d = distance_matrix(tree, spec.self_distance);
        Matrix a = tree_attention(d, spec.temperature);
        if (spec.noise > 0.0) {
            for (std::size_t i = 0; i < a.rows(); ++i) {
                double total = 0.0;
                for (double& v : a.row(i)) {
                    v += rng.uniform(0.0, spec.noise);
                    total += v;
                }
                for (double& v : a.row(i)) v /= total;
            }
        }
        Pieces pieces = make_pieces(n, spec, rng);
        const Matrix pa = piece_attention(a, pieces, spec.delimiter_mass);
        tensors.add(attention_name(si, spec.layer, 0), pa);
        if (spec.distractor_heads > 0) {
            const std::size_t np = pa.rows();
            const Matrix uniform(np, np, 1.0 / static_cast<double>(np));
            for (int h = 1; h <= spec.distractor_heads; ++h) tensors.add(attention_name(si, spec.layer, h), uniform);
        }
        if (spec.hidden) {
            Matrix logits(d.rows(), d.cols());
            for (std::size_t i = 0; i < d.size(); ++i) logits.flat()[i] = -d.flat()[i] / spec.temperature;
            const Matrix h = syntactic_hidden(logits, spec, rng);
            tensors.add(hidden_name(si, spec.layer - 1), expand_rows(h, pieces.meta.alignment));
        }
        metas.push_back(std::move(pieces.meta));
        out.trees.push_back(std::move(tree));
    }
    if (spec.hidden) {
        const ProjectionPair p = oracle_projection(spec);
        tensors.add(projection_name(spec.layer, true), p.wq);
        tensors.add(projection_name(spec.layer, false), p.wk);
    }
    tensors.set_metadata(json{{"generator", "attnparse synth"}, {"spec", to_json(spec)}});
    out.corpus = Corpus(std::move(tensors), std::move(metas));
    return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec, const SyntheticCorpus& corpus) {
    std::filesystem::create_directories(dir);
    corpus.corpus.save(dir / "corpus.atn");
    write_trees(dir / "gold.txt", corpus.gold());
    std::ofstream out(dir / "spec.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "spec.json").string());
    out << to_json(spec).dump(2) << '\n';
}

}  // namespace attnparse
