// attnparse: command-line front end.
//
// Exit status: 0 success, 1 usage error, 2 runtime error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <json.hpp>

#include "attnparse/alignment.hpp"
#include "attnparse/evaluation.hpp"
#include "attnparse/heads.hpp"
#include "attnparse/parallel.hpp"
#include "attnparse/parser.hpp"
#include "attnparse/scoring.hpp"
#include "attnparse/synthetic.hpp"
#include "attnparse/tensor_io.hpp"
#include "attnparse/trainer.hpp"
#include "attnparse/tree.hpp"

namespace {

using namespace attnparse;
using nlohmann::json;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct Globals {
    std::size_t threads = 0;
    std::optional<std::uint64_t> seed;
    std::string renormalize = "on";
};

MergeOptions merge_options(const Globals& g) { return {g.renormalize == "on"}; }

std::vector<Tree> load_gold(const std::string& path, bool keep_punct) {
    std::vector<Tree> trees = read_trees(path);
    if (!keep_punct) {
        for (Tree& t : trees) t = strip_punct(t);
    }
    return trees;
}

// ---- parse ---------------------------------------------------------------

struct ParseArgs {
    std::string tensors, out, heads, checkpoint, mode = "upoa", algo;
    int layer = 0;
};

int run_parse(const ParseArgs& a, const Globals& g) {
    const Corpus corpus = Corpus::load(a.tensors);
    const ScoreMode mode = parse_score_mode(a.mode);
    const ParseAlgorithm algo = a.algo.empty() ? default_algorithm(mode) : parse_algorithm(a.algo);
    const MergeOptions merge = merge_options(g);

    std::optional<Checkpoint> ckpt;
    int layer = a.layer;
    if (!a.checkpoint.empty()) {
        ckpt = load_checkpoint(a.checkpoint);
        if (layer == 0) layer = ckpt->metadata.contains("config") ? ckpt->metadata["config"].value("layer", 1) : 1;
    }
    std::optional<HeadSelector> selector;
    if (!a.heads.empty()) {
        selector = HeadSelector::load(a.heads);
    } else if (!ckpt || ckpt->params.wq.empty()) {
        selector = HeadSelector::uniform(corpus.heads());
    }
    if (ckpt && ckpt->params.wq.empty()) {
        // Learned head weights.
        const std::vector<HeadId> heads = corpus.heads();
        if (ckpt->head_logits.size() != heads.size()) {
            throw std::invalid_argument("checkpoint has " + std::to_string(ckpt->head_logits.size()) +
                                        " head weights, corpus has " + std::to_string(heads.size()) + " heads");
        }
        const std::vector<double> w = softmax(ckpt->head_logits);
        std::vector<WeightedHead> e;
        for (std::size_t i = 0; i < heads.size(); ++i) e.push_back({heads[i], w[i]});
        selector = HeadSelector(std::move(e));
    }
    const LogitDivisor divisor = ckpt && ckpt->metadata.contains("config")
                                     ? parse_logit_divisor(ckpt->metadata["config"].value("logit_divisor", "dproj"))
                                     : LogitDivisor::DProj;

    std::vector<Tree> trees(corpus.size());
    parallel_for(corpus.size(), g.threads, [&](std::size_t i) {
        const SentenceRecord rec = corpus.record(i);
        Matrix att;
        if (ckpt && !ckpt->params.wq.empty()) {
            const Matrix h = merge_piece_rows(rec.hidden(layer - 1), rec.meta().alignment);
            att = recompute_attention(h, ckpt->params, divisor);
        } else {
            att = combine(*selector, rec, merge).matrix();
        }
        const BinaryTree tree = parse(Scorer(att, mode), algo);
        trees[i] = tree.to_tree(rec.meta().words);
    });
    write_trees(a.out, trees);
    std::cerr << "parsed " << trees.size() << " sentences (" << to_string(mode) << ", " << to_string(algo) << ")\n";
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string tensors, trees, config, out, init_checkpoint;
    std::optional<std::string> mode, loss, normalization, logit_divisor, init;
    std::optional<int> epochs, batch_size, d_proj, layer;
    std::optional<double> lr, dropout, margin;
    bool learn_heads = false;
    bool keep_punct = false;
};

int run_train(const TrainArgs& a, const Globals& g) {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
    if (a.mode) cfg.mode = parse_score_mode(*a.mode);
    if (a.loss) cfg.loss = parse_loss_kind(*a.loss);
    if (a.normalization) cfg.normalization = parse_normalization(*a.normalization);
    if (a.logit_divisor) cfg.logit_divisor = parse_logit_divisor(*a.logit_divisor);
    if (a.init) cfg.init = parse_init_kind(*a.init);
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.d_proj) cfg.d_proj = *a.d_proj;
    if (a.layer) cfg.layer = *a.layer;
    if (a.lr) cfg.learning_rate = *a.lr;
    if (a.dropout) cfg.dropout = *a.dropout;
    if (a.margin) cfg.margin = *a.margin;
    if (a.learn_heads) cfg.learn_head_weights = true;
    if (g.seed) cfg.seed = *g.seed;
    cfg.threads = g.threads;
    cfg.validate();

    const Corpus corpus = Corpus::load(a.tensors);
    const std::vector<Tree> gold = load_gold(a.trees, a.keep_punct);
    const std::vector<TrainingExample> examples = build_examples(corpus, gold, cfg, merge_options(g));

    Checkpoint ckpt;
    if (cfg.learn_head_weights) {
        const TrainResult r = train(examples, cfg, ProjectionPair{});
        ckpt.head_logits = r.head_logits;
        ckpt.metadata["loss_history"] = r.loss_history;
    } else {
        ProjectionPair init;
        if (!a.init_checkpoint.empty()) {
            init = load_checkpoint(a.init_checkpoint).params;
        } else if (cfg.init == InitKind::Pretrained) {
            init = init_from_pretrained(corpus.tensors(), cfg.layer, cfg.d_proj);
        } else {
            Rng rng(cfg.seed);
            const std::size_t dm = examples.front().hidden.cols();
            init = random_projection(dm, cfg.d_proj > 0 ? static_cast<std::size_t>(cfg.d_proj) : dm, rng);
        }
        const TrainResult r = train(examples, cfg, std::move(init));
        ckpt.params = r.params;
        ckpt.metadata["loss_history"] = r.loss_history;
    }
    ckpt.metadata["config"] = to_json(cfg);
    ckpt.metadata["epochs"] = cfg.epochs;
    ckpt.metadata["sentences"] = examples.size();
    save_checkpoint(a.out, ckpt);
    for (std::size_t e = 0; e < ckpt.metadata["loss_history"].size(); ++e) {
        std::fprintf(stderr, "epoch %zu loss %.6f\n", e + 1, ckpt.metadata["loss_history"][e].get<double>());
    }
    return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string pred, gold, json_out;
    bool sentence_level = false, per_label = false, keep_root = false, keep_units = false, keep_punct = false;
};

int run_eval(const EvalArgs& a) {
    const std::vector<Tree> pred = load_gold(a.pred, a.keep_punct);
    const std::vector<Tree> gold = load_gold(a.gold, a.keep_punct);
    const BracketOptions opts{a.keep_root, a.keep_units};
    EvalReport r = unlabeled_f1(pred, gold, opts);
    if (a.per_label) r.per_label_recall = label_recall(pred, gold, opts);
    std::printf("F1 %.2f\n", a.sentence_level ? r.sentence_f1_mean : r.corpus_f1);
    std::fputs(format_report(r).c_str(), stdout);
    if (!a.json_out.empty()) {
        std::ofstream out(a.json_out, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + a.json_out);
        out << to_json(r).dump(2) << '\n';
    }
    return 0;
}

// ---- heads ---------------------------------------------------------------

struct HeadsArgs {
    std::string tensors, trees, out, mode = "upoa", algo;
    std::size_t top = 3;
    bool keep_punct = false;
};

int run_heads(const HeadsArgs& a, const Globals& g) {
    const Corpus corpus = Corpus::load(a.tensors);
    const std::vector<Tree> gold = load_gold(a.trees, a.keep_punct);
    const ScoreMode mode = parse_score_mode(a.mode);
    const ParseAlgorithm algo = a.algo.empty() ? default_algorithm(mode) : parse_algorithm(a.algo);
    const std::vector<HeadScore> ranking = rank_heads(corpus, gold, mode, algo, g.threads, merge_options(g));
    for (const HeadScore& h : ranking) std::printf("layer %d head %d F1 %.2f\n", h.id.layer, h.id.head, h.f1);
    top_k(ranking, a.top).save(a.out);
    return 0;
}

// ---- synth ---------------------------------------------------------------

int run_synth(const std::string& spec_path, const std::string& out, const Globals& g) {
    SyntheticSpec spec = load_synthetic_spec(spec_path);
    if (g.seed) spec.seed = *g.seed;
    const SyntheticCorpus c = gen_synthetic(spec);
    write_synthetic(out, spec, c);
    std::cerr << "wrote " << c.trees.size() << " sentences to " << out << "\n";
    return 0;
}

// ---- heatmap -------------------------------------------------------------

struct HeatmapArgs {
    std::string tensors, out;
    std::size_t sentence = 0;
    int layer = 0, head = 0;
    bool pieces = false;
};

int run_heatmap(const HeatmapArgs& a, const Globals& g) {
    const Corpus corpus = Corpus::load(a.tensors);
    const SentenceRecord rec = corpus.record(a.sentence);
    Matrix m = rec.attention(a.layer, a.head);
    if (!a.pieces) m = merge_pieces(m, rec.meta().alignment, merge_options(g)).matrix();
    double peak = 0.0;
    for (double v : m.flat()) peak = std::max(peak, v);
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    for (double v : m.flat()) {
        const double scaled = peak > 0.0 ? 255.0 * v / peak : 0.0;
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constituency parsing from attention matrices"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads (0 = logical cores)");
    app.add_option("--seed", g.seed, "Random seed override");
    app.add_option("--renormalize", g.renormalize, "Renormalize rows after dropping delimiter pieces")
        ->check(CLI::IsMember({"on", "off"}));

    ParseArgs pa;
    auto* parse_cmd = app.add_subcommand("parse", "Parse every sentence of a corpus");
    parse_cmd->add_option("--tensors", pa.tensors, "Corpus container")->required()->check(CLI::ExistingFile);
    parse_cmd->add_option("--mode", pa.mode, "Split score")->check(CLI::IsMember({"upoa", "upio"}));
    parse_cmd->add_option("--algo", pa.algo, "Parser (default: greedy for upoa, chart for upio)")
        ->check(CLI::IsMember({"greedy", "chart"}));
    parse_cmd->add_option("--heads", pa.heads, "Head selector JSON (default: all heads)")->check(CLI::ExistingFile);
    parse_cmd->add_option("--checkpoint", pa.checkpoint, "Trained projections or head weights")
        ->check(CLI::ExistingFile);
    parse_cmd->add_option("--layer", pa.layer, "Layer of the checkpoint projections");
    parse_cmd->add_option("--out", pa.out, "Output trees")->required();

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train query/key projections on gold trees");
    train_cmd->add_option("--tensors", ta.tensors, "Corpus container")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--trees", ta.trees, "Gold trees")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--config", ta.config, "Training config JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", ta.out, "Checkpoint")->required();
    train_cmd->add_option("--mode", ta.mode)->check(CLI::IsMember({"fpoa", "fpio", "upoa", "upio"}));
    train_cmd->add_option("--loss", ta.loss)->check(CLI::IsMember({"mle", "margin"}));
    train_cmd->add_option("--normalization", ta.normalization)->check(CLI::IsMember({"span", "sentence"}));
    train_cmd->add_option("--logit-divisor", ta.logit_divisor)->check(CLI::IsMember({"dproj", "dmodel"}));
    train_cmd->add_option("--init", ta.init)->check(CLI::IsMember({"pretrained", "random"}));
    train_cmd->add_option("--init-checkpoint", ta.init_checkpoint)->check(CLI::ExistingFile);
    train_cmd->add_option("--epochs", ta.epochs);
    train_cmd->add_option("--batch-size", ta.batch_size);
    train_cmd->add_option("--d-proj", ta.d_proj);
    train_cmd->add_option("--layer", ta.layer);
    train_cmd->add_option("--lr", ta.lr);
    train_cmd->add_option("--dropout", ta.dropout);
    train_cmd->add_option("--margin", ta.margin);
    train_cmd->add_flag("--learn-head-weights", ta.learn_heads);
    train_cmd->add_flag("--keep-punct", ta.keep_punct);

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Unlabeled bracketing F1");
    eval_cmd->add_option("--pred", ea.pred, "Predicted trees")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--gold", ea.gold, "Gold trees")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--json", ea.json_out, "Also write the report as JSON");
    eval_cmd->add_flag("--sentence-level", ea.sentence_level);
    eval_cmd->add_flag("--per-label", ea.per_label);
    eval_cmd->add_flag("--keep-root", ea.keep_root);
    eval_cmd->add_flag("--keep-units", ea.keep_units);
    eval_cmd->add_flag("--keep-punct", ea.keep_punct);

    HeadsArgs ha;
    auto* heads_cmd = app.add_subcommand("heads", "Rank heads on gold trees and select the best");
    heads_cmd->add_option("--tensors", ha.tensors)->required()->check(CLI::ExistingFile);
    heads_cmd->add_option("--trees", ha.trees)->required()->check(CLI::ExistingFile);
    heads_cmd->add_option("--mode", ha.mode)->check(CLI::IsMember({"upoa", "upio"}));
    heads_cmd->add_option("--algo", ha.algo)->check(CLI::IsMember({"greedy", "chart"}));
    heads_cmd->add_option("--top", ha.top)->check(CLI::PositiveNumber);
    heads_cmd->add_option("--out", ha.out, "Selector JSON")->required();
    heads_cmd->add_flag("--keep-punct", ha.keep_punct);

    std::string spec_path, synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic oracle corpus");
    synth_cmd->add_option("--spec", spec_path)->required()->check(CLI::ExistingFile);
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();

    HeatmapArgs hm;
    auto* heatmap_cmd = app.add_subcommand("heatmap", "Write one attention matrix as a PGM image");
    heatmap_cmd->add_option("--tensors", hm.tensors)->required()->check(CLI::ExistingFile);
    heatmap_cmd->add_option("--sentence", hm.sentence)->required();
    heatmap_cmd->add_option("--layer", hm.layer)->required();
    heatmap_cmd->add_option("--head", hm.head)->required();
    heatmap_cmd->add_option("--out", hm.out)->required();
    heatmap_cmd->add_flag("--pieces", hm.pieces, "Keep piece resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    set_default_threads(g.threads);
    try {
        if (*parse_cmd) return run_parse(pa, g);
        if (*train_cmd) return run_train(ta, g);
        if (*eval_cmd) return run_eval(ea);
        if (*heads_cmd) return run_heads(ha, g);
        if (*synth_cmd) return run_synth(spec_path, synth_out, g);
        if (*heatmap_cmd) return run_heatmap(hm, g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
