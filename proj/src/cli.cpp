#include "dmn/cli.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dmn/bleu.hpp"
#include "dmn/data.hpp"
#include "dmn/error.hpp"
#include "dmn/model.hpp"
#include "dmn/params.hpp"

namespace fs = std::filesystem;

namespace dmn {
namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config file " + path + ": " + e.what());
    }
    return j;
}

TrainConfig parse_train_config(const json& j, const std::string& origin) {
    if (!j.is_object()) throw ConfigError(origin + ": config root must be a JSON object");
    TrainConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "hidden") cfg.hidden = value.get<std::size_t>();
            else if (key == "emb_dim") cfg.emb_dim = value.get<std::size_t>();
            else if (key == "attn") cfg.attn = value.get<std::size_t>();
            else if (key == "episodes") cfg.episodes = value.get<int>();
            else if (key == "fusion") cfg.fusion = value.get<std::string>();
            else if (key == "gamma") cfg.gamma = value.get<double>();
            else if (key == "entropy_warmup_epochs") cfg.entropy_warmup_epochs = value.get<int>();
            else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "adam_beta1") cfg.adam_beta1 = value.get<double>();
            else if (key == "adam_beta2") cfg.adam_beta2 = value.get<double>();
            else if (key == "adam_eps") cfg.adam_eps = value.get<double>();
            else if (key == "grad_clip") cfg.grad_clip = value.get<double>();
            else if (key == "epochs") cfg.epochs = value.get<int>();
            else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
            else if (key == "val_fraction") cfg.val_fraction = value.get<double>();
            else if (key == "min_count") cfg.min_count = value.get<std::size_t>();
            else if (key == "eval_beam_width") cfg.eval_beam_width = value.get<int>();
            else if (key == "max_answer_len") cfg.max_answer_len = value.get<int>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else throw ConfigError(origin + ": unknown config key \"" + key + "\"");
        } catch (const json::exception&) {
            throw ConfigError(origin + ": bad value for \"" + key + "\"");
        }
    }
    return cfg;
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("DMN_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    std::uint64_t v = 0;
    const char* end = raw + std::char_traits<char>::length(raw);
    auto [ptr, ec] = std::from_chars(raw, end, v);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError("DMN_SEED must be a nonnegative integer, got \"" + std::string(raw) +
                          "\"");
    return v;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string line;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) line += ' ';
        line += tokens[i];
    }
    return line;
}

ModelConfig model_config_for(const TrainConfig& cfg, const Vocabulary& vocab, const Dataset& ds) {
    ModelConfig mc;
    mc.hidden = cfg.hidden;
    mc.emb_dim = cfg.emb_dim;
    mc.attn = cfg.attn;
    mc.episodes = cfg.episodes;
    mc.fusion = parse_fusion_mode(cfg.fusion);
    mc.vocab_size = vocab.size();
    mc.visual_dim = ds.front().visual.shape()[1];
    mc.audio_dim = ds.front().audio.shape()[1];
    return mc;
}

struct LoadedModel {
    TrainConfig cfg;
    Vocabulary vocab;
    Dataset dataset;
    std::shared_ptr<DmnModel> model;
};

LoadedModel load_model_for_eval(const std::string& config_path, const std::string& ckpt_path,
                                std::string vocab_path, const std::string& data_path) {
    LoadedModel lm;
    lm.cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
    validate(lm.cfg);
    if (vocab_path.empty()) vocab_path = (fs::path(ckpt_path).parent_path() / "vocab.json").string();
    lm.vocab = load_vocab(vocab_path);
    lm.dataset = load_dataset(data_path);
    if (lm.dataset.empty()) throw InputError("no dialogues in " + data_path);
    lm.model = std::make_shared<DmnModel>(model_config_for(lm.cfg, lm.vocab, lm.dataset), 0);
    load_checkpoint(lm.model->params(), ckpt_path);
    return lm;
}

json bleu_report(const BleuScores& s) {
    return json{{"bleu1", s.bleu[0]},
                {"bleu2", s.bleu[1]},
                {"bleu3", s.bleu[2]},
                {"bleu4", s.bleu[3]},
                {"precisions", s.precision},
                {"brevity_penalty", s.brevity_penalty},
                {"candidate_length", s.candidate_length},
                {"reference_length", s.reference_length},
                {"smoothing", BleuScores::kSmoothing}};
}

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open candidates file: " + path);
    std::vector<std::vector<std::string>> lines;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        lines.push_back(std::move(tokens));
    }
    return lines;
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << body;
    if (!out) throw IoError("write failed: " + path);
}

// Evaluation fans out across dialogues; each worker writes only its own input
// slot, so the merged result — and everything assembled from it downstream —
// is independent of scheduling. Report assembly stays on the calling thread.
std::vector<std::vector<PairOutcome>> evaluate_all(const DmnModel& model, const Vocabulary& vocab,
                                                   const Dataset& ds, const EvalOptions& opts) {
    std::vector<std::vector<PairOutcome>> results(ds.size());
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), ds.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < ds.size(); ++i)
            results[i] = evaluate_dialogue(model, vocab, ds[i], opts);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::mutex fail_mutex;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < ds.size(); i = next.fetch_add(1)) {
                try {
                    results[i] = evaluate_dialogue(model, vocab, ds[i], opts);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(fail_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

int cmd_train(const TrainConfig& cfg, const std::string& data_path, const std::string& out_dir,
              std::ostream& out) {
    validate(cfg);
    Dataset ds = load_dataset(data_path);
    TrainResult res = train(ds, cfg, out_dir);
    json summary{{"epochs", res.log.size()},
                 {"train_dialogues", res.train_indices.size()},
                 {"val_dialogues", res.val_indices.size()},
                 {"train_targets", res.num_train_targets},
                 {"vocab_size", res.vocab.size()},
                 {"checkpoint", (fs::path(out_dir) / "checkpoint.dmnw").string()},
                 {"metrics", (fs::path(out_dir) / "metrics.jsonl").string()}};
    if (!res.log.empty()) {
        summary["final_ce"] = res.log.back().ce;
        summary["final_gate_entropy"] = res.log.back().entropy;
        summary["final_val_token_acc"] = res.log.back().val_token_acc;
    }
    out << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& vocab_path, const std::string& data_path,
             const std::string& candidates_path, const EvalOptions& opts, std::ostream& out) {
    std::vector<std::vector<std::string>> cands;
    std::vector<std::vector<std::string>> refs;
    json rep;
    if (!candidates_path.empty()) {
        // Reference-only scoring: candidate token lines are matched 1:1, in
        // order, against every answer in the dialogue file. No model runs.
        Dataset ds = load_dataset(data_path);
        for (const auto& ex : ds)
            for (const auto& qa : ex.meta.qa_pairs) refs.push_back(qa.answer);
        cands = read_token_lines(candidates_path);
        if (cands.size() != refs.size())
            throw InputError("candidates file " + candidates_path + " has " +
                             std::to_string(cands.size()) + " lines but the dialogue file has " +
                             std::to_string(refs.size()) + " answers");
        rep = bleu_report(corpus_bleu(cands, refs));
    } else {
        LoadedModel lm = load_model_for_eval(config_path, ckpt_path, vocab_path, data_path);
        std::size_t exact = 0;
        std::size_t total = 0;
        for (auto& outcomes : evaluate_all(*lm.model, lm.vocab, lm.dataset, opts)) {
            for (auto& o : outcomes) {
                exact += o.exact ? 1 : 0;
                ++total;
                cands.push_back(std::move(o.generated));
                refs.push_back(std::move(o.gold));
            }
        }
        rep = bleu_report(corpus_bleu(cands, refs));
        rep["exact_match"] = total > 0 ? static_cast<double>(exact) / total : 0.0;
    }
    rep["num_answers"] = cands.size();
    out << rep.dump(2) << "\n";
    return 0;
}

int cmd_generate(const std::string& config_path, const std::string& ckpt_path,
                 const std::string& vocab_path, const std::string& data_path,
                 const EvalOptions& opts, const std::string& json_path, std::ostream& out) {
    LoadedModel lm = load_model_for_eval(config_path, ckpt_path, vocab_path, data_path);
    json results = json::array();
    auto all = evaluate_all(*lm.model, lm.vocab, lm.dataset, opts);
    for (std::size_t i = 0; i < lm.dataset.size(); ++i) {
        const auto& ex = lm.dataset[i];
        const auto& outcomes = all[i];
        if (outcomes.empty()) throw InputError("dialogue " + ex.meta.id + " has no questions");
        const PairOutcome& last = outcomes.back();
        out << join_tokens(last.generated) << "\n";
        results.push_back(json{{"id", ex.meta.id},
                               {"question", join_tokens(last.question)},
                               {"answer", join_tokens(last.generated)},
                               {"reference", join_tokens(last.gold)},
                               {"score", last.score}});
    }
    if (!json_path.empty()) write_text_file(json_path, json{{"results", results}}.dump(2) + "\n");
    return 0;
}

int cmd_gradcheck(const std::string& block, int seeds, double tolerance, std::ostream& out) {
    GradCheckReport rep = run_gradcheck(block, seeds, tolerance);
    for (const auto& b : rep.blocks) {
        std::ostringstream line;
        line << (b.passed ? "ok   " : "FAIL ") << std::left << std::setw(14) << b.name
             << "  max_rel_err=" << std::scientific << std::setprecision(3) << b.max_rel_err
             << "  worst=" << b.worst;
        if (b.boundary_flagged) line << "  [boundary]";
        out << line.str() << "\n";
    }
    out << (rep.all_passed ? "gradient check passed" : "gradient check FAILED") << "\n";
    return rep.all_passed ? 0 : 1;
}

int cmd_synth(std::size_t n, int segments, int feat, std::uint64_t seed, const std::string& out_dir,
              std::ostream& out) {
    SyntheticCorpus corpus = generate_synthetic(n, segments, feat, seed);
    write_corpus(corpus, out_dir);
    out << "wrote " << corpus.dialogues.size() << " dialogues (" << segments
        << " segments, feature dim " << feat << ", seed " << seed << ") to " << out_dir << "\n";
    return 0;
}

int cmd_dump_attention(const std::string& config_path, const std::string& ckpt_path,
                       const std::string& vocab_path, const std::string& data_path,
                       EvalOptions opts, const std::string& out_path, std::ostream& out) {
    LoadedModel lm = load_model_for_eval(config_path, ckpt_path, vocab_path, data_path);
    opts.collect_attention = true;
    json examples = json::array();
    auto all = evaluate_all(*lm.model, lm.vocab, lm.dataset, opts);
    for (std::size_t i = 0; i < lm.dataset.size(); ++i) {
        const auto& ex = lm.dataset[i];
        json questions = json::array();
        for (const auto& o : all[i]) {
            questions.push_back(json{{"question", join_tokens(o.question)},
                                     {"generated", join_tokens(o.generated)},
                                     {"caption_alpha", o.caption_alpha},
                                     {"summary_alpha", o.summary_alpha},
                                     {"visual_gates", o.visual_gates},
                                     {"audio_gates", o.audio_gates},
                                     {"beta", o.beta}});
        }
        examples.push_back(json{{"id", ex.meta.id}, {"questions", questions}});
    }
    std::string body = json{{"examples", examples}}.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") out << body;
    else write_text_file(out_path, body);
    return 0;
}

} // namespace

TrainConfig load_train_config(const std::string& path) {
    return parse_train_config(read_json_file(path), "config file " + path);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{
        "Scene-aware dialogue model: multi-episode gated memory over visual and audio "
        "segment features, attention over caption and summary text, and an LSTM answer "
        "decoder with beam search.\n"
        "Seed precedence everywhere: config file < DMN_SEED environment variable < --seed flag."};
    app.require_subcommand(1);

    int rc = 0;

    // --- train ---------------------------------------------------------------
    auto* t = app.add_subcommand("train", "Train a model and write checkpoint, vocab and "
                                          "per-epoch metrics log to --out");
    std::string t_config, t_data, t_out;
    t->add_option("--config", t_config, "JSON config; keys mirror the training configuration");
    t->add_option("--data", t_data, "dialogue JSON file")->required();
    t->add_option("--out", t_out, "output directory")->required();
    std::size_t t_hidden = 0, t_emb = 0, t_attn = 0, t_batch = 0, t_min_count = 0;
    int t_episodes = 0, t_warmup = 0, t_epochs = 0, t_beam = 0, t_maxlen = 0;
    double t_gamma = 0, t_lr = 0, t_clip = 0, t_valfrac = 0;
    std::string t_fusion;
    std::uint64_t t_seed = 0;
    auto* to_hidden = t->add_option("--hidden", t_hidden, "state width");
    auto* to_emb = t->add_option("--emb-dim", t_emb, "embedding width");
    auto* to_attn = t->add_option("--attn", t_attn, "gate hidden width (0 = same as --hidden)");
    auto* to_episodes = t->add_option("--episodes", t_episodes, "memory update passes");
    auto* to_fusion = t->add_option("--fusion", t_fusion, "'literal' or 'question-gated'");
    auto* to_gamma = t->add_option("--gamma", t_gamma, "gate entropy penalty weight");
    auto* to_warmup =
        t->add_option("--entropy-warmup", t_warmup, "epochs before the entropy penalty turns on");
    auto* to_lr = t->add_option("--lr", t_lr, "Adam learning rate");
    auto* to_clip = t->add_option("--grad-clip", t_clip, "global gradient norm ceiling");
    auto* to_epochs = t->add_option("--epochs", t_epochs, "training epochs");
    auto* to_batch = t->add_option("--batch", t_batch, "dialogues per optimizer step");
    auto* to_valfrac = t->add_option("--val-fraction", t_valfrac, "held-out fraction");
    auto* to_min_count = t->add_option("--min-count", t_min_count, "vocabulary frequency floor");
    auto* to_beam = t->add_option("--beam", t_beam, "beam width for validation scoring");
    auto* to_maxlen = t->add_option("--max-len", t_maxlen, "answer length ceiling");
    auto* to_seed = t->add_option("--seed", t_seed, "RNG seed (overrides config and DMN_SEED)");
    t->callback([&] {
        TrainConfig cfg = t_config.empty() ? TrainConfig{} : load_train_config(t_config);
        if (to_hidden->count()) cfg.hidden = t_hidden;
        if (to_emb->count()) cfg.emb_dim = t_emb;
        if (to_attn->count()) cfg.attn = t_attn;
        if (to_episodes->count()) cfg.episodes = t_episodes;
        if (to_fusion->count()) cfg.fusion = t_fusion;
        if (to_gamma->count()) cfg.gamma = t_gamma;
        if (to_warmup->count()) cfg.entropy_warmup_epochs = t_warmup;
        if (to_lr->count()) cfg.learning_rate = t_lr;
        if (to_clip->count()) cfg.grad_clip = t_clip;
        if (to_epochs->count()) cfg.epochs = t_epochs;
        if (to_batch->count()) cfg.batch_size = t_batch;
        if (to_valfrac->count()) cfg.val_fraction = t_valfrac;
        if (to_min_count->count()) cfg.min_count = t_min_count;
        if (to_beam->count()) cfg.eval_beam_width = t_beam;
        if (to_maxlen->count()) cfg.max_answer_len = t_maxlen;
        if (auto es = env_seed(); es && !to_seed->count()) cfg.seed = *es;
        if (to_seed->count()) cfg.seed = t_seed;
        rc = cmd_train(cfg, t_data, t_out, out);
    });

    // --- eval ----------------------------------------------------------------
    auto* e = app.add_subcommand(
        "eval", "Score answers against the dialogue file's references and print a corpus "
                "BLEU report as JSON. Smoothing is add1-zero-only: orders 2-4 apply "
                "add-one only when their clipped match count is zero; order 1 is never "
                "smoothed. With --candidates, token lines are scored directly and no "
                "model is loaded; otherwise --checkpoint generates the answers.");
    std::string e_config, e_ckpt, e_vocab, e_data, e_cands;
    e->add_option("--config", e_config, "JSON config the checkpoint was trained with");
    e->add_option("--checkpoint", e_ckpt, "model weights file");
    e->add_option("--vocab", e_vocab, "vocab JSON (default: vocab.json beside the checkpoint)");
    e->add_option("--data", e_data, "dialogue JSON file")->required();
    e->add_option("--candidates", e_cands, "token lines to score instead of running a model");
    int e_beam = 0, e_maxlen = 0;
    auto* eo_beam = e->add_option("--beam", e_beam, "beam width");
    auto* eo_maxlen = e->add_option("--max-len", e_maxlen, "answer length ceiling");
    bool e_zero_chain = false;
    e->add_flag("--zero-chain", e_zero_chain, "sever the answer chain between questions");
    e->callback([&] {
        if (e_cands.empty() && e_ckpt.empty())
            throw CLI::RequiredError("eval: either --checkpoint or --candidates");
        TrainConfig cfg = e_config.empty() ? TrainConfig{} : load_train_config(e_config);
        EvalOptions opts;
        opts.beam_width = eo_beam->count() ? e_beam : cfg.eval_beam_width;
        opts.max_len = eo_maxlen->count() ? e_maxlen : cfg.max_answer_len;
        opts.zero_chain = e_zero_chain;
        rc = cmd_eval(e_config, e_ckpt, e_vocab, e_data, e_cands, opts, out);
    });

    // --- generate ------------------------------------------------------------
    auto* g = app.add_subcommand("generate",
                                 "Answer the final question of every dialogue with beam "
                                 "search, one token line per dialogue on stdout");
    std::string g_config, g_ckpt, g_vocab, g_data, g_json;
    g->add_option("--config", g_config, "JSON config the checkpoint was trained with");
    g->add_option("--checkpoint", g_ckpt, "model weights file")->required();
    g->add_option("--vocab", g_vocab, "vocab JSON (default: vocab.json beside the checkpoint)");
    g->add_option("--data", g_data, "dialogue JSON file")->required();
    g->add_option("--json", g_json, "also write results (id, question, answer, score) here");
    int g_beam = 0, g_maxlen = 0;
    auto* go_beam = g->add_option("--beam", g_beam, "beam width");
    auto* go_maxlen = g->add_option("--max-len", g_maxlen, "answer length ceiling");
    g->callback([&] {
        TrainConfig cfg = g_config.empty() ? TrainConfig{} : load_train_config(g_config);
        EvalOptions opts;
        opts.beam_width = go_beam->count() ? g_beam : cfg.eval_beam_width;
        opts.max_len = go_maxlen->count() ? g_maxlen : cfg.max_answer_len;
        rc = cmd_generate(g_config, g_ckpt, g_vocab, g_data, opts, g_json, out);
    });

    // --- gradcheck -----------------------------------------------------------
    auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients against central "
                                               "finite differences, block by block");
    std::string gc_block = "all";
    int gc_seeds = 5;
    double gc_tol = 1e-5;
    gc->add_option("--block", gc_block,
                   "one of affine, lstm-cell, attention-gru, text-attention, episodic, "
                   "fusion, decoder, full, all");
    gc->add_option("--seeds", gc_seeds, "random restarts per block");
    gc->add_option("--tol", gc_tol, "max relative error accepted");
    gc->callback([&] { rc = cmd_gradcheck(gc_block, gc_seeds, gc_tol, out); });

    // --- synth ---------------------------------------------------------------
    auto* s = app.add_subcommand("synth", "Generate a synthetic dialogue corpus (dialogue "
                                          "JSON plus binary feature files) under --out");
    std::size_t s_n = 10;
    int s_segments = 6, s_feat = 32;
    std::uint64_t s_seed = 7;
    std::string s_out;
    s->add_option("--n", s_n, "number of dialogues");
    s->add_option("--segments", s_segments, "video segments per dialogue");
    s->add_option("--feat", s_feat, "feature dimension per segment");
    auto* so_seed = s->add_option("--seed", s_seed, "corpus seed (overrides DMN_SEED)");
    s->add_option("--out", s_out, "output directory")->required();
    s->callback([&] {
        if (auto es = env_seed(); es && !so_seed->count()) s_seed = *es;
        rc = cmd_synth(s_n, s_segments, s_feat, s_seed, s_out, out);
    });

    // --- dump-attention --------------------------------------------------------
    auto* d = app.add_subcommand("dump-attention",
                                 "Run a checkpoint over a dialogue file and dump every "
                                 "attention distribution (caption/summary weights, "
                                 "per-episode visual and audio gates, fusion weights) as JSON");
    std::string d_config, d_ckpt, d_vocab, d_data, d_out;
    d->add_option("--config", d_config, "JSON config the checkpoint was trained with");
    d->add_option("--checkpoint", d_ckpt, "model weights file")->required();
    d->add_option("--vocab", d_vocab, "vocab JSON (default: vocab.json beside the checkpoint)");
    d->add_option("--data", d_data, "dialogue JSON file")->required();
    d->add_option("--out", d_out, "output file ('-' or empty for stdout)");
    d->callback([&] {
        TrainConfig cfg = d_config.empty() ? TrainConfig{} : load_train_config(d_config);
        EvalOptions opts;
        opts.beam_width = cfg.eval_beam_width;
        opts.max_len = cfg.max_answer_len;
        rc = cmd_dump_attention(d_config, d_ckpt, d_vocab, d_data, opts, d_out, out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* scope = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        out << scope->help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << "\n\n";
        const CLI::App* scope = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << scope->help();
        return 2;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return 1;
    }
    return rc;
}

} // namespace dmn
