#include "dmn/model.hpp"

#include "dmn/error.hpp"

namespace dmn {

std::vector<int> frame_answer(const std::vector<int>& answer_ids) {
    std::vector<int> framed;
    framed.reserve(answer_ids.size() + 2);
    framed.push_back(Vocabulary::kBos);
    framed.insert(framed.end(), answer_ids.begin(), answer_ids.end());
    framed.push_back(Vocabulary::kEos);
    return framed;
}

DmnModel::DmnModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.hidden == 0) throw ConfigError("model: hidden size must be positive");
    if (cfg_.emb_dim == 0) throw ConfigError("model: embedding size must be positive");
    if (cfg_.episodes < 1) throw ConfigError("model: episode count must be at least 1");
    if (cfg_.vocab_size <= Vocabulary::kReservedCount)
        throw ConfigError("model: vocabulary of " + std::to_string(cfg_.vocab_size) +
                          " leaves no room for real tokens");
    if (cfg_.visual_dim == 0 || cfg_.audio_dim == 0)
        throw ConfigError("model: feature dimensions must be positive");
    if (cfg_.attn == 0) cfg_.attn = cfg_.hidden;

    std::mt19937_64 rng(seed);
    const std::size_t h = cfg_.hidden;
    emb_ = make_embedding_table(params_, "embedding", cfg_.vocab_size, cfg_.emb_dim, rng);
    question_.fwd = make_lstm_params(params_, "question.fwd", cfg_.emb_dim, h, rng);
    question_.bwd = make_lstm_params(params_, "question.bwd", cfg_.emb_dim, h, rng);
    q_proj_w_ = params_.create("question.proj.w", {h, 2 * h}, 2 * h, rng);
    q_proj_b_ = params_.create("question.proj.b", {h}, 0, rng);
    caption_lstm_ = make_lstm_params(params_, "caption.lstm", cfg_.emb_dim, h, rng);
    caption_attn_ = make_text_attention_params(params_, "caption.attn", h, cfg_.attn, rng);
    summary_lstm_ = make_lstm_params(params_, "summary.lstm", cfg_.emb_dim, h, rng);
    summary_attn_ = make_text_attention_params(params_, "summary.attn", h, cfg_.attn, rng);
    visual_lstm_ = make_lstm_params(params_, "visual.lstm", cfg_.visual_dim, h, rng);
    visual_dmn_ = make_episodic_params(params_, "visual.memory", h, cfg_.attn, rng);
    audio_lstm_ = make_lstm_params(params_, "audio.lstm", cfg_.audio_dim, h, rng);
    audio_dmn_ = make_episodic_params(params_, "audio.memory", h, cfg_.attn, rng);
    fusion_ = make_fusion_params(params_, "fusion", h, cfg_.attn, rng);
    decoder_ = make_decoder_params(params_, "decoder", h, cfg_.emb_dim, cfg_.vocab_size, rng);
}

QuestionContext DmnModel::encode_context(const std::vector<int>& question_ids,
                                         const std::vector<int>& caption_ids,
                                         const std::vector<int>& summary_ids,
                                         const Tensor& visual, const Tensor& audio) const {
    QuestionContext ctx;
    QuestionEmbedding qe = encode_question(question_ids, emb_, question_);
    ctx.q = affine(q_proj_w_, qe.q, q_proj_b_);

    Tensor caption_states = encode_text_states(caption_ids, emb_, caption_lstm_);
    ctx.caption = text_attend(caption_states, ctx.q, caption_attn_, TextSource::caption);
    Tensor summary_states = encode_text_states(summary_ids, emb_, summary_lstm_);
    ctx.summary = text_attend(summary_states, ctx.q, summary_attn_, TextSource::summary);

    InputFacts visual_facts = encode_facts(visual, visual_lstm_, Modality::visual);
    ctx.visual = run_dmn(visual_facts, ctx.q, cfg_.episodes, visual_dmn_);
    InputFacts audio_facts = encode_facts(audio, audio_lstm_, Modality::audio);
    ctx.audio = run_dmn(audio_facts, ctx.q, cfg_.episodes, audio_dmn_);

    const std::vector<Tensor> contexts{ctx.caption.context, ctx.summary.context,
                                       ctx.visual.memory, ctx.audio.memory};
    ctx.fused = cfg_.fusion == FusionMode::literal ? fuse(contexts)
                                                   : fuse_question_gated(contexts, ctx.q, fusion_);
    return ctx;
}

PairForward DmnModel::forward_pair(const std::vector<int>& question_ids,
                                   const std::vector<int>& caption_ids,
                                   const std::vector<int>& summary_ids, const Tensor& visual,
                                   const Tensor& audio, const ChainState& chain,
                                   const std::vector<int>& framed_target) const {
    PairForward out;
    out.ctx = encode_context(question_ids, caption_ids, summary_ids, visual, audio);
    out.dec = decode_teacher_forced(chain, out.ctx.fused.v, framed_target, emb_, decoder_);
    return out;
}

BeamSearchResult DmnModel::generate(const QuestionContext& ctx, const ChainState& chain,
                                    int width, int max_len) const {
    if (width == 1) return greedy_decode(chain, ctx.fused.v, emb_, decoder_, max_len);
    return beam_search(chain, ctx.fused.v, emb_, decoder_, width, max_len);
}

namespace {

std::vector<int> strip_terminal_eos(std::vector<int> tokens) {
    if (!tokens.empty() && tokens.back() == Vocabulary::kEos) tokens.pop_back();
    return tokens;
}

std::vector<std::vector<double>> gate_rows(const EpisodicState& state) {
    std::vector<std::vector<double>> rows;
    rows.reserve(state.gates_history.size());
    for (const AttentionGates& g : state.gates_history) rows.push_back(g.g.value());
    return rows;
}

} // namespace

std::vector<PairOutcome> evaluate_dialogue(const DmnModel& model, const Vocabulary& vocab,
                                           const LoadedExample& ex, const EvalOptions& opts) {
    NoGradGuard guard;
    const std::size_t h = model.config().hidden;
    const std::vector<int> caption_ids = vocab.encode(ex.meta.caption);
    const std::vector<int> summary_ids = vocab.encode(ex.meta.summary);

    std::vector<PairOutcome> outcomes;
    ChainState chain = initial_chain(h);
    for (const QaPair& pair : ex.meta.qa_pairs) {
        PairOutcome out;
        out.question = pair.question;
        out.gold = pair.answer;

        QuestionContext ctx = model.encode_context(vocab.encode(pair.question), caption_ids,
                                                   summary_ids, ex.visual, ex.audio);
        BeamSearchResult gen = model.generate(ctx, chain, opts.beam_width, opts.max_len);
        for (int id : strip_terminal_eos(gen.tokens)) out.generated.push_back(vocab.token(id));
        out.exact = out.generated == out.gold;
        out.score = gen.score;

        if (opts.collect_attention) {
            out.visual_gates = gate_rows(ctx.visual);
            out.audio_gates = gate_rows(ctx.audio);
            out.caption_alpha = ctx.caption.alpha.value();
            out.summary_alpha = ctx.summary.alpha.value();
            const Tensor& beta = ctx.fused.beta;
            const std::size_t m = beta.shape()[0];
            const std::size_t cols = beta.shape()[1];
            for (std::size_t j = 0; j < m; ++j) {
                std::vector<double> brow(cols);
                for (std::size_t k = 0; k < cols; ++k) brow[k] = beta.value()[j * cols + k];
                out.beta.push_back(std::move(brow));
            }
        }

        chain.s_prev_final = opts.zero_chain ? Tensor::zeros({h}) : gen.final_state.h;
        chain.question_index += 1;
        outcomes.push_back(std::move(out));
    }
    return outcomes;
}

double exact_match_accuracy(const DmnModel& model, const Vocabulary& vocab,
                            const Dataset& dataset, const EvalOptions& opts) {
    if (dataset.empty()) throw InputError("exact_match_accuracy: empty dataset");
    std::size_t hits = 0, total = 0;
    for (const LoadedExample& ex : dataset) {
        for (const PairOutcome& out : evaluate_dialogue(model, vocab, ex, opts)) {
            hits += out.exact ? 1 : 0;
            total += 1;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

} // namespace dmn
