#include "dmn/data.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "binio.hpp"
#include "dmn/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dmn {

// --- text ------------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text) {
    std::string spaced;
    spaced.reserve(text.size() + 8);
    for (char c : text) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (c == '.' || c == ',' || c == '?' || c == '!') {
            spaced.push_back(' ');
            spaced.push_back(c);
            spaced.push_back(' ');
        } else {
            spaced.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    std::vector<std::string> tokens;
    std::istringstream is(spaced);
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

// --- vocabulary ----------------------------------------------------------------

namespace {
const std::vector<std::string> kReserved = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocabulary::Vocabulary() : tokens_(kReserved) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) map_[tokens_[i]] = static_cast<int>(i);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens_after_reserved) : Vocabulary() {
    for (const std::string& t : tokens_after_reserved) {
        if (map_.count(t)) {
            throw ContractError("vocabulary token '" + t + "' appears twice");
        }
        map_[t] = static_cast<int>(tokens_.size());
        tokens_.push_back(t);
    }
}

int Vocabulary::id(const std::string& token) const {
    auto it = map_.find(token);
    return it == map_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw InputError("vocabulary id " + std::to_string(id) + " out of range (size " +
                         std::to_string(tokens_.size()) + ")");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(id(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
}

Vocabulary build_vocab(const std::vector<DialogueExample>& dialogues, std::size_t min_count) {
    if (min_count < 1) throw ConfigError("build_vocab: min_count must be at least 1");
    std::unordered_map<std::string, std::size_t> counts;
    auto feed = [&](const std::vector<std::string>& toks) {
        for (const std::string& t : toks) ++counts[t];
    };
    for (const DialogueExample& d : dialogues) {
        feed(d.caption);
        feed(d.summary);
        for (const QaPair& qa : d.qa_pairs) {
            feed(qa.question);
            feed(qa.answer);
        }
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, n] : counts) {
        if (n < min_count) continue;
        if (std::find(kReserved.begin(), kReserved.end(), tok) != kReserved.end()) continue;
        kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> toks;
    toks.reserve(kept.size());
    for (auto& [t, n] : kept) toks.push_back(t);
    return Vocabulary(toks);
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << json(vocab.tokens()).dump(2) << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    json root;
    try {
        root = json::parse(is);
    } catch (const json::exception& e) {
        throw ParseError("vocab file '" + path + "': " + e.what());
    }
    if (!root.is_array()) throw ParseError("vocab file '" + path + "': expected a JSON array");
    std::vector<std::string> toks;
    for (const auto& v : root) {
        if (!v.is_string()) throw ParseError("vocab file '" + path + "': non-string entry");
        toks.push_back(v.get<std::string>());
    }
    if (toks.size() < kReserved.size() ||
        !std::equal(kReserved.begin(), kReserved.end(), toks.begin())) {
        throw ParseError("vocab file '" + path + "': reserved tokens missing or reordered");
    }
    return Vocabulary(std::vector<std::string>(toks.begin() + kReserved.size(), toks.end()));
}

// --- dialogues -----------------------------------------------------------------

namespace {

std::string record_label(std::size_t idx, const json& rec) {
    std::string label = "dialogue record " + std::to_string(idx);
    if (rec.is_object() && rec.contains("id") && rec["id"].is_string()) {
        label += " ('" + rec["id"].get<std::string>() + "')";
    }
    return label;
}

std::string get_string_field(const json& rec, const char* field, std::size_t idx) {
    if (!rec.contains(field)) {
        throw ParseError(record_label(idx, rec) + ": missing field '" + field + "'");
    }
    if (!rec[field].is_string()) {
        throw ParseError(record_label(idx, rec) + ": field '" + field + "' must be a string");
    }
    return rec[field].get<std::string>();
}

} // namespace

std::vector<DialogueExample> load_dialogues(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    json root;
    try {
        root = json::parse(is);
    } catch (const json::exception& e) {
        throw ParseError("dialogues file '" + path + "': " + e.what());
    }
    if (!root.is_array()) {
        throw ParseError("dialogues file '" + path + "': expected a JSON array");
    }
    const fs::path base = fs::path(path).parent_path();
    std::vector<DialogueExample> out;
    out.reserve(root.size());
    for (std::size_t idx = 0; idx < root.size(); ++idx) {
        const json& rec = root[idx];
        if (!rec.is_object()) {
            throw ParseError("dialogue record " + std::to_string(idx) + ": expected an object");
        }
        DialogueExample d;
        d.id = get_string_field(rec, "id", idx);
        d.caption = tokenize(get_string_field(rec, "caption", idx));
        d.summary = tokenize(get_string_field(rec, "summary", idx));
        if (!rec.contains("qa_pairs") || !rec["qa_pairs"].is_array()) {
            throw ParseError(record_label(idx, rec) + ": missing field 'qa_pairs'");
        }
        for (const json& qa : rec["qa_pairs"]) {
            if (!qa.is_object() || !qa.contains("question") || !qa.contains("answer") ||
                !qa["question"].is_string() || !qa["answer"].is_string()) {
                throw ParseError(record_label(idx, rec) +
                                 ": field 'qa_pairs' entries need string 'question' and 'answer'");
            }
            d.qa_pairs.push_back({tokenize(qa["question"].get<std::string>()),
                                  tokenize(qa["answer"].get<std::string>())});
        }
        if (d.qa_pairs.empty()) {
            throw ParseError(record_label(idx, rec) + ": field 'qa_pairs' must be nonempty");
        }
        d.visual_features_ref = get_string_field(rec, "visual_features", idx);
        d.audio_features_ref = get_string_field(rec, "audio_features", idx);
        auto resolve = [&](const std::string& ref) {
            fs::path p(ref);
            if (p.is_relative()) p = base / p;
            if (!fs::exists(p)) {
                throw IoError(record_label(idx, rec) + ": feature file not found: " + p.string());
            }
            return p.string();
        };
        d.visual_features_path = resolve(d.visual_features_ref);
        d.audio_features_path = resolve(d.audio_features_ref);
        out.push_back(std::move(d));
    }
    return out;
}

void save_dialogues(const std::vector<DialogueExample>& dialogues, const std::string& path) {
    json root = json::array();
    for (const DialogueExample& d : dialogues) {
        json qa = json::array();
        for (const QaPair& p : d.qa_pairs) {
            qa.push_back({{"question", join_tokens(p.question)}, {"answer", join_tokens(p.answer)}});
        }
        root.push_back({{"id", d.id},
                        {"caption", join_tokens(d.caption)},
                        {"summary", join_tokens(d.summary)},
                        {"qa_pairs", std::move(qa)},
                        {"visual_features", d.visual_features_ref},
                        {"audio_features", d.audio_features_ref}});
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << root.dump(2) << '\n';
    if (!os) throw IoError("write to '" + path + "' failed");
}

// --- feature files -----------------------------------------------------------

namespace {
constexpr char kFeatMagic[4] = {'D', 'M', 'N', 'F'};
constexpr std::uint8_t kFeatVersion = 1;
} // namespace

Tensor load_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kFeatMagic, 4) != 0) {
        throw FormatError("feature file '" + path + "' has bad magic (expected DMNF)");
    }
    const std::string what = "feature file '" + path + "'";
    const std::uint8_t ver = binio::get_u8(is, what);
    if (ver != kFeatVersion) {
        throw FormatError(what + " has unsupported version " + std::to_string(ver));
    }
    const std::uint32_t n = binio::get_u32(is, what);
    const std::uint32_t d = binio::get_u32(is, what);
    if (n == 0 || d == 0) {
        throw FormatError(what + " declares empty shape " + std::to_string(n) + "x" +
                          std::to_string(d));
    }
    const std::size_t expect = 4ull * n * d;
    std::vector<char> payload(expect);
    is.read(payload.data(), static_cast<std::streamsize>(expect));
    const std::size_t got = static_cast<std::size_t>(is.gcount());
    if (got != expect) {
        throw FormatError(what + " payload is short: expected " + std::to_string(expect) +
                          " bytes, got " + std::to_string(got));
    }
    std::vector<double> values(static_cast<std::size_t>(n) * d);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + b]))
                    << (8 * b);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        values[i] = static_cast<double>(f);
    }
    return Tensor::from_vector({n, d}, std::move(values));
}

void save_features(const std::string& path, const Tensor& values) {
    if (values.rank() != 2) {
        throw DimensionError("save_features: expects a 2-D tensor, got " +
                             shape_to_string(values.shape()));
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.write(kFeatMagic, 4);
    binio::put_u8(os, kFeatVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(values.shape()[0]));
    binio::put_u32(os, static_cast<std::uint32_t>(values.shape()[1]));
    for (double v : values.value()) binio::put_f32(os, static_cast<float>(v));
    if (!os) throw IoError("write to '" + path + "' failed");
}

// --- pretrained embeddings ------------------------------------------------------

double load_embeddings(const std::string& path, const Vocabulary& vocab, Tensor& table) {
    if (table.rank() != 2 || table.shape()[0] != vocab.size()) {
        throw DimensionError("load_embeddings: table shape " + shape_to_string(table.shape()) +
                             " does not cover vocabulary of size " + std::to_string(vocab.size()));
    }
    const std::size_t dim = table.shape()[1];
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    std::vector<bool> covered(vocab.size(), false);
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        std::vector<double> vals;
        vals.reserve(dim);
        double v;
        while (ls >> v) vals.push_back(v);
        if (!ls.eof()) {
            throw ParseError("embeddings file '" + path + "' line " + std::to_string(line_no) +
                             ": non-numeric value for token '" + word + "'");
        }
        if (vals.size() != dim) {
            throw ParseError("embeddings file '" + path + "' line " + std::to_string(line_no) +
                             ": expected " + std::to_string(dim) + " values for token '" + word +
                             "', got " + std::to_string(vals.size()));
        }
        const int id = vocab.id(word);
        if (id == Vocabulary::kUnk && word != vocab.token(Vocabulary::kUnk)) continue;
        std::copy(vals.begin(), vals.end(), table.value().begin() + id * dim);
        covered[static_cast<std::size_t>(id)] = true;
    }
    const std::size_t non_reserved = vocab.size() - 4;
    if (non_reserved == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 4; i < covered.size(); ++i) hit += covered[i] ? 1u : 0u;
    return static_cast<double>(hit) / static_cast<double>(non_reserved);
}

// --- synthetic task --------------------------------------------------------------

namespace {

constexpr int kMaxSegments = 50; // position-code capacity
const std::vector<std::string> kRecurring = {"cooking", "running", "dancing"};
const std::vector<std::string> kOneOffBase = {"reading", "sleeping", "jumping", "writing",
                                              "eating"};
const std::vector<std::string> kAudio = {"music", "barking", "clapping", "thunder",
                                         "laughing", "silence"};
constexpr double kProtoMagnitude = 1.0;
constexpr double kNoiseSigma = 0.02;

std::vector<double> signed_pattern(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<double> v(n);
    for (double& x : v) x = coin(rng) ? kProtoMagnitude : -kProtoMagnitude;
    return v;
}

// Mutually orthogonal signed patterns (Sylvester construction) while the
// index fits into the largest power-of-two block of n; random signed
// patterns beyond that, so large pools degrade gracefully instead of failing.
std::vector<double> orthogonal_pattern(std::size_t n, std::size_t index, std::mt19937_64& rng) {
    std::size_t block = 1;
    while (block * 2 <= n) block *= 2;
    if (index >= block) return signed_pattern(n, rng);
    std::vector<double> v(n, 0.0);
    for (std::size_t j = 0; j < block; ++j) {
        const int parity = __builtin_popcountll(index & j) & 1;
        v[j] = parity ? -kProtoMagnitude : kProtoMagnitude;
    }
    return v;
}

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

} // namespace

std::vector<std::string> synthetic_visual_events(int n_segments) {
    std::vector<std::string> pool = kRecurring;
    pool.insert(pool.end(), kOneOffBase.begin(), kOneOffBase.end());
    // A dialogue needs up to n_segments - 2 distinct one-off events; extend the
    // pool with systematic names for large segment counts.
    for (int i = static_cast<int>(kOneOffBase.size()) + 1; i <= n_segments - 2; ++i) {
        pool.push_back("chore" + std::to_string(i));
    }
    return pool;
}

std::vector<std::string> synthetic_audio_events() { return kAudio; }

std::size_t synthetic_recurring_count() { return kRecurring.size(); }

SyntheticCorpus generate_synthetic(std::size_t num_dialogues, int n_segments, int feat_dim,
                                   std::uint64_t seed) {
    if (num_dialogues == 0 || n_segments <= 0 || feat_dim <= 0) {
        throw ConfigError("generate_synthetic: num_dialogues, segments and feature dim must be "
                          "positive");
    }
    if (n_segments > kMaxSegments) {
        throw ConfigError("generate_synthetic: " + std::to_string(n_segments) +
                          " segments exceeds the position-encoding capacity of " +
                          std::to_string(kMaxSegments));
    }
    if (n_segments < 2) {
        throw ConfigError("generate_synthetic: at least 2 segments are needed so a recurring "
                          "event can appear twice");
    }
    const int N = n_segments;
    const std::size_t D = static_cast<std::size_t>(feat_dim);
    const std::size_t pos_dims = D / 2;       // position signature
    const std::size_t proto_dims = D - pos_dims; // event signature

    std::mt19937_64 rng(seed);
    const std::vector<std::string> visual_pool = synthetic_visual_events(N);
    const std::size_t oneoff_count = visual_pool.size() - kRecurring.size();

    // Prototype vectors for events and positions, shared across the corpus.
    // Orthogonal patterns keep distinct events and distinct segments linearly
    // separable in feature space.
    std::vector<std::vector<double>> visual_proto, audio_proto, pos_code;
    for (std::size_t e = 0; e < visual_pool.size(); ++e)
        visual_proto.push_back(orthogonal_pattern(proto_dims, e, rng));
    for (std::size_t e = 0; e < kAudio.size(); ++e)
        audio_proto.push_back(orthogonal_pattern(proto_dims, e, rng));
    for (int p = 0; p < N; ++p)
        pos_code.push_back(orthogonal_pattern(pos_dims, static_cast<std::size_t>(p), rng));

    std::normal_distribution<double> noise(0.0, kNoiseSigma);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> audio_pick(0, static_cast<int>(kAudio.size()) - 1);
    std::uniform_int_distribution<int> seg_pick(0, N - 1);

    SyntheticCorpus corpus;
    corpus.segments = N;
    corpus.feat_dim = feat_dim;
    corpus.seed = seed;

    for (std::size_t di = 0; di < num_dialogues; ++di) {
        SyntheticDialogue dlg;

        // Decide the follow-up answer first, then lay out events so that every
        // recurring event present occupies exactly two segments and every
        // one-off event exactly one. The follow-up probe comes from the class
        // matching the chosen answer.
        bool follow_yes = coin(rng) == 1;
        const int r_min = std::max(1, (N - static_cast<int>(oneoff_count) + 1) / 2);
        int r_max = std::min(static_cast<int>(kRecurring.size()), N / 2);
        if (!follow_yes) {
            const int r_max_no = std::min(r_max, (N - 1) / 2); // keep one one-off slot
            if (r_max_no < r_min) {
                follow_yes = true; // tiny layouts have no room for a one-off probe
            } else {
                r_max = r_max_no;
            }
        }
        std::uniform_int_distribution<int> r_pick(r_min, r_max);
        const int r = r_pick(rng);

        auto sample_distinct = [&](std::size_t count, std::size_t pool_lo, std::size_t pool_hi) {
            std::vector<std::size_t> ids(pool_hi - pool_lo);
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = pool_lo + i;
            std::shuffle(ids.begin(), ids.end(), rng);
            ids.resize(count);
            return ids;
        };
        const auto recurring_ids = sample_distinct(static_cast<std::size_t>(r), 0,
                                                   kRecurring.size());
        const auto oneoff_ids = sample_distinct(static_cast<std::size_t>(N - 2 * r),
                                                kRecurring.size(), visual_pool.size());

        std::vector<std::size_t> slot_events;
        for (std::size_t e : recurring_ids) {
            slot_events.push_back(e);
            slot_events.push_back(e);
        }
        for (std::size_t e : oneoff_ids) slot_events.push_back(e);
        std::shuffle(slot_events.begin(), slot_events.end(), rng);

        dlg.visual_events.reserve(N);
        for (int i = 0; i < N; ++i) dlg.visual_events.push_back(visual_pool[slot_events[i]]);
        dlg.audio_events.reserve(N);
        for (int i = 0; i < N; ++i) dlg.audio_events.push_back(kAudio[audio_pick(rng)]);

        // Features: [event prototype | position code] + Gaussian noise, rounded
        // through float32 so in-memory data equals what a written file reloads.
        auto build_features = [&](const std::vector<std::vector<double>>& protos,
                                  const std::vector<std::size_t>& events) {
            std::vector<double> flat;
            flat.reserve(static_cast<std::size_t>(N) * D);
            for (int i = 0; i < N; ++i) {
                const std::vector<double>& proto = protos[events[i]];
                for (std::size_t d = 0; d < proto_dims; ++d)
                    flat.push_back(round_f32(proto[d] + noise(rng)));
                for (std::size_t d = 0; d < pos_dims; ++d)
                    flat.push_back(round_f32(pos_code[i][d] + noise(rng)));
            }
            return Tensor::from_vector({static_cast<std::size_t>(N), D}, std::move(flat));
        };
        dlg.visual_features = build_features(visual_proto, slot_events);
        std::vector<std::size_t> audio_ids(N);
        for (int i = 0; i < N; ++i) {
            const auto it = std::find(kAudio.begin(), kAudio.end(), dlg.audio_events[i]);
            audio_ids[i] = static_cast<std::size_t>(it - kAudio.begin());
        }
        dlg.audio_features = build_features(audio_proto, audio_ids);

        // Four QA pairs: two direct visual/audio segment questions, then the
        // probe question whose answer the follow-up references.
        DialogueExample& ex = dlg.example;
        ex.id = "dlg-" + std::to_string(di);
        ex.caption = {"the",   "video", "starts",
                      "with",  dlg.visual_events.front(),
                      "while", dlg.audio_events.front(), "plays"};
        ex.summary = {"the",   "video", "ends",
                      "with",  dlg.visual_events.back(),
                      "while", dlg.audio_events.back(), "plays"};

        auto segment_question = [&](const char* verb, int seg) {
            return std::vector<std::string>{"what", verb, "in", "segment",
                                            std::to_string(seg + 1), "?"};
        };

        // Warm-up questions with single-hop answers (the caption names the
        // first event, the summary the last one, and the final segment is the
        // most recent thing either encoder saw). They give the decoder an
        // early reason to read the fused context, and they use the exact
        // positional phrasing of the graded questions so whatever they teach
        // transfers to the other segments.
        ex.qa_pairs.push_back({segment_question("happens", 0), {dlg.visual_events.front()}});
        dlg.queries.push_back({SyntheticQuery::Kind::visual, 0});
        ex.qa_pairs.push_back({segment_question("happens", N - 1), {dlg.visual_events.back()}});
        dlg.queries.push_back({SyntheticQuery::Kind::visual, N - 1});
        ex.qa_pairs.push_back({segment_question("sound", 0), {dlg.audio_events.front()}});
        dlg.queries.push_back({SyntheticQuery::Kind::audio, 0});
        ex.qa_pairs.push_back({segment_question("sound", N - 1), {dlg.audio_events.back()}});
        dlg.queries.push_back({SyntheticQuery::Kind::audio, N - 1});

        // Two rounds of direct positional questions per modality; these carry
        // the segment-binding supervision, so ask more than once per clip.
        for (int round = 0; round < 2; ++round) {
            const int vseg = seg_pick(rng);
            ex.qa_pairs.push_back({segment_question("happens", vseg), {dlg.visual_events[vseg]}});
            dlg.queries.push_back({SyntheticQuery::Kind::visual, vseg});

            const int aseg = seg_pick(rng);
            ex.qa_pairs.push_back({segment_question("sound", aseg), {dlg.audio_events[aseg]}});
            dlg.queries.push_back({SyntheticQuery::Kind::audio, aseg});
        }

        // Probe slot: a recurring event's slot for "yes", a one-off's for "no".
        std::vector<int> candidates;
        for (int i = 0; i < N; ++i) {
            const bool recurring = slot_events[i] < kRecurring.size();
            if (recurring == follow_yes) candidates.push_back(i);
        }
        std::uniform_int_distribution<std::size_t> cand_pick(0, candidates.size() - 1);
        const int seg3 = candidates[cand_pick(rng)];
        ex.qa_pairs.push_back({segment_question("happens", seg3), {dlg.visual_events[seg3]}});
        dlg.queries.push_back({SyntheticQuery::Kind::visual, seg3});

        ex.qa_pairs.push_back({{"does", "it", "happen", "again", "?"},
                               {follow_yes ? "yes" : "no"}});
        dlg.queries.push_back({SyntheticQuery::Kind::followup, -1});

        corpus.dialogues.push_back(std::move(dlg));
    }
    return corpus;
}

double synthetic_oracle_accuracy(const SyntheticCorpus& corpus) {
    std::size_t total = 0, hit = 0;
    for (const SyntheticDialogue& dlg : corpus.dialogues) {
        for (std::size_t qi = 0; qi < dlg.queries.size(); ++qi) {
            const SyntheticQuery& q = dlg.queries[qi];
            const std::vector<std::string>& gold = dlg.example.qa_pairs[qi].answer;
            std::string predicted;
            switch (q.kind) {
                case SyntheticQuery::Kind::visual:
                    predicted = dlg.visual_events[static_cast<std::size_t>(q.segment)];
                    break;
                case SyntheticQuery::Kind::audio:
                    predicted = dlg.audio_events[static_cast<std::size_t>(q.segment)];
                    break;
                case SyntheticQuery::Kind::followup: {
                    // Answer from event multiplicity of the previous answer.
                    const std::string& prev = dlg.example.qa_pairs[qi - 1].answer.front();
                    const auto n = std::count(dlg.visual_events.begin(), dlg.visual_events.end(),
                                              prev);
                    predicted = n >= 2 ? "yes" : "no";
                    break;
                }
            }
            ++total;
            if (gold.size() == 1 && gold.front() == predicted) ++hit;
        }
    }
    return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

void write_corpus(SyntheticCorpus& corpus, const std::string& dir) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "features", ec);
    if (ec) throw IoError("cannot create directory '" + (root / "features").string() + "'");
    std::vector<DialogueExample> examples;
    examples.reserve(corpus.dialogues.size());
    for (SyntheticDialogue& dlg : corpus.dialogues) {
        dlg.example.visual_features_ref = "features/" + dlg.example.id + ".visual.dmnf";
        dlg.example.audio_features_ref = "features/" + dlg.example.id + ".audio.dmnf";
        dlg.example.visual_features_path = (root / dlg.example.visual_features_ref).string();
        dlg.example.audio_features_path = (root / dlg.example.audio_features_ref).string();
        save_features(dlg.example.visual_features_path, dlg.visual_features);
        save_features(dlg.example.audio_features_path, dlg.audio_features);
        examples.push_back(dlg.example);
    }
    save_dialogues(examples, (root / "dialogues.json").string());
}

// --- datasets --------------------------------------------------------------------

Dataset load_dataset(const std::string& dialogues_path) {
    Dataset out;
    for (DialogueExample& d : load_dialogues(dialogues_path)) {
        LoadedExample ex;
        ex.visual = load_features(d.visual_features_path);
        ex.audio = load_features(d.audio_features_path);
        ex.meta = std::move(d);
        out.push_back(std::move(ex));
    }
    return out;
}

Dataset to_dataset(const SyntheticCorpus& corpus) {
    Dataset out;
    out.reserve(corpus.dialogues.size());
    for (const SyntheticDialogue& dlg : corpus.dialogues) {
        out.push_back({dlg.example, dlg.visual_features, dlg.audio_features});
    }
    return out;
}

} // namespace dmn
