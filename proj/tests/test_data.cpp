#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "dmn/data.hpp"
#include "dmn/error.hpp"

using namespace dmn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream os(p);
    os << content;
}

} // namespace

TEST_CASE("tokenizer lowercases, splits punctuation, and is idempotent") {
    auto toks = tokenize("She is there, I think?");
    CHECK(toks == std::vector<std::string>{"she", "is", "there", ",", "i", "think", "?"});
    auto again = tokenize(join_tokens(toks));
    CHECK(again == toks);

    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("  spaced   out .") == std::vector<std::string>{"spaced", "out", "."});
}

TEST_CASE("vocabulary reserves pad/bos/eos/unk and maps unknowns to unk") {
    Vocabulary v;
    CHECK(v.size() == 4);
    CHECK(v.id("<pad>") == 0);
    CHECK(v.id("<bos>") == 1);
    CHECK(v.id("<eos>") == 2);
    CHECK(v.id("<unk>") == 3);
    CHECK(v.id("never-seen") == Vocabulary::kUnk);
    CHECK_THROWS_AS(v.token(4), InputError);
    CHECK_THROWS_AS(v.token(-1), InputError);
}

TEST_CASE("build_vocab honours min_count and orders by frequency then token") {
    DialogueExample d;
    d.id = "d";
    d.caption = tokenize("a a b");
    d.qa_pairs.push_back({tokenize("b c"), tokenize("c b")});
    // counts: a=2, b=3, c=2
    Vocabulary v1 = build_vocab({d}, 1);
    CHECK(v1.tokens() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "b", "a",
                                                  "c"});
    DialogueExample simple;
    simple.id = "s";
    simple.caption = tokenize("a a b");
    simple.qa_pairs.push_back({{}, {}});
    Vocabulary v2 = build_vocab({simple}, 2);
    CHECK(v2.tokens() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a"});

    Vocabulary v3 = build_vocab({}, 1);
    CHECK(v3.size() == 4);

    Vocabulary v4 = build_vocab({d}, 1);
    CHECK(v4.tokens() == v1.tokens()); // deterministic
}

TEST_CASE("vocab serialization round-trips") {
    const fs::path dir = temp_dir("dmn_vocab_test");
    DialogueExample d;
    d.id = "d";
    d.caption = tokenize("the cat sat on the mat .");
    d.qa_pairs.push_back({tokenize("where ?"), tokenize("mat")});
    Vocabulary v = build_vocab({d}, 1);
    save_vocab(v, (dir / "vocab.json").string());
    Vocabulary w = load_vocab((dir / "vocab.json").string());
    CHECK(w.tokens() == v.tokens());
    fs::remove_all(dir);
}

TEST_CASE("feature file round-trip is exact at 32-bit precision") {
    const fs::path dir = temp_dir("dmn_feat_test");
    const std::string path = (dir / "feat.dmnf").string();

    std::mt19937_64 rng(5);
    Tensor m = Tensor::uniform({10, 64}, -2.0, 2.0, rng);
    save_features(path, m);
    Tensor back = load_features(path);
    REQUIRE(back.shape() == m.shape());
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(back.value()[i] == static_cast<double>(static_cast<float>(m.value()[i])));
    }

    save_features(path, Tensor::from_vector({1, 1}, {0.5}));
    Tensor tiny = load_features(path);
    CHECK(tiny.shape() == std::vector<std::size_t>{1, 1});
    CHECK(tiny.value()[0] == 0.5);
    fs::remove_all(dir);
}

TEST_CASE("feature loader reports bad magic and truncation with byte counts") {
    const fs::path dir = temp_dir("dmn_feat_err");
    const std::string good = (dir / "good.dmnf").string();
    save_features(good, Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6}));

    const std::string bad = (dir / "bad.dmnf").string();
    write_text(bad, "WRONGDATA");
    CHECK_THROWS_AS(load_features(bad), FormatError);

    fs::copy_file(good, dir / "short.dmnf");
    fs::resize_file(dir / "short.dmnf", fs::file_size(good) - 4);
    try {
        load_features((dir / "short.dmnf").string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("24") != std::string::npos); // expected bytes
        CHECK(msg.find("20") != std::string::npos); // actual bytes
    }
    CHECK_THROWS_AS(load_features((dir / "missing.dmnf").string()), IoError);
    fs::remove_all(dir);
}

TEST_CASE("dialogue json loads, validates, and round-trips a transcribed sample") {
    const fs::path dir = temp_dir("dmn_dlg_test");
    save_features((dir / "v.dmnf").string(), Tensor::from_vector({1, 1}, {0.0}));
    save_features((dir / "a.dmnf").string(), Tensor::from_vector({1, 1}, {0.0}));

    // Transcription of a published AVSD-style dialogue round.
    write_text(dir / "dialogues.json", R"([
      {
        "id": "sample-1",
        "caption": "a person is laughing and snuggling a pillow and taking a sandwich.",
        "summary": "a man sitting hugging a pillow",
        "qa_pairs": [
          {"question": "is he at work?", "answer": "hard to say - he is sitting in the hallway by himself."},
          {"question": "is she there, I think?", "answer": "she is there, i think"},
          {"question": "does the man shift the pillow?", "answer": "no he does not"}
        ],
        "visual_features": "v.dmnf",
        "audio_features": "a.dmnf"
      }
    ])");

    auto dialogues = load_dialogues((dir / "dialogues.json").string());
    REQUIRE(dialogues.size() == 1);
    CHECK(dialogues[0].id == "sample-1");
    CHECK(dialogues[0].qa_pairs.size() == 3);
    CHECK(dialogues[0].qa_pairs[1].answer ==
          std::vector<std::string>{"she", "is", "there", ",", "i", "think"});

    // load -> serialize -> load is the identity on the parsed form.
    save_dialogues(dialogues, (dir / "roundtrip.json").string());
    auto again = load_dialogues((dir / "roundtrip.json").string());
    REQUIRE(again.size() == 1);
    CHECK(again[0].id == dialogues[0].id);
    CHECK(again[0].caption == dialogues[0].caption);
    CHECK(again[0].summary == dialogues[0].summary);
    REQUIRE(again[0].qa_pairs.size() == dialogues[0].qa_pairs.size());
    for (std::size_t i = 0; i < again[0].qa_pairs.size(); ++i) {
        CHECK(again[0].qa_pairs[i].question == dialogues[0].qa_pairs[i].question);
        CHECK(again[0].qa_pairs[i].answer == dialogues[0].qa_pairs[i].answer);
    }
    fs::remove_all(dir);
}

TEST_CASE("dialogue schema violations name the record and field") {
    const fs::path dir = temp_dir("dmn_dlg_err");
    write_text(dir / "empty.json", "[]");
    CHECK(load_dialogues((dir / "empty.json").string()).empty());

    write_text(dir / "missing.json", R"([
      {"id": "x", "caption": "c",
       "qa_pairs": [{"question": "q?", "answer": "a"}],
       "visual_features": "v.dmnf", "audio_features": "a.dmnf"}
    ])");
    try {
        load_dialogues((dir / "missing.json").string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("summary") != std::string::npos);
    }

    save_features((dir / "v.dmnf").string(), Tensor::from_vector({1, 1}, {0.0}));
    write_text(dir / "nofeat.json", R"([
      {"id": "x", "caption": "c", "summary": "s",
       "qa_pairs": [{"question": "q?", "answer": "a"}],
       "visual_features": "v.dmnf", "audio_features": "gone.dmnf"}
    ])");
    CHECK_THROWS_AS(load_dialogues((dir / "nofeat.json").string()), IoError);

    write_text(dir / "noqa.json", R"([
      {"id": "x", "caption": "c", "summary": "s", "qa_pairs": [],
       "visual_features": "v.dmnf", "audio_features": "v.dmnf"}
    ])");
    CHECK_THROWS_AS(load_dialogues((dir / "noqa.json").string()), ParseError);

    write_text(dir / "notjson.json", "{[");
    CHECK_THROWS_AS(load_dialogues((dir / "notjson.json").string()), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("embedding loader overrides exactly the covered rows") {
    const fs::path dir = temp_dir("dmn_emb_test");
    DialogueExample d;
    d.id = "d";
    d.caption = tokenize("cat dog bird");
    d.qa_pairs.push_back({tokenize("cat ?"), tokenize("dog")});
    Vocabulary vocab = build_vocab({d}, 1); // reserved + bird/cat/dog sorted by freq/lex

    std::mt19937_64 rng(3);
    Tensor table = Tensor::uniform({vocab.size(), 3}, -1.0, 1.0, rng);
    const std::vector<double> before = table.value();

    write_text(dir / "none.txt", "unrelated 1 2 3\n");
    CHECK(load_embeddings((dir / "none.txt").string(), vocab, table) == 0.0);
    CHECK(table.value() == before);

    write_text(dir / "one.txt", "cat 0.25 -1 2\n");
    const double cov = load_embeddings((dir / "one.txt").string(), vocab, table);
    CHECK(cov == doctest::Approx(0.25)); // one of four non-reserved tokens covered
    const int cat = vocab.id("cat");
    CHECK(table.value()[cat * 3 + 0] == 0.25);
    CHECK(table.value()[cat * 3 + 1] == -1.0);
    CHECK(table.value()[cat * 3 + 2] == 2.0);

    std::string bad;
    for (int i = 0; i < 6; ++i) bad += "w" + std::to_string(i) + " 1 2 3\n";
    bad += "cat 1 2\n"; // line 7: wrong dimension
    write_text(dir / "bad.txt", bad);
    try {
        load_embeddings((dir / "bad.txt").string(), vocab, table);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("synthetic generator is deterministic and well-formed") {
    SyntheticCorpus a = generate_synthetic(12, 6, 16, 77);
    SyntheticCorpus b = generate_synthetic(12, 6, 16, 77);
    REQUIRE(a.dialogues.size() == 12);
    for (std::size_t i = 0; i < a.dialogues.size(); ++i) {
        CHECK(a.dialogues[i].example.id == b.dialogues[i].example.id);
        CHECK(a.dialogues[i].visual_events == b.dialogues[i].visual_events);
        CHECK(a.dialogues[i].audio_events == b.dialogues[i].audio_events);
        CHECK(a.dialogues[i].visual_features.value() == b.dialogues[i].visual_features.value());
        CHECK(a.dialogues[i].audio_features.value() == b.dialogues[i].audio_features.value());
        REQUIRE(a.dialogues[i].example.qa_pairs.size() ==
                b.dialogues[i].example.qa_pairs.size());
        for (std::size_t q = 0; q < a.dialogues[i].example.qa_pairs.size(); ++q) {
            CHECK(a.dialogues[i].example.qa_pairs[q].question ==
                  b.dialogues[i].example.qa_pairs[q].question);
            CHECK(a.dialogues[i].example.qa_pairs[q].answer ==
                  b.dialogues[i].example.qa_pairs[q].answer);
        }
    }

    const auto visual_pool = synthetic_visual_events(6);
    const auto audio_pool = synthetic_audio_events();
    for (const SyntheticDialogue& dlg : a.dialogues) {
        // 4 warm-ups (both ends, both streams), 2 rounds of positional
        // questions per stream, the probe, and the follow-up.
        REQUIRE(dlg.example.qa_pairs.size() == 10);
        REQUIRE(dlg.queries.size() == 10);
        REQUIRE(dlg.visual_events.size() == 6);
        CHECK(dlg.visual_features.shape() == std::vector<std::size_t>{6, 16});

        // Warm-ups target the first and last segment of each stream; the
        // follow-up sits right after the probe whose answer it references.
        CHECK(dlg.queries[0].kind == SyntheticQuery::Kind::visual);
        CHECK(dlg.queries[0].segment == 0);
        CHECK(dlg.queries[1].kind == SyntheticQuery::Kind::visual);
        CHECK(dlg.queries[1].segment == 5);
        CHECK(dlg.queries[2].kind == SyntheticQuery::Kind::audio);
        CHECK(dlg.queries[2].segment == 0);
        CHECK(dlg.queries[3].kind == SyntheticQuery::Kind::audio);
        CHECK(dlg.queries[3].segment == 5);
        CHECK(dlg.queries[8].kind == SyntheticQuery::Kind::visual);
        CHECK(dlg.queries[9].kind == SyntheticQuery::Kind::followup);
        CHECK(dlg.queries[9].segment == -1);

        // The caption names the opening events, the summary the closing ones.
        CHECK(dlg.example.caption[4] == dlg.visual_events.front());
        CHECK(dlg.example.caption[6] == dlg.audio_events.front());
        CHECK(dlg.example.summary[4] == dlg.visual_events.back());
        CHECK(dlg.example.summary[6] == dlg.audio_events.back());

        for (std::size_t qi = 0; qi < dlg.example.qa_pairs.size(); ++qi) {
            const auto& ans = dlg.example.qa_pairs[qi].answer;
            REQUIRE(ans.size() == 1);
            const bool in_visual =
                std::find(visual_pool.begin(), visual_pool.end(), ans[0]) != visual_pool.end();
            const bool in_audio =
                std::find(audio_pool.begin(), audio_pool.end(), ans[0]) != audio_pool.end();
            const bool yes_no = ans[0] == "yes" || ans[0] == "no";
            CHECK((in_visual || in_audio || yes_no));
        }
        // Recurring events appear exactly twice, one-offs exactly once.
        for (const std::string& ev : std::set<std::string>(dlg.visual_events.begin(),
                                                           dlg.visual_events.end())) {
            const auto n = std::count(dlg.visual_events.begin(), dlg.visual_events.end(), ev);
            const auto pos = std::find(visual_pool.begin(), visual_pool.end(), ev);
            const bool recurring =
                static_cast<std::size_t>(pos - visual_pool.begin()) < synthetic_recurring_count();
            CHECK(n == (recurring ? 2 : 1));
        }
    }
}

TEST_CASE("synthetic task is solvable by the planted-metadata oracle") {
    SyntheticCorpus corpus = generate_synthetic(50, 6, 16, 123);
    CHECK(synthetic_oracle_accuracy(corpus) == 1.0);
}

TEST_CASE("synthetic majority baseline stays near chance") {
    SyntheticCorpus corpus = generate_synthetic(300, 6, 8, 9);
    std::unordered_map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& dlg : corpus.dialogues) {
        for (const auto& qa : dlg.example.qa_pairs) {
            ++counts[qa.answer.front()];
            ++total;
        }
    }
    std::size_t best = 0;
    for (const auto& [tok, n] : counts) best = std::max(best, n);
    const double majority = static_cast<double>(best) / static_cast<double>(total);
    const double bound = 1.0 / static_cast<double>(synthetic_visual_events(6).size()) + 0.1;
    CHECK(majority <= bound);
}

TEST_CASE("synthetic generator validates its configuration") {
    CHECK_THROWS_AS(generate_synthetic(1, 51, 8, 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(0, 6, 8, 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(1, 6, 0, 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(1, -2, 8, 1), ConfigError);
    // Position capacity boundary itself is fine.
    SyntheticCorpus big = generate_synthetic(1, 50, 8, 1);
    CHECK(big.dialogues[0].visual_events.size() == 50);
    CHECK(synthetic_oracle_accuracy(big) == 1.0);
}

TEST_CASE("written corpus reloads as an identical dataset") {
    const fs::path dir = temp_dir("dmn_corpus_test");
    SyntheticCorpus corpus = generate_synthetic(5, 4, 8, 2024);
    write_corpus(corpus, dir.string());

    Dataset loaded = load_dataset((dir / "dialogues.json").string());
    Dataset direct = to_dataset(corpus);
    REQUIRE(loaded.size() == direct.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].meta.id == direct[i].meta.id);
        CHECK(loaded[i].meta.caption == direct[i].meta.caption);
        REQUIRE(loaded[i].meta.qa_pairs.size() == direct[i].meta.qa_pairs.size());
        CHECK(loaded[i].visual.value() == direct[i].visual.value()); // f32-rounded at source
        CHECK(loaded[i].audio.value() == direct[i].audio.value());
    }
    fs::remove_all(dir);
}
