#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmn/tensor.hpp"

namespace dmn {

// --- text -----------------------------------------------------------------

// Lowercase, split punctuation (. , ? !) into standalone tokens, then split
// on whitespace. Idempotent: tokenizing re-joined output changes nothing.
std::vector<std::string> tokenize(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr std::size_t kReservedCount = 4;

    Vocabulary(); // reserved tokens only
    explicit Vocabulary(const std::vector<std::string>& tokens_after_reserved);

    int id(const std::string& token) const; // unknown -> kUnk
    const std::string& token(int id) const; // out of range -> InputError
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> map_;
};

// Tokens with corpus frequency >= min_count, ordered by (frequency desc,
// token asc) after the reserved ids. Counts caption, summary, questions and
// answers.
struct DialogueExample;
Vocabulary build_vocab(const std::vector<DialogueExample>& dialogues, std::size_t min_count);

void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

// --- dialogues --------------------------------------------------------------

struct QaPair {
    std::vector<std::string> question;
    std::vector<std::string> answer;
};

struct DialogueExample {
    std::string id;
    std::vector<std::string> caption;
    std::vector<std::string> summary;
    std::vector<QaPair> qa_pairs;
    std::string visual_features_ref; // as written in the dialogue file
    std::string audio_features_ref;
    std::string visual_features_path; // resolved against the file's directory
    std::string audio_features_path;
};

// JSON array of records. Text fields are tokenized on load; feature refs are
// resolved relative to the dialogue file and must exist.
std::vector<DialogueExample> load_dialogues(const std::string& path);
void save_dialogues(const std::vector<DialogueExample>& dialogues, const std::string& path);

// --- per-segment features ----------------------------------------------------

// Binary matrix file: magic "DMNF", version byte, u32 N, u32 D, then N*D
// little-endian float32 values row-major. Loading widens to float64.
Tensor load_features(const std::string& path);
void save_features(const std::string& path, const Tensor& values); // rounds to f32

// --- pretrained word vectors ---------------------------------------------------

// Text lines "token v1 ... v_dim". Rows of `table` ([vocab x dim]) whose token
// appears in the file are overwritten; everything else keeps its init.
// Returns covered fraction of the non-reserved vocabulary.
double load_embeddings(const std::string& path, const Vocabulary& vocab, Tensor& table);

// --- synthetic scene-dialogue task ------------------------------------------

// Every dialogue plants one event per segment in each stream. A visual event
// is either "recurring" (always occupies exactly two segments when present)
// or "one-off" (exactly one), so a follow-up question about the previous
// answer is decidable from event multiplicity. Questions name segments by
// their 1-based index; answers are single tokens.

struct SyntheticQuery {
    enum class Kind { visual, audio, followup };
    Kind kind;
    int segment; // 0-based queried segment; -1 for follow-ups
};

struct SyntheticDialogue {
    DialogueExample example;
    Tensor visual_features; // [N x D], already rounded through float32
    Tensor audio_features;  // [N x D]
    std::vector<std::string> visual_events; // planted event per segment
    std::vector<std::string> audio_events;
    std::vector<SyntheticQuery> queries; // one per QA pair
};

struct SyntheticCorpus {
    std::vector<SyntheticDialogue> dialogues;
    int segments = 0;
    int feat_dim = 0;
    std::uint64_t seed = 0;
};

// Deterministic for a given seed. n_segments > 50 exceeds the position
// encoding capacity and raises ConfigError.
SyntheticCorpus generate_synthetic(std::size_t num_dialogues, int n_segments, int feat_dim,
                                   std::uint64_t seed);

// Visual event pool used for a given segment count (recurring events first).
std::vector<std::string> synthetic_visual_events(int n_segments);
std::vector<std::string> synthetic_audio_events();
std::size_t synthetic_recurring_count();

// Reads the planted metadata (not the model) and answers every question;
// returns token accuracy, which is 1.0 by construction.
double synthetic_oracle_accuracy(const SyntheticCorpus& corpus);

// Materializes dialogues.json plus features/*.dmnf under dir and fills in the
// feature refs of every example.
void write_corpus(SyntheticCorpus& corpus, const std::string& dir);

// --- datasets ---------------------------------------------------------------

struct LoadedExample {
    DialogueExample meta;
    Tensor visual; // [N x D]
    Tensor audio;
};
using Dataset = std::vector<LoadedExample>;

Dataset load_dataset(const std::string& dialogues_path);
Dataset to_dataset(const SyntheticCorpus& corpus);

} // namespace dmn
