#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oisub/vocab.hpp"

namespace oisub {

constexpr int kNumRelations = 6;

/// One clause of a context: an attribute bound (or merely adjacent, for the
/// non-related variant) to an entity. OIs are first-occurrence orders over
/// the sample; PIs index into the concatenated context+query token stream.
struct EaPair {
    int entity = -1;
    int attribute = -1;
    int entity_oi = -1;
    int attribute_oi = -1;
    int entity_pi = -1;
    int attribute_pi = -1;
};

struct Sample {
    std::vector<int> context_tokens;
    std::vector<int> query_tokens;
    int answer_token = -1;  // -1 when absent (non-related variant)
    int relation = 0;
    std::vector<EaPair> pairs;
    int query_entity_oi = -1;
    int query_entity_pi = -1;  // global position of the entity token in the query
    std::string variant = "base";
    uint64_t seed = 0;
    uint64_t sample_id = 0;

    std::vector<int> full_tokens() const {
        std::vector<int> t = context_tokens;
        t.insert(t.end(), query_tokens.begin(), query_tokens.end());
        return t;
    }
};

struct DatasetManifest {
    int relation = 0;
    std::string variant = "base";
    size_t n = 0;
    size_t k_pairs = 7;
    uint64_t seed = 0;
    double train_frac = 0.8, dev_frac = 0.1, test_frac = 0.1;
    uint64_t vocab_hash = 0;
};

// --- template rendering -----------------------------------------------------

/// Context clause tokens, e.g. relation 0: "The {a} is in Box {e}".
std::vector<int> clause_tokens(const Vocabulary& v, int relation, int attribute,
                               int entity, bool sentence_initial);
/// Query tokens, e.g. relation 0: "Box {e} contains the". Returns the index
/// of the entity token within the query via entity_offset.
std::vector<int> query_tokens_for(const Vocabulary& v, int relation, int entity,
                                  int* entity_offset);
/// Attribute-side query, e.g. relation 0: "The {a} is in"; used to read the
/// attribute representation off the model. Returns attribute token offset.
std::vector<int> attribute_query_tokens(const Vocabulary& v, int relation,
                                        int attribute, int* attribute_offset);

// --- generators -------------------------------------------------------------

/// Base entity-tracking samples. query_oi = -1 samples the queried entity
/// uniformly; a fixed value pins it (intervention runs use 0).
std::vector<Sample> gen_base(int relation, size_t n, size_t k_pairs,
                             const Vocabulary& v, uint64_t seed, int query_oi = -1);

/// Pseudo-relation variant: clause count is preserved, with leading clauses
/// replaced by a fixed repeated pseudo pair, so query entities across the set
/// share one PI while their OIs differ.
std::vector<Sample> gen_pseudo(const std::vector<Sample>& base, const Vocabulary& v);

/// Prefix each sample with a filler phrase; lengths cycle through
/// filler_lengths. OIs are untouched, every PI shifts by the filler length.
std::vector<Sample> gen_filler(const std::vector<Sample>& base,
                               const std::vector<size_t>& filler_lengths,
                               const Vocabulary& v);

/// Insert interjections after the first clause, enough that the last
/// interjection lands beyond the original final token position.
std::vector<Sample> gen_interjection(const std::vector<Sample>& base,
                                     const Vocabulary& v);

/// Re-render every clause with a randomly chosen non-relational frame.
/// Answers are marked absent; OIs are preserved.
std::vector<Sample> gen_nonrelated(const std::vector<Sample>& base,
                                   const Vocabulary& v, uint64_t seed);

/// Multi-binding patterns: "7A-7E", "7A-3E", "7A-2E", "7A-5E".
std::vector<Sample> gen_pattern(const std::string& pattern, size_t n,
                                const Vocabulary& v, uint64_t seed);

/// Entity index per clause for a named pattern (e.g. 7A-3E -> 0,0,0,1,1,2,2).
std::vector<int> pattern_entity_map(const std::string& pattern);

// --- persistence ------------------------------------------------------------

std::string sample_to_json(const Sample& s);
Sample sample_from_json(const std::string& line);
void write_jsonl(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_jsonl(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

}  // namespace oisub
