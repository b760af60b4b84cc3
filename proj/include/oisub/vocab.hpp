#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "oisub/common.hpp"

namespace oisub {

/// Closed word-level vocabulary. Every entity and attribute is exactly one
/// token by construction; punctuation is tokenized separately.
struct Vocabulary {
    std::vector<std::string> tokens;            // id -> surface form
    std::unordered_map<std::string, int> ids;   // surface form -> id
    std::vector<int> entity_pool;               // one-token names
    std::vector<int> attribute_pool;            // one-token objects
    int bos = -1, eos = -1, pad = -1;
    int comma = -1, period = -1;

    int id(const std::string& word) const;      // throws InputError on OOV
    int size() const { return static_cast<int>(tokens.size()); }
    uint64_t hash() const;

    std::vector<int> tokenize(const std::string& text) const;
    std::string detokenize(const std::vector<int>& token_ids) const;
};

/// Deterministic vocabulary with the requested pool sizes (defaults 224
/// objects, 523 names). Pool words are synthesized from syllables; all
/// template, filler and interjection words are fixed.
Vocabulary build_vocabulary(size_t num_objects = 224, size_t num_names = 523,
                            uint64_t seed = 0);

}  // namespace oisub
