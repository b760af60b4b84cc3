#include "oisub/vocab.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace oisub {

namespace {

// Template, filler, interjection and frame words. Order is part of the
// vocabulary contract: ids are assigned in this order, before the pools.
const char* kFixedWords[] = {
    "<bos>", "<eos>", "<pad>", ",", ".",
    "The", "the", "is", "in", "Box", "contains",
    "sold", "by", "person", "Person", "selling",
    "applied", "applies", "moved", "brought", "brings", "pushed", "pushes",
    // fillers
    "OK", "I", "will", "find", "out", "that", "see", "it", "It", "can", "be",
    "seen", "there", "There", "no", "particular", "reason",
    // interjections
    "ah", "oh", "so",
    // non-related frames
    "and", "are", "scattered", "around", "here", "somewhere", "else",
    "different", "place",
};

std::string make_word(Rng& rng, size_t min_syllables, size_t max_syllables) {
    static const char consonants[] = "bdfgklmnprstvz";
    static const char vowels[] = "aeiou";
    const size_t n_syll = min_syllables + rng.next_below(max_syllables - min_syllables + 1);
    std::string w;
    for (size_t s = 0; s < n_syll; ++s) {
        w += consonants[rng.next_below(sizeof(consonants) - 1)];
        w += vowels[rng.next_below(sizeof(vowels) - 1)];
    }
    // half the words get a closing consonant
    if (rng.next_below(2) == 0) w += consonants[rng.next_below(sizeof(consonants) - 1)];
    return w;
}

}  // namespace

int Vocabulary::id(const std::string& word) const {
    auto it = ids.find(word);
    if (it == ids.end()) throw InputError("vocabulary: unknown word '" + word + "'");
    return it->second;
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens) {
        h = fnv1a(std::string_view(t), h);
        h = fnv1a(std::string_view("\x1f", 1), h);
    }
    return h;
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
    std::vector<int> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(id(word));
            word.clear();
        }
    };
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n') {
            flush();
        } else if (c == ',' || c == '.') {
            flush();
            out.push_back(id(std::string(1, c)));
        } else {
            word += c;
        }
    }
    flush();
    return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& token_ids) const {
    std::string out;
    for (int t : token_ids) {
        if (t < 0 || t >= size()) throw InputError("detokenize: token id out of range");
        const std::string& w = tokens[t];
        const bool punct = (w == "," || w == ".");
        if (!out.empty() && !punct) out += ' ';
        out += w;
    }
    return out;
}

Vocabulary build_vocabulary(size_t num_objects, size_t num_names, uint64_t seed) {
    if (num_objects < 8 || num_names < 8)
        throw InputError("build_vocabulary: pools must have at least 8 words each");

    Vocabulary v;
    std::unordered_set<std::string> used;
    auto add = [&](const std::string& w) {
        v.ids.emplace(w, static_cast<int>(v.tokens.size()));
        v.tokens.push_back(w);
        used.insert(w);
        return static_cast<int>(v.tokens.size()) - 1;
    };

    for (const char* w : kFixedWords) add(w);
    v.bos = v.ids.at("<bos>");
    v.eos = v.ids.at("<eos>");
    v.pad = v.ids.at("<pad>");
    v.comma = v.ids.at(",");
    v.period = v.ids.at(".");

    Rng rng(seed ^ 0x766f636162ULL);
    while (v.attribute_pool.size() < num_objects) {
        std::string w = make_word(rng, 2, 3);
        if (used.count(w)) continue;
        v.attribute_pool.push_back(add(w));
    }
    while (v.entity_pool.size() < num_names) {
        std::string w = make_word(rng, 2, 3);
        w[0] = static_cast<char>(w[0] - 'a' + 'A');
        if (used.count(w)) continue;
        v.entity_pool.push_back(add(w));
    }
    return v;
}

}  // namespace oisub
