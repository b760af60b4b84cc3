#include "oisub/datagen.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace oisub {

namespace {

using nlohmann::json;

const char* kVerb[kNumRelations] = {nullptr, "sold", "applied", "moved", "brought", "pushed"};
const char* kQueryVerb[kNumRelations] = {nullptr, nullptr, "applies", "moved", "brings", "pushes"};

int entity_prefix_id(const Vocabulary& v, int relation, bool capitalized) {
    if (relation == 0) return v.id("Box");
    return v.id(capitalized ? "Person" : "person");
}

}  // namespace

std::vector<int> clause_tokens(const Vocabulary& v, int relation, int attribute,
                               int entity, bool sentence_initial) {
    if (relation < 0 || relation >= kNumRelations)
        throw InputError("clause_tokens: relation out of range");
    std::vector<int> t;
    t.push_back(v.id(sentence_initial ? "The" : "the"));
    t.push_back(attribute);
    t.push_back(v.id("is"));
    if (relation == 0) {
        t.push_back(v.id("in"));
        t.push_back(v.id("Box"));
    } else {
        t.push_back(v.id(kVerb[relation]));
        t.push_back(v.id("by"));
        t.push_back(v.id("person"));
    }
    t.push_back(entity);
    return t;
}

std::vector<int> query_tokens_for(const Vocabulary& v, int relation, int entity,
                                  int* entity_offset) {
    if (relation < 0 || relation >= kNumRelations)
        throw InputError("query_tokens_for: relation out of range");
    std::vector<int> t;
    t.push_back(entity_prefix_id(v, relation, true));
    t.push_back(entity);
    if (entity_offset) *entity_offset = 1;
    if (relation == 0) {
        t.push_back(v.id("contains"));
    } else if (relation == 1) {
        t.push_back(v.id("is"));
        t.push_back(v.id("selling"));
    } else {
        t.push_back(v.id(kQueryVerb[relation]));
    }
    t.push_back(v.id("the"));
    return t;
}

std::vector<int> attribute_query_tokens(const Vocabulary& v, int relation,
                                        int attribute, int* attribute_offset) {
    // the declarative clause truncated just before the entity mention
    std::vector<int> t = clause_tokens(v, relation, attribute, attribute, true);
    t.pop_back();               // entity token
    if (relation == 0) t.pop_back();  // "Box"
    else t.pop_back();          // "person"
    if (attribute_offset) *attribute_offset = 1;
    return t;
}

namespace {

// Assemble a sample from per-clause (attribute, entity) pairs; computes PIs
// and OIs from the stream itself.
Sample assemble(const Vocabulary& v, int relation,
                const std::vector<std::pair<int, int>>& clauses,  // (attr, entity)
                int query_clause, uint64_t seed, uint64_t sample_id) {
    Sample s;
    s.relation = relation;
    s.seed = seed;
    s.sample_id = sample_id;

    std::vector<int> entity_order;  // distinct entities, first-occurrence order
    std::vector<int> attr_order;
    auto oi_of = [](std::vector<int>& order, int id) {
        for (size_t i = 0; i < order.size(); ++i)
            if (order[i] == id) return static_cast<int>(i);
        order.push_back(id);
        return static_cast<int>(order.size()) - 1;
    };

    for (size_t ci = 0; ci < clauses.size(); ++ci) {
        auto [a, e] = clauses[ci];
        std::vector<int> ct = clause_tokens(v, relation, a, e, ci == 0);
        EaPair p;
        p.entity = e;
        p.attribute = a;
        p.attribute_pi = static_cast<int>(s.context_tokens.size()) + 1;
        p.entity_pi = static_cast<int>(s.context_tokens.size() + ct.size()) - 1;
        p.entity_oi = oi_of(entity_order, e);
        p.attribute_oi = oi_of(attr_order, a);
        s.pairs.push_back(p);
        s.context_tokens.insert(s.context_tokens.end(), ct.begin(), ct.end());
        s.context_tokens.push_back(ci + 1 == clauses.size() ? v.period : v.comma);
    }

    const EaPair& qp = s.pairs[query_clause];
    int entity_offset = 0;
    s.query_tokens = query_tokens_for(v, relation, qp.entity, &entity_offset);
    s.query_entity_oi = qp.entity_oi;
    s.query_entity_pi = static_cast<int>(s.context_tokens.size()) + entity_offset;
    s.answer_token = qp.attribute;
    return s;
}

}  // namespace

std::vector<Sample> gen_base(int relation, size_t n, size_t k_pairs,
                             const Vocabulary& v, uint64_t seed, int query_oi) {
    if (relation < 0 || relation >= kNumRelations)
        throw InputError("gen_base: relation out of range");
    if (k_pairs < 2) throw InputError("gen_base: k_pairs must be >= 2");
    // pool slot 0 is reserved for the pseudo-relation pair
    if (k_pairs + 1 > v.attribute_pool.size() || k_pairs + 1 > v.entity_pool.size())
        throw InputError("gen_base: k_pairs exceeds pool size");
    if (query_oi >= static_cast<int>(k_pairs))
        throw InputError("gen_base: query_oi out of range");

    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        auto ai = rng.sample_without_replacement(v.attribute_pool.size() - 1, k_pairs);
        auto ei = rng.sample_without_replacement(v.entity_pool.size() - 1, k_pairs);
        std::vector<std::pair<int, int>> clauses(k_pairs);
        for (size_t k = 0; k < k_pairs; ++k)
            clauses[k] = {v.attribute_pool[ai[k] + 1], v.entity_pool[ei[k] + 1]};
        const int qc = query_oi >= 0 ? query_oi
                                     : static_cast<int>(rng.next_below(k_pairs));
        out.push_back(assemble(v, relation, clauses, qc, seed, i));
    }
    return out;
}

std::vector<Sample> gen_pseudo(const std::vector<Sample>& base, const Vocabulary& v) {
    if (base.empty()) throw InputError("gen_pseudo: empty base set");
    const int pseudo_attr = v.attribute_pool.at(0);
    const int pseudo_entity = v.entity_pool.at(0);
    std::vector<Sample> out;
    out.reserve(base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        const Sample& b = base[i];
        const size_t k = b.pairs.size();
        if (k < 2) throw InputError("gen_pseudo: samples need at least 2 pairs");
        const size_t kept = 1 + i % (k - 1);  // real pairs retained
        std::vector<std::pair<int, int>> clauses;
        for (size_t c = 0; c < k - kept; ++c)
            clauses.emplace_back(pseudo_attr, pseudo_entity);
        for (size_t c = 0; c < kept; ++c)
            clauses.emplace_back(b.pairs[c].attribute, b.pairs[c].entity);
        Sample s = assemble(v, b.relation, clauses, static_cast<int>(k - 1),
                            b.seed, b.sample_id);
        s.variant = "pseudo";
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

std::vector<int> filler_tokens(const Vocabulary& v, size_t len) {
    static const std::vector<std::vector<const char*>> table = {
        {},
        {"OK"},
        {"I", "see"},
        {"I", "see", "that"},
        {"I", "will", "find", "out"},
        {"I", "will", "find", "out", "that"},
    };
    std::vector<int> out;
    size_t extra = 0;
    if (len > 5) {
        extra = len - 5;
        len = 5;
    }
    for (size_t i = 0; i < extra; ++i) out.push_back(v.id("OK"));
    for (const char* w : table[len]) out.push_back(v.id(w));
    return out;
}

void shift_pis(Sample& s, int from, int by) {
    for (auto& p : s.pairs) {
        if (p.entity_pi >= from) p.entity_pi += by;
        if (p.attribute_pi >= from) p.attribute_pi += by;
    }
    if (s.query_entity_pi >= from) s.query_entity_pi += by;
}

}  // namespace

std::vector<Sample> gen_filler(const std::vector<Sample>& base,
                               const std::vector<size_t>& filler_lengths,
                               const Vocabulary& v) {
    if (base.empty()) throw InputError("gen_filler: empty base set");
    if (filler_lengths.empty()) throw InputError("gen_filler: no filler lengths");
    std::vector<Sample> out;
    out.reserve(base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        Sample s = base[i];
        const size_t len = filler_lengths[i % filler_lengths.size()];
        if (len > 0) {
            if (s.context_tokens.at(0) == v.id("The"))
                s.context_tokens[0] = v.id("the");
            std::vector<int> f = filler_tokens(v, len);
            s.context_tokens.insert(s.context_tokens.begin(), f.begin(), f.end());
            shift_pis(s, 0, static_cast<int>(len));
        }
        s.variant = "filler:" + std::to_string(len);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> gen_interjection(const std::vector<Sample>& base,
                                     const Vocabulary& v) {
    if (base.empty()) throw InputError("gen_interjection: empty base set");
    const int ah = v.id("ah");
    std::vector<Sample> out;
    out.reserve(base.size());
    for (const Sample& b : base) {
        if (b.pairs.size() < 2)
            throw InputError("gen_interjection: samples need at least 2 pairs");
        Sample s = b;
        // insertion point: right after the comma that closes the first clause
        const int q = b.pairs[0].entity_pi + 2;
        const int total = static_cast<int>(b.context_tokens.size() + b.query_tokens.size());
        // smallest m with last "ah" (at q + 2m - 2) beyond the original last token
        const int m = (total - q + 3) / 2;
        std::vector<int> ins;
        ins.reserve(2 * m);
        for (int i = 0; i < m; ++i) {
            ins.push_back(ah);
            ins.push_back(v.comma);
        }
        s.context_tokens.insert(s.context_tokens.begin() + q, ins.begin(), ins.end());
        shift_pis(s, q, 2 * m);
        s.variant = "interjection:" + std::to_string(2 * m);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> gen_nonrelated(const std::vector<Sample>& base,
                                   const Vocabulary& v, uint64_t seed) {
    if (base.empty()) throw InputError("gen_nonrelated: empty base set");
    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(base.size());
    for (const Sample& b : base) {
        Sample s;
        s.relation = b.relation;
        s.seed = b.seed;
        s.sample_id = b.sample_id;
        s.variant = "nonrelated";
        s.query_entity_oi = b.query_entity_oi;

        for (size_t ci = 0; ci < b.pairs.size(); ++ci) {
            const int a = b.pairs[ci].attribute;
            const int e = b.pairs[ci].entity;
            const int pre = entity_prefix_id(v, b.relation, false);
            const bool first = ci == 0;
            const int frame = static_cast<int>(rng.next_below(4));
            std::vector<int> t;
            int a_off = 0, e_off = 0;
            switch (frame) {
                case 0:  // "I see {a}, somewhere else there is Box {e}"
                    t = {v.id("I"), v.id("see"), a, v.comma, v.id("somewhere"),
                         v.id("else"), v.id("there"), v.id("is"), pre, e};
                    a_off = 2;
                    e_off = 9;
                    break;
                case 1:  // "the {a} and Box {e} are scattered around"
                    t = {v.id(first ? "The" : "the"), a, v.id("and"), pre, e,
                         v.id("are"), v.id("scattered"), v.id("around")};
                    a_off = 1;
                    e_off = 4;
                    break;
                case 2:  // "the {a} is here and Box {e} is there"
                    t = {v.id(first ? "The" : "the"), a, v.id("is"), v.id("here"),
                         v.id("and"), pre, e, v.id("is"), v.id("there")};
                    a_off = 1;
                    e_off = 6;
                    break;
                default:  // "the {a} and Box {e} are in different place"
                    t = {v.id(first ? "The" : "the"), a, v.id("and"), pre, e,
                         v.id("are"), v.id("in"), v.id("different"), v.id("place")};
                    a_off = 1;
                    e_off = 4;
                    break;
            }
            EaPair p = b.pairs[ci];
            p.attribute_pi = static_cast<int>(s.context_tokens.size()) + a_off;
            p.entity_pi = static_cast<int>(s.context_tokens.size()) + e_off;
            s.pairs.push_back(p);
            s.context_tokens.insert(s.context_tokens.end(), t.begin(), t.end());
            s.context_tokens.push_back(ci + 1 == b.pairs.size() ? v.period : v.comma);
        }

        // query the same entity as the base sample
        int entity_offset = 0;
        int qe = -1;
        for (const auto& p : s.pairs)
            if (p.entity_oi == b.query_entity_oi) {
                qe = p.entity;
                break;
            }
        s.query_tokens = query_tokens_for(v, b.relation, qe, &entity_offset);
        s.query_entity_pi = static_cast<int>(s.context_tokens.size()) + entity_offset;
        s.answer_token = -1;  // no binding, no answer
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<int> pattern_entity_map(const std::string& pattern) {
    if (pattern == "7A-7E") return {0, 1, 2, 3, 4, 5, 6};
    if (pattern == "7A-3E") return {0, 0, 0, 1, 1, 2, 2};
    if (pattern == "7A-2E") return {0, 0, 0, 1, 1, 1, 1};
    if (pattern == "7A-5E") return {0, 0, 0, 1, 2, 3, 4};
    throw InputError("gen_pattern: unknown pattern '" + pattern + "'");
}

std::vector<Sample> gen_pattern(const std::string& pattern, size_t n,
                                const Vocabulary& v, uint64_t seed) {
    const std::vector<int> emap = pattern_entity_map(pattern);
    const size_t k = emap.size();
    const size_t n_entities = static_cast<size_t>(*std::max_element(emap.begin(), emap.end())) + 1;

    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        auto ai = rng.sample_without_replacement(v.attribute_pool.size() - 1, k);
        auto ei = rng.sample_without_replacement(v.entity_pool.size() - 1, n_entities);
        std::vector<std::pair<int, int>> clauses(k);
        for (size_t c = 0; c < k; ++c)
            clauses[c] = {v.attribute_pool[ai[c] + 1], v.entity_pool[ei[emap[c]] + 1]};
        // query a uniformly chosen distinct entity; the bound attribute is the
        // first one stated for it
        const int qe_oi = static_cast<int>(rng.next_below(n_entities));
        int query_clause = 0;
        for (size_t c = 0; c < k; ++c)
            if (emap[c] == qe_oi) {
                query_clause = static_cast<int>(c);
                break;
            }
        Sample s = assemble(v, 0, clauses, query_clause, seed, i);
        s.variant = "pattern:" + pattern;
        out.push_back(std::move(s));
    }
    return out;
}

// --- persistence ------------------------------------------------------------

std::string sample_to_json(const Sample& s) {
    json j;
    j["context_tokens"] = s.context_tokens;
    j["query_tokens"] = s.query_tokens;
    j["answer_token"] = s.answer_token;
    j["relation"] = s.relation;
    j["query_entity_oi"] = s.query_entity_oi;
    j["query_entity_pi"] = s.query_entity_pi;
    j["variant"] = s.variant;
    j["seed"] = s.seed;
    j["sample_id"] = s.sample_id;
    json pairs = json::array();
    for (const auto& p : s.pairs)
        pairs.push_back({{"entity", p.entity},
                         {"attribute", p.attribute},
                         {"entity_oi", p.entity_oi},
                         {"attribute_oi", p.attribute_oi},
                         {"entity_pi", p.entity_pi},
                         {"attribute_pi", p.attribute_pi}});
    j["pairs"] = std::move(pairs);
    return j.dump();
}

Sample sample_from_json(const std::string& line) {
    json j = json::parse(line);
    Sample s;
    s.context_tokens = j.at("context_tokens").get<std::vector<int>>();
    s.query_tokens = j.at("query_tokens").get<std::vector<int>>();
    s.answer_token = j.at("answer_token").get<int>();
    s.relation = j.at("relation").get<int>();
    s.query_entity_oi = j.at("query_entity_oi").get<int>();
    s.query_entity_pi = j.at("query_entity_pi").get<int>();
    s.variant = j.at("variant").get<std::string>();
    s.seed = j.at("seed").get<uint64_t>();
    s.sample_id = j.at("sample_id").get<uint64_t>();
    for (const auto& pj : j.at("pairs")) {
        EaPair p;
        p.entity = pj.at("entity").get<int>();
        p.attribute = pj.at("attribute").get<int>();
        p.entity_oi = pj.at("entity_oi").get<int>();
        p.attribute_oi = pj.at("attribute_oi").get<int>();
        p.entity_pi = pj.at("entity_pi").get<int>();
        p.attribute_pi = pj.at("attribute_pi").get<int>();
        s.pairs.push_back(p);
    }
    return s;
}

void write_jsonl(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream f(path);
    if (!f) throw InputError("write_jsonl: cannot open " + path);
    for (const auto& s : samples) f << sample_to_json(s) << '\n';
}

std::vector<Sample> read_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("read_jsonl: cannot open " + path);
    std::vector<Sample> out;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) out.push_back(sample_from_json(line));
    return out;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    json j;
    j["relation"] = m.relation;
    j["variant"] = m.variant;
    j["n"] = m.n;
    j["k_pairs"] = m.k_pairs;
    j["seed"] = m.seed;
    j["split"] = {{"train", m.train_frac}, {"dev", m.dev_frac}, {"test", m.test_frac}};
    j["vocab_hash"] = m.vocab_hash;
    std::ofstream f(path);
    if (!f) throw InputError("write_manifest: cannot open " + path);
    f << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("read_manifest: cannot open " + path);
    json j = json::parse(f);
    DatasetManifest m;
    m.relation = j.at("relation").get<int>();
    m.variant = j.at("variant").get<std::string>();
    m.n = j.at("n").get<size_t>();
    m.k_pairs = j.at("k_pairs").get<size_t>();
    m.seed = j.at("seed").get<uint64_t>();
    m.train_frac = j.at("split").at("train").get<double>();
    m.dev_frac = j.at("split").at("dev").get<double>();
    m.test_frac = j.at("split").at("test").get<double>();
    m.vocab_hash = j.at("vocab_hash").get<uint64_t>();
    return m;
}

}  // namespace oisub
