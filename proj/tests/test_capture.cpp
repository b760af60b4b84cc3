#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oisub/capture.hpp"

using namespace oisub;

namespace {

struct Fixture {
    Vocabulary vocab = build_vocabulary(16, 16, 1);
    std::vector<Sample> samples = gen_base(0, 12, 3, vocab, 5);
    Transformer model;

    Fixture() {
        ModelConfig c;
        c.d_model = 16;
        c.n_layers = 3;
        c.n_heads = 2;
        c.d_ff = 32;
        c.max_seq_len = 48;
        c.vocab_size = vocab.size();
        c.seed = 2;
        model.init(c);
    }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("entity matrix rows equal per-sample trace captures") {
    Fixture fx;
    ActivationMatrix m = build_entity_matrix(fx.model, fx.samples, 1);
    REQUIRE(m.n() == fx.samples.size());
    CHECK(m.data.cols == 16);
    CHECK(m.role == CaptureRole::entity_query);
    CHECK(m.layer == 1);
    m.validate(fx.model.config.n_layers);
    for (size_t i = 0; i < fx.samples.size(); ++i) {
        const Sample& s = fx.samples[i];
        CHECK(m.oi_labels[i] == s.query_entity_oi);
        CHECK(m.pi_labels[i] == s.query_entity_pi);
        CHECK(m.sample_refs[i] == s.sample_id);
        // independent trace oracle
        std::vector<TraceSite> tr{{1, s.query_entity_pi, StreamPoint::post_block}};
        std::vector<std::vector<float>> cap;
        fx.model.forward(s.full_tokens(), nullptr, &tr, &cap);
        for (int j = 0; j < 16; ++j)
            CHECK(m.data.at(i, j) == static_cast<double>(cap[0][j]));
    }
}

TEST_CASE("entity matrix rejects bad layers") {
    Fixture fx;
    CHECK_THROWS_AS(build_entity_matrix(fx.model, fx.samples, 3), InputError);
    CHECK_THROWS_AS(build_entity_matrix(fx.model, fx.samples, -1), InputError);
    CHECK_THROWS_AS(build_attribute_matrix(fx.model, fx.samples, fx.vocab, 7),
                    InputError);
}

TEST_CASE("attribute matrix captures the attribute mention of each pair") {
    Fixture fx;
    ActivationMatrix m = build_attribute_matrix(fx.model, fx.samples, fx.vocab, 2);
    size_t expected = 0;
    for (const auto& s : fx.samples) expected += s.pairs.size();
    REQUIRE(m.n() == expected);
    CHECK(m.role == CaptureRole::attribute_query);

    size_t r = 0;
    for (const Sample& s : fx.samples) {
        for (const EaPair& p : s.pairs) {
            CHECK(m.oi_labels[r] == p.attribute_oi);
            CHECK(m.sample_refs[r] == s.sample_id);
            // rebuild the rendering independently: context + "The {a} is in"
            int off = 0;
            auto q = attribute_query_tokens(fx.vocab, s.relation, p.attribute, &off);
            std::vector<int> toks = s.context_tokens;
            const int pos = static_cast<int>(toks.size()) + off;
            toks.insert(toks.end(), q.begin(), q.end());
            CHECK(m.pi_labels[r] == pos);
            CHECK(toks[pos] == p.attribute);
            std::vector<TraceSite> tr{{2, pos, StreamPoint::post_block}};
            std::vector<std::vector<float>> cap;
            fx.model.forward(toks, nullptr, &tr, &cap);
            for (int j = 0; j < 16; ++j)
                CHECK(m.data.at(r, j) == static_cast<double>(cap[0][j]));
            ++r;
        }
    }
}

TEST_CASE("relation-0 attribute query reads 'The {a} is in'") {
    Fixture fx;
    int off = 0;
    const int attr = fx.vocab.attribute_pool[3];
    auto q = attribute_query_tokens(fx.vocab, 0, attr, &off);
    const std::string text = fx.vocab.detokenize(q);
    CHECK(text == "The " + fx.vocab.tokens[attr] + " is in");
    CHECK(q[off] == attr);
}

TEST_CASE("layer sweep equals single-layer builds") {
    Fixture fx;
    auto sweep = layer_sweep_matrices(fx.model, fx.samples, {0, 1, 2});
    REQUIRE(sweep.size() == 3);
    for (int l = 0; l < 3; ++l) {
        ActivationMatrix single = build_entity_matrix(fx.model, fx.samples, l);
        const ActivationMatrix& m = sweep.at(l);
        CHECK(m.oi_labels == single.oi_labels);
        CHECK(m.pi_labels == single.pi_labels);
        CHECK(m.sample_refs == single.sample_refs);
        CHECK(m.data.data == single.data.data);
    }
    CHECK_THROWS_AS(layer_sweep_matrices(fx.model, fx.samples, {}), InputError);
    CHECK_THROWS_AS(layer_sweep_matrices(fx.model, fx.samples, {5}), InputError);
}

TEST_CASE("capture is bytewise reproducible and round-trips through the file") {
    Fixture fx;
    ActivationMatrix m = build_entity_matrix(fx.model, fx.samples, 0);
    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = dir / "oiam_a.bin", p2 = dir / "oiam_b.bin";
    write_activation_matrix(p1.string(), m);
    ActivationMatrix again = build_entity_matrix(fx.model, fx.samples, 0);
    write_activation_matrix(p2.string(), again);
    CHECK(slurp(p1) == slurp(p2));

    ActivationMatrix rt = read_activation_matrix(p1.string());
    CHECK(rt.data.rows == m.data.rows);
    CHECK(rt.data.cols == m.data.cols);
    CHECK(rt.oi_labels == m.oi_labels);
    CHECK(rt.pi_labels == m.pi_labels);
    CHECK(rt.sample_refs == m.sample_refs);
    CHECK(rt.layer == m.layer);
    CHECK(rt.relation == m.relation);
    CHECK(rt.role == m.role);
    // f32 storage is exact for float-captured values
    CHECK(rt.data.data == m.data.data);
    CHECK(activation_matrix_hash(rt) == activation_matrix_hash(m));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("activation file loader rejects malformed input") {
    Fixture fx;
    ActivationMatrix m = build_entity_matrix(fx.model, fx.samples, 0);
    const auto p = std::filesystem::temp_directory_path() / "oiam_bad.bin";
    write_activation_matrix(p.string(), m);
    SUBCASE("bad magic") {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.write("NOPE", 4);
        f.close();
        CHECK_THROWS_AS(read_activation_matrix(p.string()), FormatError);
    }
    SUBCASE("truncation") {
        std::filesystem::resize_file(p, std::filesystem::file_size(p) - 7);
        CHECK_THROWS_AS(read_activation_matrix(p.string()), FormatError);
    }
    SUBCASE("missing") {
        CHECK_THROWS_AS(read_activation_matrix(p.string() + ".nope"), InputError);
    }
    std::filesystem::remove(p);
}

TEST_CASE("validate enforces label consistency") {
    Fixture fx;
    ActivationMatrix m = build_entity_matrix(fx.model, fx.samples, 0);
    ActivationMatrix broken = m;
    broken.oi_labels.pop_back();
    CHECK_THROWS_AS(broken.validate(3), InputError);
    broken = m;
    broken.layer = 99;
    CHECK_THROWS_AS(broken.validate(3), InputError);
    broken = m;
    broken.data.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(broken.validate(3), InputError);
}
