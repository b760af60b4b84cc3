#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oisub/subspace.hpp"

using namespace oisub;

namespace {

std::vector<double> unit_vector(size_t d, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> u(d);
    for (double& v : u) v = rng.next_gaussian();
    const double n = norm2(u.data(), d);
    for (double& v : u) v /= n;
    return u;
}

// x_i = OI_i * u + eps, ||eps|| <= noise. OI cycles 0..k-1.
ActivationMatrix planted_matrix(size_t n, size_t d, int k, double noise,
                                uint64_t seed, const std::vector<double>* dir = nullptr) {
    Rng rng(seed * 7919 + 13);
    std::vector<double> u = dir ? *dir : unit_vector(d, seed ^ 0xabc);
    ActivationMatrix m;
    m.data = Matrix(n, d);
    for (size_t i = 0; i < n; ++i) {
        const int oi = static_cast<int>(i % k);
        std::vector<double> eps(d);
        for (double& v : eps) v = rng.next_gaussian();
        double en = norm2(eps.data(), d);
        const double target = noise * rng.next_double();
        for (size_t j = 0; j < d; ++j)
            m.data.at(i, j) = oi * u[j] + eps[j] / en * target;
        m.oi_labels.push_back(oi);
        m.pi_labels.push_back(static_cast<int>(2 * i + 5));
        m.sample_refs.push_back(i);
    }
    return m;
}

double cosine(const double* a, const std::vector<double>& b) {
    return dot(a, b.data(), b.size()) /
           (norm2(a, b.size()) * norm2(b.data(), b.size()));
}

std::vector<double> as_double(const std::vector<int>& v) {
    return std::vector<double>(v.begin(), v.end());
}

}  // namespace

TEST_CASE("planted direction is recovered with correct orientation") {
    // distinct OI per point: tied labels cap spearman at sqrt(1-(s/n)^2)
    const size_t d = 16, n = 200;
    std::vector<double> u = unit_vector(d, 3);
    ActivationMatrix m = planted_matrix(n, d, static_cast<int>(n), 0.05, 1, &u);
    Subspace s = orient(fit_oi_subspace(m, 2), m);
    s.validate();
    CHECK(cosine(s.basis.row(0), u) >= 0.99);  // signed: orient fixed the sign
    std::vector<double> scores = pc_scores(s, m.data, 0);
    CHECK(linalg::spearman(scores, as_double(m.oi_labels)) >= 0.999);
}

TEST_CASE("fit preconditions") {
    ActivationMatrix m = planted_matrix(10, 8, 5, 0.01, 2);
    CHECK_THROWS_AS(fit_oi_subspace(m, 0), InputError);
    CHECK_THROWS_AS(fit_oi_subspace(m, 10), InputError);
    ActivationMatrix tiny = planted_matrix(2, 8, 2, 0.01, 2);
    CHECK_THROWS_AS(fit_oi_subspace(tiny, 1), InputError);

    ActivationMatrix flat;
    flat.data = Matrix(5, 4);
    for (size_t i = 0; i < 5; ++i)
        for (size_t j = 0; j < 4; ++j) flat.data.at(i, j) = 1.5;
    flat.oi_labels = {0, 1, 2, 3, 4};
    flat.pi_labels = {0, 0, 0, 0, 0};
    flat.sample_refs = {0, 1, 2, 3, 4};
    CHECK_THROWS_AS(fit_oi_subspace(flat, 1), NumericError);
}

TEST_CASE("orient flips the sign when and only when needed") {
    ActivationMatrix m = planted_matrix(120, 12, 6, 0.03, 4);
    Subspace s = fit_oi_subspace(m, 2);
    std::vector<double> before = pc_scores(s, m.data, 0);
    const double rho_before = linalg::spearman(before, as_double(m.oi_labels));

    Subspace o = orient(s, m);
    std::vector<double> after = pc_scores(o, m.data, 0);
    const double rho_after = linalg::spearman(after, as_double(m.oi_labels));
    CHECK(rho_after == doctest::Approx(std::abs(rho_before)).epsilon(1e-12));
    if (rho_before >= 0) CHECK(o.basis.data == s.basis.data);

    // force a negated first row; orient must restore it
    Subspace neg = o;
    for (size_t j = 0; j < neg.d(); ++j) neg.basis.at(0, j) = -neg.basis.at(0, j);
    Subspace fixed = orient(neg, m);
    for (size_t j = 0; j < fixed.d(); ++j)
        CHECK(fixed.basis.at(0, j) == doctest::Approx(o.basis.at(0, j)).epsilon(1e-12));

    ActivationMatrix constant = m;
    for (int& v : constant.oi_labels) v = 3;
    CHECK_THROWS_AS(orient(s, constant), InputError);
}

TEST_CASE("projection semantics") {
    ActivationMatrix m = planted_matrix(60, 10, 5, 0.02, 6);
    Subspace s = orient(fit_oi_subspace(m, 2), m);

    std::vector<double> at_mean = project(s, s.mean);
    for (double v : at_mean) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> shifted = s.mean;
    for (size_t j = 0; j < s.d(); ++j) shifted[j] += s.basis.at(0, j);
    std::vector<double> coords = project(s, shifted);
    CHECK(coords[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(coords[1] == doctest::Approx(0.0).epsilon(1e-9));

    // brute-force oracle on a random point
    Rng rng(8);
    std::vector<double> x(s.d());
    for (double& v : x) v = rng.next_gaussian();
    std::vector<double> p = project(s, x);
    for (size_t i = 0; i < s.c(); ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < s.d(); ++j)
            acc += s.basis.at(i, j) * (x[j] - s.mean[j]);
        CHECK(p[i] == doctest::Approx(acc).epsilon(1e-12));
    }
    std::vector<double> pu = project_uncentered(s, x.data(), x.size());
    for (size_t i = 0; i < s.c(); ++i)
        CHECK(pu[i] == doctest::Approx(dot(s.basis.row(i), x.data(), x.size()))
                           .epsilon(1e-12));

    CHECK_THROWS_AS(project(s, x.data(), 3), InputError);
}

TEST_CASE("pc1 variance dominates pc2 variance") {
    ActivationMatrix m = planted_matrix(100, 14, 7, 0.4, 9);
    Subspace s = orient(fit_oi_subspace(m, 2), m);
    auto var = [](const std::vector<double>& v) {
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= v.size();
        double acc = 0.0;
        for (double x : v) acc += (x - mu) * (x - mu);
        return acc / v.size();
    };
    CHECK(var(pc_scores(s, m.data, 0)) >= var(pc_scores(s, m.data, 1)));
    CHECK(s.explained_ratio[0] >= s.explained_ratio[1]);
}

TEST_CASE("projection tables: per-layer fit, OI group means increase") {
    std::map<int, ActivationMatrix> per_layer;
    for (int l = 0; l < 3; ++l) {
        ActivationMatrix m = planted_matrix(140, 12, 7, 0.05, 20 + l);
        m.layer = l;
        per_layer.emplace(l, std::move(m));
    }
    auto tables = projection_tables(per_layer, 2);
    REQUIRE(tables.size() == 3);
    for (const auto& [layer, t] : tables) {
        CHECK(t.layer == layer);
        CHECK(t.pc1.size() == 140);
        std::vector<double> mean_by_oi(7, 0.0);
        std::vector<int> count(7, 0);
        for (size_t i = 0; i < t.pc1.size(); ++i) {
            mean_by_oi[t.oi[i]] += t.pc1[i];
            ++count[t.oi[i]];
        }
        for (int k = 0; k < 7; ++k) mean_by_oi[k] /= count[k];
        for (int k = 1; k < 7; ++k) CHECK(mean_by_oi[k] > mean_by_oi[k - 1]);
    }
}

TEST_CASE("best layer is the one carrying the planted signal") {
    std::map<int, ActivationMatrix> per_layer;
    Rng rng(31);
    for (int l = 0; l < 4; ++l) {
        ActivationMatrix m;
        if (l == 2) {
            m = planted_matrix(120, 10, 6, 0.05, 44);
        } else {
            // pure noise, labels kept
            m = planted_matrix(120, 10, 6, 0.05, 50 + l);
            for (double& v : m.data.data) v = rng.next_gaussian();
        }
        m.layer = l;
        per_layer.emplace(l, std::move(m));
    }
    auto [layer, rho] = best_layer(per_layer, 2);
    CHECK(layer == 2);
    CHECK(rho > 0.95);
}

TEST_CASE("pls first direction agrees with pc1 on planted data") {
    ActivationMatrix m = planted_matrix(160, 12, 7, 0.05, 71);
    Subspace pca_s = orient(fit_oi_subspace(m, 2, SubspaceMethod::pca), m);
    Subspace pls_s = fit_oi_subspace(m, 2, SubspaceMethod::pls);
    const double c =
        std::abs(dot(pca_s.basis.row(0), pls_s.basis.row(0), pca_s.d()));
    CHECK(c >= 0.95);
}

TEST_CASE("ica fit produces a valid oriented subspace on planted data") {
    ActivationMatrix m = planted_matrix(400, 8, 7, 0.3, 77);
    Subspace s = orient(fit_oi_subspace(m, 2, SubspaceMethod::ica, 5), m);
    s.validate();
    std::vector<double> scores = pc_scores(s, m.data, 0);
    CHECK(linalg::spearman(scores, as_double(m.oi_labels)) >= 0.0);
}

TEST_CASE("subspace file round-trip and corruption handling") {
    ActivationMatrix m = planted_matrix(80, 9, 5, 0.05, 81);
    m.layer = 4;
    m.relation = 2;
    Subspace s = orient(fit_oi_subspace(m, 2), m);
    const auto p = std::filesystem::temp_directory_path() / "oiss_test.bin";
    write_subspace(p.string(), s);
    Subspace rt = read_subspace(p.string());
    CHECK(rt.basis.data == s.basis.data);
    CHECK(rt.mean == s.mean);
    CHECK(rt.explained_ratio == s.explained_ratio);
    CHECK(rt.method == s.method);
    CHECK(rt.layer == 4);
    CHECK(rt.relation == 2);
    rt.validate();

    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.write("QQQQ", 4);
    f.close();
    CHECK_THROWS_AS(read_subspace(p.string()), FormatError);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(read_subspace(p.string()), InputError);
}

TEST_CASE("projection csv has the documented header and one line per point") {
    ActivationMatrix m = planted_matrix(25, 6, 5, 0.05, 90);
    auto tables = projection_tables({{0, m}}, 2);
    const auto p = std::filesystem::temp_directory_path() / "proj_test.csv";
    write_projection_csv(p.string(), tables.at(0));
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    CHECK(line == "pc1,pc2,oi,pi,sample_id");
    size_t rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 25);
    std::filesystem::remove(p);
}
