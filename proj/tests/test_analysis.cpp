#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oisub/analysis.hpp"

using namespace oisub;

namespace {

SweepRecord rec(uint64_t id, int key, std::vector<int> ois,
                std::vector<double> orig, std::vector<double> intv,
                int ans_orig = -1, int ans_intv = -1) {
    SweepRecord r;
    r.sample_id = id;
    r.key = key;
    r.candidate_oi = std::move(ois);
    r.candidate_token.assign(r.candidate_oi.size(), 0);
    r.logit_original = std::move(orig);
    r.logit_intervened = std::move(intv);
    r.answer_oi_original = ans_orig;
    r.answer_oi_intervened = ans_intv;
    return r;
}

}  // namespace

TEST_CASE("logit difference") {
    std::vector<double> a{1.0, 2.0, 3.5}, b{1.0, 2.0, 5.0};
    CHECK(logit_difference(a, a, 1) == 0.0);
    CHECK(logit_difference(a, b, 2) == doctest::Approx(1.5));
    // antisymmetric under swapping original/intervened
    CHECK(logit_difference(b, a, 2) == doctest::Approx(-1.5));
    CHECK_THROWS_AS(logit_difference(a, b, 7), InputError);
    CHECK_THROWS_AS(logit_difference(a, {1.0}, 0), InputError);
}

TEST_CASE("ld curves") {
    SUBCASE("single record: means equal raw values, std zero") {
        auto c = ld_curves({rec(1, 2, {0, 1}, {1.0, 4.0}, {1.5, 3.0})});
        REQUIRE(c.keys == std::vector<int>{2});
        REQUIRE(c.candidate_ois == std::vector<int>{0, 1});
        CHECK(c.mean.at(0, 0) == doctest::Approx(0.5));
        CHECK(c.mean.at(0, 1) == doctest::Approx(-1.0));
        CHECK(c.stddev.at(0, 0) == doctest::Approx(0.0));
        CHECK(c.count.at(0, 0) == 1.0);
    }
    SUBCASE("identical logits give an all-zero curve") {
        std::vector<SweepRecord> rs;
        for (int i = 0; i < 4; ++i)
            rs.push_back(rec(i, i % 2, {0, 1, 2}, {1, 2, 3}, {1, 2, 3}));
        auto c = ld_curves(rs);
        for (double v : c.mean.data) CHECK(v == 0.0);
    }
    SUBCASE("hand aggregation on five rows") {
        // key 1, oi 0 LDs: 1.0, 3.0 -> mean 2.0, std 1.0
        std::vector<SweepRecord> rs{
            rec(1, 1, {0}, {0.0}, {1.0}),
            rec(2, 1, {0}, {0.0}, {3.0}),
            rec(3, 1, {1}, {2.0}, {2.5}),
            rec(4, 2, {0}, {1.0}, {0.0}),
            rec(5, 2, {1}, {0.0}, {4.0}),
        };
        auto c = ld_curves(rs);
        CHECK(c.keys == std::vector<int>{1, 2});
        CHECK(c.mean.at(0, 0) == doctest::Approx(2.0));
        CHECK(c.stddev.at(0, 0) == doctest::Approx(1.0));
        CHECK(c.mean.at(0, 1) == doctest::Approx(0.5));
        CHECK(c.mean.at(1, 0) == doctest::Approx(-1.0));
        CHECK(c.mean.at(1, 1) == doctest::Approx(4.0));
        CHECK(c.count.at(1, 1) == 1.0);
    }
    CHECK_THROWS_AS(ld_curves({}), InputError);
}

TEST_CASE("logit flip proportions") {
    SUBCASE("unanimous answers concentrate at one OI") {
        std::vector<SweepRecord> rs;
        for (int i = 0; i < 6; ++i)
            rs.push_back(rec(i, 3, {0, 1, 2}, {0, 0, 0}, {0, 0, 0}, 0, 2));
        auto t = logit_flip(rs);
        REQUIRE(t.candidate_ois == std::vector<int>{0, 1, 2});
        CHECK(t.proportions.at(0, 2) == doctest::Approx(1.0));
        CHECK(t.proportions.at(0, 0) == 0.0);
        CHECK(t.proportions.at(0, 3) == 0.0);  // other bucket
    }
    SUBCASE("rows sum to one including the other bucket") {
        std::vector<SweepRecord> rs;
        for (int i = 0; i < 8; ++i)
            rs.push_back(rec(i, i % 2, {0, 1}, {0, 0}, {0, 0}, 0,
                             i % 3 == 0 ? -1 : i % 2));
        auto t = logit_flip(rs);
        for (size_t k = 0; k < t.keys.size(); ++k) {
            double s = 0.0;
            for (size_t c = 0; c < t.proportions.cols; ++c) s += t.proportions.at(k, c);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        }
        CHECK(t.proportions.at(0, 2) > 0.0);  // some "other" answers landed
    }
    SUBCASE("equal-size partition halves average to the whole") {
        std::vector<SweepRecord> all, first, second;
        for (int i = 0; i < 12; ++i) {
            auto r = rec(i, 0, {0, 1, 2}, {0, 0, 0}, {0, 0, 0}, 0, i % 3);
            all.push_back(r);
            (i < 6 ? first : second).push_back(r);
        }
        auto tw = logit_flip(all), ta = logit_flip(first), tb = logit_flip(second);
        for (size_t c = 0; c < tw.proportions.cols; ++c)
            CHECK(tw.proportions.at(0, c) ==
                  doctest::Approx(0.5 * (ta.proportions.at(0, c) +
                                         tb.proportions.at(0, c)))
                      .epsilon(1e-12));
    }
    CHECK_THROWS_AS(logit_flip({}), InputError);
}

TEST_CASE("correlation report") {
    const size_t n = 40;
    Matrix scores(n, 2);
    std::vector<int> oi(n), pi(n);
    Rng rng(5);
    for (size_t i = 0; i < n; ++i) {
        oi[i] = static_cast<int>(i % 5);
        pi[i] = static_cast<int>(rng.next_below(100));
        scores.at(i, 0) = oi[i];  // pc1 = OI exactly
        scores.at(i, 1) = rng.next_gaussian();
    }
    Matrix rep = correlation_report(scores, oi, pi);
    CHECK(rep.rows == 2);
    CHECK(rep.cols == 2);
    CHECK(rep.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    // elementwise oracle
    std::vector<double> col1(n), oid(oi.begin(), oi.end()), pid(pi.begin(), pi.end());
    for (size_t i = 0; i < n; ++i) col1[i] = scores.at(i, 1);
    CHECK(rep.at(1, 0) == doctest::Approx(linalg::spearman(col1, oid)).epsilon(1e-12));
    CHECK(rep.at(1, 1) == doctest::Approx(linalg::spearman(col1, pid)).epsilon(1e-12));

    std::vector<int> flat(n, 3);
    CHECK_THROWS_AS(correlation_report(scores, flat, pi), InputError);
    CHECK_THROWS_AS(correlation_report(scores, oi, flat), InputError);
}

TEST_CASE("pair distances") {
    Matrix ent(3, 2), att(4, 2);
    Rng rng(6);
    for (double& v : ent.data) v = rng.next_gaussian();
    for (double& v : att.data) v = rng.next_gaussian();

    SUBCASE("abs-diff matches the scalar formula, zero on identical coords") {
        att.at(1, 0) = ent.at(2, 0);
        auto d = pair_distances(ent, att, DistanceMetric::abs_diff, 0);
        CHECK(d.values.rows == 3);
        CHECK(d.values.cols == 4);
        CHECK(d.values.at(2, 1) == 0.0);
        for (size_t i = 0; i < 3; ++i)
            for (size_t j = 0; j < 4; ++j)
                CHECK(d.values.at(i, j) ==
                      doctest::Approx(std::abs(ent.at(i, 0) - att.at(j, 0))));
    }
    SUBCASE("rank distance is invariant under strictly increasing transforms") {
        auto d1 = pair_distances(ent, att, DistanceMetric::rank_distance, 1);
        Matrix ent2 = ent, att2 = att;
        auto warp = [](double x) { return std::exp(3 * x) + x; };
        for (size_t i = 0; i < ent2.rows; ++i) ent2.at(i, 1) = warp(ent.at(i, 1));
        for (size_t j = 0; j < att2.rows; ++j) att2.at(j, 1) = warp(att.at(j, 1));
        auto d2 = pair_distances(ent2, att2, DistanceMetric::rank_distance, 1);
        for (size_t i = 0; i < d1.values.data.size(); ++i)
            CHECK(d1.values.data[i] == doctest::Approx(d2.values.data[i]).epsilon(1e-12));
    }
    SUBCASE("planted bound pairs sit closer than unbound ones") {
        // entity k and attribute k share pc1 = k; off-diagonal pairs differ
        const size_t k = 6;
        Matrix e(k, 1), a(k, 1);
        for (size_t i = 0; i < k; ++i) {
            e.at(i, 0) = static_cast<double>(i) + 0.01;
            a.at(i, 0) = static_cast<double>(i) - 0.01;
        }
        for (auto metric : {DistanceMetric::abs_diff, DistanceMetric::rank_distance}) {
            auto d = pair_distances(e, a, metric, 0);
            double bound = 0.0, unbound = 0.0;
            size_t nb = 0, nu = 0;
            for (size_t i = 0; i < k; ++i)
                for (size_t j = 0; j < k; ++j)
                    if (i == j) {
                        bound += d.values.at(i, j);
                        ++nb;
                    } else {
                        unbound += d.values.at(i, j);
                        ++nu;
                    }
            CHECK(bound / nb < unbound / nu);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(pair_distances(ent, att, DistanceMetric::abs_diff, 5),
                        InputError);
        Matrix empty;
        CHECK_THROWS_AS(pair_distances(empty, att, DistanceMetric::abs_diff, 0),
                        InputError);
    }
}

TEST_CASE("threshold classification") {
    SUBCASE("perfect separation gives F1 = 1.0") {
        std::vector<double> dev{0.1, 0.2, 0.3, 5.0, 6.0, 7.0};
        std::vector<int> lab{1, 1, 1, 0, 0, 0};
        auto r = threshold_classify(dev, lab, dev, lab);
        CHECK(r.dev_f1 == doctest::Approx(1.0));
        CHECK(r.test_f1 == doctest::Approx(1.0));
        CHECK(r.threshold > 0.3);
        CHECK(r.threshold < 5.0);
    }
    SUBCASE("always-true baseline on 1 bound in 7 candidates is exactly 0.25") {
        // per sample: 7 candidate pairings, 1 bound
        std::vector<double> test;
        std::vector<int> lab;
        Rng rng(9);
        for (int s = 0; s < 30; ++s)
            for (int j = 0; j < 7; ++j) {
                test.push_back(rng.next_double());
                lab.push_back(j == 0 ? 1 : 0);
            }
        std::vector<double> dev{0.1, 0.9};
        std::vector<int> dl{1, 0};
        auto r = threshold_classify(dev, dl, test, lab);
        CHECK(std::abs(r.baseline_f1 - 0.25) < 1e-12);
    }
    SUBCASE("returned threshold maximizes dev F1 over sampled alternatives") {
        Rng rng(10);
        std::vector<double> dev;
        std::vector<int> lab;
        for (int i = 0; i < 60; ++i) {
            const bool pos = rng.next_below(3) == 0;
            dev.push_back(pos ? rng.next_double() : 0.4 + rng.next_double());
            lab.push_back(pos);
        }
        auto r = threshold_classify(dev, lab, dev, lab);
        auto f1_of = [&](double t) {
            size_t tp = 0, fp = 0, fn = 0;
            for (size_t i = 0; i < dev.size(); ++i) {
                const bool pred = dev[i] <= t;
                if (pred && lab[i]) ++tp;
                else if (pred && !lab[i]) ++fp;
                else if (!pred && lab[i]) ++fn;
            }
            return tp == 0 ? 0.0
                           : 2.0 * tp / (2.0 * tp + fp + fn);
        };
        for (double t = -0.1; t < 1.6; t += 0.013)
            CHECK(r.dev_f1 >= f1_of(t) - 1e-12);
        CHECK(r.dev_f1 == doctest::Approx(f1_of(r.threshold)).epsilon(1e-12));
    }
    SUBCASE("single-class dev split rejected") {
        CHECK_THROWS_AS(
            threshold_classify({0.1, 0.2}, {1, 1}, {0.1}, {1}), InputError);
        CHECK_THROWS_AS(threshold_classify({}, {}, {0.1}, {1}), InputError);
    }
}

TEST_CASE("relatedness comparison") {
    const size_t n = 50;
    Matrix ent(n, 2), att(n, 2);
    Rng rng(12);
    for (size_t i = 0; i < n; ++i) {
        ent.at(i, 0) = rng.next_gaussian();
        ent.at(i, 1) = rng.next_gaussian();
        att.at(i, 0) = ent.at(i, 0) + 0.1 * rng.next_gaussian();
        att.at(i, 1) = rng.next_gaussian();
    }
    SUBCASE("identical datasets give equal rho") {
        auto out = relatedness_compare(ent, att, ent, att);
        REQUIRE(out.size() == 2);
        CHECK(out[0].first == doctest::Approx(out[0].second));
        CHECK(out[1].first == doctest::Approx(out[1].second));
    }
    SUBCASE("equals direct spearman on the columns") {
        auto out = relatedness_compare(ent, att, att, ent);
        std::vector<double> e0(n), a0(n);
        for (size_t i = 0; i < n; ++i) {
            e0[i] = ent.at(i, 0);
            a0[i] = att.at(i, 0);
        }
        CHECK(out[0].first == doctest::Approx(linalg::spearman(e0, a0)).epsilon(1e-12));
    }
    SUBCASE("count mismatch rejected") {
        Matrix small(3, 2);
        CHECK_THROWS_AS(relatedness_compare(ent, small, ent, att), InputError);
    }
}

TEST_CASE("analysis csv writers") {
    auto c = ld_curves({rec(1, 0, {0, 1}, {0, 0}, {1, 2}),
                        rec(2, 1, {0, 1}, {0, 0}, {2, 1})});
    auto t = logit_flip({rec(1, 0, {0, 1}, {0, 0}, {0, 0}, 0, 1),
                         rec(2, 0, {0, 1}, {0, 0}, {0, 0}, 0, -1)});
    const auto dir = std::filesystem::temp_directory_path();
    const auto pc = dir / "ld_test.csv", pf = dir / "flip_test.csv";
    write_ld_curve_csv(pc.string(), c, "beta");
    write_flip_table_csv(pf.string(), t, "beta");
    std::string line;
    std::ifstream f1(pc);
    std::getline(f1, line);
    CHECK(line == "beta,candidate_oi,mean_ld,std_ld,n");
    std::ifstream f2(pf);
    std::getline(f2, line);
    CHECK(line == "beta,oi0,oi1,other");
    std::filesystem::remove(pc);
    std::filesystem::remove(pf);
}
