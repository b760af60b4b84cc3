#include "oisub/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace oisub {

double logit_difference(const std::vector<double>& original,
                        const std::vector<double>& intervened, int token) {
    if (original.size() != intervened.size())
        throw InputError("logit_difference: vocab widths differ");
    if (token < 0 || static_cast<size_t>(token) >= original.size())
        throw InputError("logit_difference: token out of range");
    return intervened[token] - original[token];
}

namespace {

std::vector<int> sorted_unique_keys(const std::vector<SweepRecord>& records) {
    std::set<int> s;
    for (const auto& r : records) s.insert(r.key);
    return std::vector<int>(s.begin(), s.end());
}

std::vector<int> sorted_unique_ois(const std::vector<SweepRecord>& records) {
    std::set<int> s;
    for (const auto& r : records)
        for (int oi : r.candidate_oi) s.insert(oi);
    return std::vector<int>(s.begin(), s.end());
}

size_t index_of(const std::vector<int>& v, int x) {
    return static_cast<size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
}

}  // namespace

LdCurve ld_curves(const std::vector<SweepRecord>& records) {
    if (records.empty()) throw InputError("ld_curves: no records");
    LdCurve c;
    c.keys = sorted_unique_keys(records);
    c.candidate_ois = sorted_unique_ois(records);
    const size_t nk = c.keys.size(), no = c.candidate_ois.size();
    c.mean = Matrix(nk, no);
    c.stddev = Matrix(nk, no);
    c.count = Matrix(nk, no);
    Matrix sum(nk, no), sumsq(nk, no);
    for (const SweepRecord& r : records) {
        const size_t ki = index_of(c.keys, r.key);
        for (size_t i = 0; i < r.candidate_oi.size(); ++i) {
            const size_t oi = index_of(c.candidate_ois, r.candidate_oi[i]);
            const double ld = r.logit_intervened[i] - r.logit_original[i];
            sum.at(ki, oi) += ld;
            sumsq.at(ki, oi) += ld * ld;
            c.count.at(ki, oi) += 1.0;
        }
    }
    for (size_t k = 0; k < nk; ++k)
        for (size_t o = 0; o < no; ++o) {
            const double n = c.count.at(k, o);
            if (n == 0.0)
                throw InputError("ld_curves: empty (key, candidate) cell");
            const double mu = sum.at(k, o) / n;
            c.mean.at(k, o) = mu;
            const double var = std::max(0.0, sumsq.at(k, o) / n - mu * mu);
            c.stddev.at(k, o) = std::sqrt(var);
        }
    return c;
}

FlipTable logit_flip(const std::vector<SweepRecord>& records) {
    if (records.empty()) throw InputError("logit_flip: no records");
    FlipTable t;
    t.keys = sorted_unique_keys(records);
    t.candidate_ois = sorted_unique_ois(records);
    const size_t nk = t.keys.size(), no = t.candidate_ois.size();
    t.proportions = Matrix(nk, no + 1);
    std::vector<double> totals(nk, 0.0);
    for (const SweepRecord& r : records) {
        const size_t ki = index_of(t.keys, r.key);
        size_t col = no;  // "other"
        if (r.answer_oi_intervened >= 0)
            col = index_of(t.candidate_ois, r.answer_oi_intervened);
        t.proportions.at(ki, col) += 1.0;
        totals[ki] += 1.0;
    }
    for (size_t k = 0; k < nk; ++k)
        for (size_t c = 0; c <= no; ++c) t.proportions.at(k, c) /= totals[k];
    return t;
}

Matrix correlation_report(const Matrix& scores, const std::vector<int>& oi_labels,
                          const std::vector<int>& pi_labels) {
    if (oi_labels.size() != scores.rows || pi_labels.size() != scores.rows)
        throw InputError("correlation_report: label length mismatch");
    auto check_nonconstant = [](const std::vector<int>& v, const char* who) {
        for (int x : v)
            if (x != v[0]) return;
        throw InputError(std::string("correlation_report: constant ") + who +
                         " labels");
    };
    check_nonconstant(oi_labels, "OI");
    check_nonconstant(pi_labels, "PI");
    std::vector<double> oi(oi_labels.begin(), oi_labels.end());
    std::vector<double> pi(pi_labels.begin(), pi_labels.end());
    Matrix out(scores.cols, 2);
    for (size_t c = 0; c < scores.cols; ++c) {
        std::vector<double> col(scores.rows);
        for (size_t i = 0; i < scores.rows; ++i) col[i] = scores.at(i, c);
        out.at(c, 0) = linalg::spearman(col, oi);
        out.at(c, 1) = linalg::spearman(col, pi);
    }
    return out;
}

PairDistanceMatrix pair_distances(const Matrix& entity_coords,
                                  const Matrix& attribute_coords,
                                  DistanceMetric metric, size_t pc_index) {
    if (entity_coords.rows == 0 || attribute_coords.rows == 0)
        throw InputError("pair_distances: empty point set");
    if (pc_index >= entity_coords.cols || pc_index >= attribute_coords.cols)
        throw InputError("pair_distances: pc index exceeds coordinate width");
    const size_t ne = entity_coords.rows, na = attribute_coords.rows;
    PairDistanceMatrix out;
    out.metric = metric;
    out.pc_index = pc_index;
    out.values = Matrix(ne, na);
    if (metric == DistanceMetric::abs_diff) {
        for (size_t i = 0; i < ne; ++i)
            for (size_t j = 0; j < na; ++j)
                out.values.at(i, j) = std::abs(entity_coords.at(i, pc_index) -
                                               attribute_coords.at(j, pc_index));
    } else {
        std::vector<double> pooled;
        pooled.reserve(ne + na);
        for (size_t i = 0; i < ne; ++i) pooled.push_back(entity_coords.at(i, pc_index));
        for (size_t j = 0; j < na; ++j)
            pooled.push_back(attribute_coords.at(j, pc_index));
        const std::vector<double> ranks = linalg::fractional_ranks(pooled);
        const double pool = static_cast<double>(ne + na);
        for (size_t i = 0; i < ne; ++i)
            for (size_t j = 0; j < na; ++j)
                out.values.at(i, j) = std::abs(ranks[i] - ranks[ne + j]) / pool;
    }
    return out;
}

namespace {

double f1_at(const std::vector<double>& d, const std::vector<int>& labels,
             double threshold) {
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < d.size(); ++i) {
        const bool pred = d[i] <= threshold;
        if (pred && labels[i]) ++tp;
        else if (pred && !labels[i]) ++fp;
        else if (!pred && labels[i]) ++fn;
    }
    if (tp == 0) return 0.0;
    const double prec = static_cast<double>(tp) / (tp + fp);
    const double rec = static_cast<double>(tp) / (tp + fn);
    return 2.0 * prec * rec / (prec + rec);
}

}  // namespace

ClassifyResult threshold_classify(const std::vector<double>& dev_distances,
                                  const std::vector<int>& dev_labels,
                                  const std::vector<double>& test_distances,
                                  const std::vector<int>& test_labels) {
    if (dev_distances.empty() || test_distances.empty())
        throw InputError("threshold_classify: empty split");
    if (dev_distances.size() != dev_labels.size() ||
        test_distances.size() != test_labels.size())
        throw InputError("threshold_classify: label length mismatch");
    bool has_pos = false, has_neg = false;
    for (int l : dev_labels) (l ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw InputError("threshold_classify: dev split needs both classes");

    std::vector<double> sorted = dev_distances;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates;
    candidates.push_back(sorted.front() - 1.0);  // predict-none
    for (size_t i = 0; i + 1 < sorted.size(); ++i)
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    candidates.push_back(sorted.back() + 1.0);  // predict-all

    ClassifyResult r;
    r.dev_f1 = -1.0;
    for (double t : candidates) {
        const double f1 = f1_at(dev_distances, dev_labels, t);
        if (f1 > r.dev_f1) {
            r.dev_f1 = f1;
            r.threshold = t;
        }
    }
    r.test_f1 = f1_at(test_distances, test_labels, r.threshold);
    size_t pos = 0;
    for (int l : test_labels)
        if (l) ++pos;
    const double p = static_cast<double>(pos) / test_labels.size();
    r.baseline_f1 = pos == 0 ? 0.0 : 2.0 * p / (1.0 + p);
    return r;
}

std::vector<std::pair<double, double>> relatedness_compare(
    const Matrix& related_entity, const Matrix& related_attribute,
    const Matrix& nonrelated_entity, const Matrix& nonrelated_attribute) {
    if (related_entity.rows != related_attribute.rows ||
        nonrelated_entity.rows != nonrelated_attribute.rows)
        throw InputError("relatedness_compare: unmatched sample counts");
    if (related_entity.cols != nonrelated_entity.cols ||
        related_attribute.cols != related_entity.cols ||
        nonrelated_attribute.cols != nonrelated_entity.cols)
        throw InputError("relatedness_compare: coordinate widths differ");
    auto column = [](const Matrix& m, size_t c) {
        std::vector<double> v(m.rows);
        for (size_t i = 0; i < m.rows; ++i) v[i] = m.at(i, c);
        return v;
    };
    std::vector<std::pair<double, double>> out;
    for (size_t c = 0; c < related_entity.cols; ++c) {
        const double rho_rel = linalg::spearman(column(related_entity, c),
                                                column(related_attribute, c));
        const double rho_non = linalg::spearman(column(nonrelated_entity, c),
                                                column(nonrelated_attribute, c));
        out.emplace_back(rho_rel, rho_non);
    }
    return out;
}

void write_ld_curve_csv(const std::string& path, const LdCurve& c,
                        const std::string& key_name) {
    std::ostringstream os;
    os << key_name << ",candidate_oi,mean_ld,std_ld,n\n";
    os.precision(17);
    for (size_t k = 0; k < c.keys.size(); ++k)
        for (size_t o = 0; o < c.candidate_ois.size(); ++o)
            os << c.keys[k] << ',' << c.candidate_ois[o] << ',' << c.mean.at(k, o)
               << ',' << c.stddev.at(k, o) << ','
               << static_cast<long long>(c.count.at(k, o)) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("ld curve csv: cannot open '" + path + "' for writing");
    f << os.str();
}

void write_flip_table_csv(const std::string& path, const FlipTable& t,
                          const std::string& key_name) {
    std::ostringstream os;
    os << key_name;
    for (int oi : t.candidate_ois) os << ",oi" << oi;
    os << ",other\n";
    os.precision(17);
    for (size_t k = 0; k < t.keys.size(); ++k) {
        os << t.keys[k];
        for (size_t c = 0; c < t.proportions.cols; ++c) os << ',' << t.proportions.at(k, c);
        os << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("flip table csv: cannot open '" + path + "' for writing");
    f << os.str();
}

}  // namespace oisub
