#pragma once

#include "oisub/intervene.hpp"

namespace oisub {

/// LD = intervened - original logit of one token at the final position.
double logit_difference(const std::vector<double>& original,
                        const std::vector<double>& intervened, int token);

/// Mean/std/count of per-sample LD per (key, candidate OI) cell.
struct LdCurve {
    std::vector<int> keys;           // sorted betas (or target bis)
    std::vector<int> candidate_ois;  // sorted
    Matrix mean, stddev, count;      // |keys| x |candidate_ois|
};
LdCurve ld_curves(const std::vector<SweepRecord>& records);

/// Post-intervention answer distribution per key; the final column is the
/// "other" bucket (argmax fell outside the sample's candidates).
struct FlipTable {
    std::vector<int> keys;
    std::vector<int> candidate_ois;  // columns, then "other"
    Matrix proportions;              // |keys| x (|candidate_ois|+1), rows sum to 1
};
FlipTable logit_flip(const std::vector<SweepRecord>& records);

/// Spearman rho of each score column against OI and PI labels; result is
/// c x 2 with column 0 = OI, column 1 = PI.
Matrix correlation_report(const Matrix& scores, const std::vector<int>& oi_labels,
                          const std::vector<int>& pi_labels);

enum class DistanceMetric : uint8_t { abs_diff = 0, rank_distance = 1 };

/// |E| x |A| distances between entity and attribute points on one PC.
/// rank-distance uses fractional ranks in the pooled entity+attribute set,
/// normalized by the pool size.
struct PairDistanceMatrix {
    Matrix values;
    DistanceMetric metric = DistanceMetric::abs_diff;
    size_t pc_index = 0;
};
PairDistanceMatrix pair_distances(const Matrix& entity_coords,
                                  const Matrix& attribute_coords,
                                  DistanceMetric metric, size_t pc_index);

/// Threshold chosen by exhaustive midpoint scan maximizing dev F1 of the
/// "bound" (positive, distance <= threshold) class; baseline predicts every
/// pair positive.
struct ClassifyResult {
    double threshold = 0.0;
    double dev_f1 = 0.0;
    double test_f1 = 0.0;
    double baseline_f1 = 0.0;
};
ClassifyResult threshold_classify(const std::vector<double>& dev_distances,
                                  const std::vector<int>& dev_labels,
                                  const std::vector<double>& test_distances,
                                  const std::vector<int>& test_labels);

/// Per-PC (rho_related, rho_nonrelated) between entity and bound-attribute
/// scores of the two datasets.
std::vector<std::pair<double, double>> relatedness_compare(
    const Matrix& related_entity, const Matrix& related_attribute,
    const Matrix& nonrelated_entity, const Matrix& nonrelated_attribute);

void write_ld_curve_csv(const std::string& path, const LdCurve& c,
                        const std::string& key_name);
void write_flip_table_csv(const std::string& path, const FlipTable& t,
                          const std::string& key_name);

}  // namespace oisub
