#pragma once

#include <map>

#include "oisub/datagen.hpp"
#include "oisub/matrix.hpp"
#include "oisub/model.hpp"

namespace oisub {

enum class CaptureRole : uint8_t { entity_query = 0, attribute_query = 1 };

/// Labeled residual-stream activation matrix: one row per captured token,
/// with the provenance needed to fit and evaluate subspaces downstream.
struct ActivationMatrix {
    Matrix data;  // n x d
    std::vector<int> oi_labels;
    std::vector<int> pi_labels;
    CaptureRole role = CaptureRole::entity_query;
    int layer = 0;
    int relation = 0;
    std::vector<uint64_t> sample_refs;

    size_t n() const { return data.rows; }
    void validate(int n_layers) const;
};

/// Row i: residual-stream state at the query-entity token of sample i.
ActivationMatrix build_entity_matrix(const Transformer& model,
                                     const std::vector<Sample>& samples, int layer,
                                     StreamPoint point = StreamPoint::post_block);

/// One row per (sample, pair): the state at the attribute mention of an
/// attribute-query rendering ("context + 'The coffee is in'" style) appended
/// after the full context. sample_refs repeats the sample id across its pairs.
ActivationMatrix build_attribute_matrix(const Transformer& model,
                                        const std::vector<Sample>& samples,
                                        const Vocabulary& vocab, int layer,
                                        StreamPoint point = StreamPoint::post_block);

/// Entity matrices for several layers with a single forward pass per sample.
std::map<int, ActivationMatrix> layer_sweep_matrices(
    const Transformer& model, const std::vector<Sample>& samples,
    const std::vector<int>& layers, StreamPoint point = StreamPoint::post_block);

/// Binary container (magic "OIAM"): data persisted as little-endian f32 so
/// analysis can run without the model.
void write_activation_matrix(const std::string& path, const ActivationMatrix& m);
ActivationMatrix read_activation_matrix(const std::string& path);

uint64_t activation_matrix_hash(const ActivationMatrix& m);

}  // namespace oisub
