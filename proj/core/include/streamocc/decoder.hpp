#pragma once

#include "streamocc/nn_ops.hpp"
#include "streamocc/semantic_grid.hpp"
#include "streamocc/voxel_volume.hpp"
#include "streamocc/weights.hpp"

#include <string>
#include <vector>

namespace streamocc {

/// Occupancy decoder: 3D deconvolution doubles the half-resolution feature
/// volume, then a per-cell MLP produces one logit per class (channel 0 =
/// empty). Labels are the per-cell argmax; ties go to the lowest class id.
struct DecoderParams {
    Conv3dLayer deconv; // C -> C, kernel 2, stride 2
    Mlp mlp;            // C -> hidden -> n_classes + 1

    static DecoderParams make(int channels, int hidden, int n_classes);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
};

struct DecodeResult {
    VoxelVolume logits; // (n_classes + 1) x X x Y x Z
    SemanticGrid labels;
};

DecodeResult decode(const VoxelVolume& v_fin, const DecoderParams& params);

/// Argmax labeling used by decode(); exposed for forecast logits too.
SemanticGrid argmax_labels(const VoxelVolume& logits);

} // namespace streamocc
