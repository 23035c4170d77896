#pragma once

#include "streamocc/geometry.hpp"
#include "streamocc/instance_query.hpp"
#include "streamocc/nn_ops.hpp"
#include "streamocc/voxel_volume.hpp"
#include "streamocc/weights.hpp"

#include <vector>

namespace streamocc {

/// Recurrence payload carried between frames: the previous final volume (at
/// half resolution), the pose it was computed in, and the queries that
/// survived selection.
struct StreamState {
    VoxelVolume prev_volume;
    EgoPose prev_pose;
    std::vector<InstanceQuery> prev_queries;
    int timestep = -1;

    /// State before the first frame; step() treats it as a zero history.
    static StreamState cold_start() { return {}; }
    bool is_cold() const { return prev_volume.empty(); }
};

/// Lightweight 3D feature pyramid: two stride-2 convolutions produce half and
/// quarter scale volumes; all three scales are trilinearly resampled to half
/// dims, concatenated and mixed down to `out_channels` by a 1x1x1 convolution.
struct Fpn3dParams {
    Conv3dLayer conv1;    // c_init -> c1, kernel 3, stride 2, pad 1
    Conv3dLayer conv2;    // c1 -> c2, kernel 3, stride 2, pad 1
    Conv3dLayer compress; // (c_init + c1 + c2) -> out, 1x1x1

    static Fpn3dParams make(int c_init, int c1, int c2, int out_channels);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
};

VoxelVolume fpn3d(const VoxelVolume& v_init, const Fpn3dParams& params);

/// Bottleneck refiner with sequential channel/spatial attention.
struct RefineNetParams {
    Conv3dLayer squeeze;      // C -> C/4, 1x1x1
    Conv3dLayer body;         // C/4 -> C/4, kernel 3, pad 1
    Conv3dLayer expand;       // C/4 -> C, 1x1x1
    LinearLayer cbam_mlp0;    // C -> C/4, relu (shared by avg and max paths)
    LinearLayer cbam_mlp1;    // C/4 -> C
    Conv3dLayer spatial_conv; // 2 -> 1, kernel 7, pad 3

    static RefineNetParams make(int channels); // requires channels % 4 == 0
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
};

/// Attention maps from the refiner: per-channel gate in (0,1) and the spatial
/// map as pre-sigmoid logits (the sigmoid is applied where the maps are
/// consumed, and the occupied head reads the raw logits).
struct AttentionMaps {
    std::vector<float> channel_mask; // C entries in (0,1)
    VoxelVolume spatial_logits;      // 1 x (X/2) x (Y/2) x (Z/2)
};

/// Pulls features of the previous half-resolution volume onto the current
/// lattice: each current cell center is mapped through the inverse of
/// `prev_to_curr` and sampled trilinearly; pulls outside the previous volume
/// yield zeros. A gather, so cells never race.
VoxelVolume warp_volume(const VoxelVolume& prev, const RigidTransform& prev_to_curr,
                        const GridSpec& spec_half);

/// Channel attention then spatial attention over the bottleneck output.
AttentionMaps cbam3d(const VoxelVolume& v_out, const RefineNetParams& params);

/// Bottleneck + attention with residual: returns the refined warped volume
/// and the attention maps used (the aux heads consume them).
struct RefineResult {
    VoxelVolume v_refwarp;
    AttentionMaps maps;
};
RefineResult refine(const VoxelVolume& v_warp, const RefineNetParams& params);

/// Stream fusion: elementwise sum of refined-warped and current features.
VoxelVolume fuse(const VoxelVolume& v_refwarp, const VoxelVolume& v_curr);

/// Binary-occupancy head over the spatial attention logits: trilinear
/// upsample to full dims, then a per-cell MLP to one logit.
struct OccupiedHeadParams {
    Mlp mlp; // 1 -> hidden -> 1
    static OccupiedHeadParams make(int hidden);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
};
VoxelVolume occupied_head(const AttentionMaps& maps, const OccupiedHeadParams& params,
                          std::array<int, 3> full_dims);

/// Forecasting head over the refined warped features: same deconv + MLP
/// decoder architecture as the main decoder, separate parameters.
struct ForecastHeadParams {
    Conv3dLayer deconv; // C -> C, kernel 2, stride 2
    Mlp mlp;            // C -> hidden -> n_classes + 1
    static ForecastHeadParams make(int channels, int hidden, int n_classes);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
};
VoxelVolume forecast_head(const VoxelVolume& v_refwarp, const ForecastHeadParams& params);

} // namespace streamocc
