#include "streamocc/stream_agg.hpp"

#include "streamocc/error.hpp"
#include "streamocc/parallel.hpp"

#include <cmath>

namespace streamocc {

Fpn3dParams Fpn3dParams::make(int c_init, int c1, int c2, int out_channels) {
    Fpn3dParams p;
    p.conv1 = Conv3dLayer::make(c_init, c1, 3, 2, 1);
    p.conv2 = Conv3dLayer::make(c1, c2, 3, 2, 1);
    p.compress = Conv3dLayer::make(c_init + c1 + c2, out_channels, 1, 1, 0);
    return p;
}

void Fpn3dParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    bind_conv3d(out, prefix + ".conv1", conv1);
    bind_conv3d(out, prefix + ".conv2", conv2);
    bind_conv3d(out, prefix + ".compress", compress);
}

VoxelVolume fpn3d(const VoxelVolume& v_init, const Fpn3dParams& params) {
    require(v_init.dim_x() % 4 == 0 && v_init.dim_y() % 4 == 0 && v_init.dim_z() % 4 == 0,
            "fpn3d: input dims must be divisible by 4");
    require(v_init.channels() == params.conv1.in_channels, "fpn3d: input channel mismatch");

    const std::array<int, 3> half{v_init.dim_x() / 2, v_init.dim_y() / 2, v_init.dim_z() / 2};

    const VoxelVolume v1 = conv3d(params.conv1, v_init);
    const VoxelVolume v2 = conv3d(params.conv2, v1);

    const VoxelVolume r0 = resample_volume(v_init, half);
    const VoxelVolume r2 = resample_volume(v2, half);

    // Concatenate [r0; v1; r2] along channels, then 1x1x1 channel mixing.
    VoxelVolume cat(r0.channels() + v1.channels() + r2.channels(), half);
    const std::int64_t cells = cat.cells();
    float* dst = cat.data().data();
    std::copy(r0.data().begin(), r0.data().end(), dst);
    std::copy(v1.data().begin(), v1.data().end(), dst + static_cast<std::int64_t>(r0.channels()) * cells);
    std::copy(r2.data().begin(), r2.data().end(),
              dst + static_cast<std::int64_t>(r0.channels() + v1.channels()) * cells);

    return conv3d(params.compress, cat);
}

VoxelVolume warp_volume(const VoxelVolume& prev, const RigidTransform& prev_to_curr,
                        const GridSpec& spec_half) {
    require(prev.dim_x() == spec_half.dims[0] && prev.dim_y() == spec_half.dims[1] &&
                prev.dim_z() == spec_half.dims[2],
            "warp_volume: volume dims do not match grid spec");

    // Pull coordinates computed directly in cell space: with u the current
    // cell-center coordinate, the previous-frame sample point is R*u + b where
    // R is the inverse rotation and b folds translation, grid origin and
    // resolution together. Identity motion gives R = I, b = 0 exactly, so the
    // warp is bit-exact on the lattice.
    const RigidTransform inv = prev_to_curr.inverse();
    const Eigen::Matrix3d R = inv.rotation;
    const Eigen::Vector3d b =
        (inv.rotation * spec_half.min_corner + inv.translation - spec_half.min_corner) /
        spec_half.resolution;

    VoxelVolume out(prev.channels(), prev.dims());
    const int X = spec_half.dims[0], Y = spec_half.dims[1];
    const std::int64_t out_cells = out.cells();
    const int C = prev.channels();

    parallel_for(0, spec_half.dims[2], [&](std::int64_t z0, std::int64_t z1) {
        std::vector<float> sample(static_cast<std::size_t>(C));
        for (std::int64_t z = z0; z < z1; ++z) {
            for (int y = 0; y < Y; ++y) {
                for (int x = 0; x < X; ++x) {
                    const Eigen::Vector3d u(x + 0.5, y + 0.5, z + 0.5);
                    const Eigen::Vector3d p = R * u + b;
                    trilinear_sample_one(prev, p, sample.data());
                    const std::int64_t cell = out.cell_index(x, y, static_cast<int>(z));
                    float* base = out.data().data();
                    for (int c = 0; c < C; ++c) base[c * out_cells + cell] = sample[c];
                }
            }
        }
    });
    return out;
}

RefineNetParams RefineNetParams::make(int channels) {
    require(channels % 4 == 0, "RefineNetParams: channels must be divisible by 4");
    const int mid = channels / 4;
    RefineNetParams p;
    p.squeeze = Conv3dLayer::make(channels, mid, 1, 1, 0);
    p.body = Conv3dLayer::make(mid, mid, 3, 1, 1);
    p.expand = Conv3dLayer::make(mid, channels, 1, 1, 0);
    p.cbam_mlp0 = LinearLayer::make(channels, mid, Activation::relu);
    p.cbam_mlp1 = LinearLayer::make(mid, channels, Activation::none);
    p.spatial_conv = Conv3dLayer::make(2, 1, 7, 1, 3);
    return p;
}

void RefineNetParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    bind_conv3d(out, prefix + ".squeeze", squeeze);
    bind_conv3d(out, prefix + ".body", body);
    bind_conv3d(out, prefix + ".expand", expand);
    bind_linear(out, prefix + ".cbam_mlp.0", cbam_mlp0);
    bind_linear(out, prefix + ".cbam_mlp.1", cbam_mlp1);
    bind_conv3d(out, prefix + ".spatial_conv", spatial_conv);
}

AttentionMaps cbam3d(const VoxelVolume& v_out, const RefineNetParams& params) {
    require(v_out.channels() == params.cbam_mlp0.in_dim, "cbam3d: channel mismatch");

    const std::vector<float> avg_s = spatial_pool(v_out, PoolKind::avg);
    const std::vector<float> max_s = spatial_pool(v_out, PoolKind::max);
    const std::vector<float> mlp_avg = params.cbam_mlp1.apply(params.cbam_mlp0.apply(avg_s));
    const std::vector<float> mlp_max = params.cbam_mlp1.apply(params.cbam_mlp0.apply(max_s));

    AttentionMaps maps;
    maps.channel_mask.resize(mlp_avg.size());
    for (std::size_t c = 0; c < mlp_avg.size(); ++c) {
        maps.channel_mask[c] =
            static_cast<float>(sigmoid(static_cast<double>(mlp_avg[c]) + mlp_max[c]));
    }

    const VoxelVolume modulated = scale_channels(v_out, maps.channel_mask);
    const VoxelVolume avg_c = channel_pool(modulated, PoolKind::avg);
    const VoxelVolume max_c = channel_pool(modulated, PoolKind::max);

    VoxelVolume cat(2, v_out.dims());
    std::copy(avg_c.data().begin(), avg_c.data().end(), cat.channel(0));
    std::copy(max_c.data().begin(), max_c.data().end(), cat.channel(1));

    maps.spatial_logits = conv3d(params.spatial_conv, cat);
    return maps;
}

RefineResult refine(const VoxelVolume& v_warp, const RefineNetParams& params) {
    require(v_warp.channels() == params.squeeze.in_channels, "refine: channel mismatch");

    const VoxelVolume squeezed = relu(conv3d(params.squeeze, v_warp));
    const VoxelVolume refined = relu(conv3d(params.body, squeezed));
    const VoxelVolume v_out = conv3d(params.expand, refined);

    RefineResult res;
    res.maps = cbam3d(v_out, params);

    const VoxelVolume gated_c = scale_channels(v_out, res.maps.channel_mask);
    const VoxelVolume gate_s = sigmoid_volume(res.maps.spatial_logits);
    res.v_refwarp = add(scale_cells(gated_c, gate_s), v_warp);
    return res;
}

VoxelVolume fuse(const VoxelVolume& v_refwarp, const VoxelVolume& v_curr) {
    require(v_refwarp.same_shape(v_curr), "fuse: shape mismatch");
    return add(v_refwarp, v_curr);
}

OccupiedHeadParams OccupiedHeadParams::make(int hidden) {
    OccupiedHeadParams p;
    p.mlp.push_back(LinearLayer::make(1, hidden, Activation::relu));
    p.mlp.push_back(LinearLayer::make(hidden, 1, Activation::none));
    return p;
}

void OccupiedHeadParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < mlp.size(); ++i) {
        bind_linear(out, prefix + ".mlp." + std::to_string(i), mlp[i]);
    }
}

VoxelVolume occupied_head(const AttentionMaps& maps, const OccupiedHeadParams& params,
                          std::array<int, 3> full_dims) {
    require(maps.spatial_logits.channels() == 1, "occupied_head: spatial map must be 1-channel");
    const VoxelVolume up = resample_volume(maps.spatial_logits, full_dims);
    return apply_mlp_per_cell(params.mlp, up);
}

ForecastHeadParams ForecastHeadParams::make(int channels, int hidden, int n_classes) {
    ForecastHeadParams p;
    p.deconv = Conv3dLayer::make(channels, channels, 2, 2, 0);
    p.mlp.push_back(LinearLayer::make(channels, hidden, Activation::relu));
    p.mlp.push_back(LinearLayer::make(hidden, n_classes + 1, Activation::none));
    return p;
}

void ForecastHeadParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    bind_conv3d(out, prefix + ".deconv", deconv);
    for (std::size_t i = 0; i < mlp.size(); ++i) {
        bind_linear(out, prefix + ".mlp." + std::to_string(i), mlp[i]);
    }
}

VoxelVolume forecast_head(const VoxelVolume& v_refwarp, const ForecastHeadParams& params) {
    const VoxelVolume up = deconv3d_x2(params.deconv, v_refwarp);
    return apply_mlp_per_cell(params.mlp, up);
}

} // namespace streamocc
