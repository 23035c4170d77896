#include "streamocc/voxel_volume.hpp"

#include "streamocc/error.hpp"
#include "streamocc/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace streamocc {

VoxelVolume::VoxelVolume(int channels, std::array<int, 3> dims)
    : channels_(channels), dims_(dims) {
    require(channels >= 1, "VoxelVolume needs at least one channel");
    require(dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1, "VoxelVolume dims must be >= 1");
    data_.assign(static_cast<std::size_t>(size()), 0.0f);
}

void VoxelVolume::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool VoxelVolume::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void trilinear_sample_one(const VoxelVolume& vol, const Eigen::Vector3d& p, float* out) {
    const int X = vol.dim_x(), Y = vol.dim_y(), Z = vol.dim_z();
    const int C = vol.channels();

    if (p.x() < 0.0 || p.x() > X || p.y() < 0.0 || p.y() > Y || p.z() < 0.0 || p.z() > Z) {
        std::fill(out, out + C, 0.0f);
        return;
    }

    const double gx = p.x() - 0.5, gy = p.y() - 0.5, gz = p.z() - 0.5;
    const double fx0 = std::floor(gx), fy0 = std::floor(gy), fz0 = std::floor(gz);
    const double tx = gx - fx0, ty = gy - fy0, tz = gz - fz0;

    const auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    const int x0 = clampi(static_cast<int>(fx0), X - 1), x1 = clampi(static_cast<int>(fx0) + 1, X - 1);
    const int y0 = clampi(static_cast<int>(fy0), Y - 1), y1 = clampi(static_cast<int>(fy0) + 1, Y - 1);
    const int z0 = clampi(static_cast<int>(fz0), Z - 1), z1 = clampi(static_cast<int>(fz0) + 1, Z - 1);

    const double w000 = (1 - tx) * (1 - ty) * (1 - tz);
    const double w100 = tx * (1 - ty) * (1 - tz);
    const double w010 = (1 - tx) * ty * (1 - tz);
    const double w110 = tx * ty * (1 - tz);
    const double w001 = (1 - tx) * (1 - ty) * tz;
    const double w101 = tx * (1 - ty) * tz;
    const double w011 = (1 - tx) * ty * tz;
    const double w111 = tx * ty * tz;

    const std::int64_t i000 = vol.cell_index(x0, y0, z0);
    const std::int64_t i100 = vol.cell_index(x1, y0, z0);
    const std::int64_t i010 = vol.cell_index(x0, y1, z0);
    const std::int64_t i110 = vol.cell_index(x1, y1, z0);
    const std::int64_t i001 = vol.cell_index(x0, y0, z1);
    const std::int64_t i101 = vol.cell_index(x1, y0, z1);
    const std::int64_t i011 = vol.cell_index(x0, y1, z1);
    const std::int64_t i111 = vol.cell_index(x1, y1, z1);

    for (int c = 0; c < C; ++c) {
        const float* ch = vol.channel(c);
        const double acc = w000 * ch[i000] + w100 * ch[i100] + w010 * ch[i010] +
                           w110 * ch[i110] + w001 * ch[i001] + w101 * ch[i101] +
                           w011 * ch[i011] + w111 * ch[i111];
        out[c] = static_cast<float>(acc);
    }
}

std::vector<float> trilinear_sample(const VoxelVolume& vol,
                                    std::span<const Eigen::Vector3d> points) {
    std::vector<float> out(points.size() * static_cast<std::size_t>(vol.channels()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        trilinear_sample_one(vol, points[i], out.data() + i * vol.channels());
    }
    return out;
}

VoxelVolume resample_volume(const VoxelVolume& vol, std::array<int, 3> out_dims) {
    VoxelVolume out(vol.channels(), out_dims);
    const double sx = static_cast<double>(vol.dim_x()) / out_dims[0];
    const double sy = static_cast<double>(vol.dim_y()) / out_dims[1];
    const double sz = static_cast<double>(vol.dim_z()) / out_dims[2];
    const int C = vol.channels();
    const std::int64_t plane = static_cast<std::int64_t>(out_dims[0]) * out_dims[1];
    const std::int64_t out_cells = out.cells();

    parallel_for(0, out_dims[2], [&](std::int64_t z0, std::int64_t z1) {
        std::vector<float> sample(static_cast<std::size_t>(C));
        for (std::int64_t z = z0; z < z1; ++z) {
            for (int y = 0; y < out_dims[1]; ++y) {
                for (int x = 0; x < out_dims[0]; ++x) {
                    const Eigen::Vector3d p((x + 0.5) * sx, (y + 0.5) * sy, (z + 0.5) * sz);
                    trilinear_sample_one(vol, p, sample.data());
                    const std::int64_t cell = x + out_dims[0] * y + plane * z;
                    float* base = out.data().data();
                    for (int c = 0; c < C; ++c) base[c * out_cells + cell] = sample[c];
                }
            }
        }
    });
    return out;
}

VoxelVolume add(const VoxelVolume& a, const VoxelVolume& b) {
    require(a.same_shape(b), "add: shape mismatch");
    VoxelVolume out = a;
    add_in_place(out, b);
    return out;
}

void add_in_place(VoxelVolume& a, const VoxelVolume& b) {
    require(a.same_shape(b), "add: shape mismatch");
    float* pa = a.data().data();
    const float* pb = b.data().data();
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) pa[i] += pb[i];
}

VoxelVolume scale_channels(const VoxelVolume& vol, std::span<const float> per_channel) {
    require(static_cast<int>(per_channel.size()) == vol.channels(),
            "scale_channels: channel count mismatch");
    VoxelVolume out = vol;
    const std::int64_t cells = vol.cells();
    for (int c = 0; c < vol.channels(); ++c) {
        float* ch = out.channel(c);
        const float s = per_channel[c];
        for (std::int64_t i = 0; i < cells; ++i) ch[i] *= s;
    }
    return out;
}

VoxelVolume scale_cells(const VoxelVolume& vol, const VoxelVolume& mask) {
    require(mask.channels() == 1 && mask.dims() == vol.dims(),
            "scale_cells: mask must be single-channel with matching dims");
    VoxelVolume out = vol;
    const std::int64_t cells = vol.cells();
    const float* m = mask.channel(0);
    for (int c = 0; c < vol.channels(); ++c) {
        float* ch = out.channel(c);
        for (std::int64_t i = 0; i < cells; ++i) ch[i] *= m[i];
    }
    return out;
}

} // namespace streamocc
