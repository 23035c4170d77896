#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace streamocc {

/// Dense C-channel feature volume over an X*Y*Z lattice of 32-bit floats.
///
/// Layout is channel-major with x fastest inside a channel:
///   index(c,x,y,z) = c*X*Y*Z + x + X*(y + Y*z)
/// matching GridSpec's cell order, so `channel(c)[cell_index]` addresses the
/// same cell the grid does.
class VoxelVolume {
public:
    VoxelVolume() = default;
    VoxelVolume(int channels, std::array<int, 3> dims);

    static VoxelVolume zeros(int channels, std::array<int, 3> dims) {
        return VoxelVolume(channels, dims);
    }

    int channels() const { return channels_; }
    const std::array<int, 3>& dims() const { return dims_; }
    int dim_x() const { return dims_[0]; }
    int dim_y() const { return dims_[1]; }
    int dim_z() const { return dims_[2]; }

    std::int64_t cells() const {
        return static_cast<std::int64_t>(dims_[0]) * dims_[1] * dims_[2];
    }
    std::int64_t size() const { return static_cast<std::int64_t>(channels_) * cells(); }
    bool empty() const { return data_.empty(); }

    std::int64_t cell_index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims_[0]) * (y + static_cast<std::int64_t>(dims_[1]) * z);
    }

    float& at(int c, int x, int y, int z) { return data_[c * cells() + cell_index(x, y, z)]; }
    float at(int c, int x, int y, int z) const { return data_[c * cells() + cell_index(x, y, z)]; }

    float* channel(int c) { return data_.data() + c * cells(); }
    const float* channel(int c) const { return data_.data() + c * cells(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    void fill(float v);
    bool same_shape(const VoxelVolume& other) const {
        return channels_ == other.channels_ && dims_ == other.dims_;
    }
    bool all_finite() const;

private:
    int channels_ = 0;
    std::array<int, 3> dims_{0, 0, 0};
    std::vector<float> data_;
};

/// Trilinear sample at continuous cell coordinates (cell centers at n + 0.5).
///
/// Points outside [0,X]x[0,Y]x[0,Z] return zeros; inside, stencil corners that
/// fall past the cell-center hull are clamped (border replication), so
/// constant fields stay constant everywhere in the domain and a sample taken
/// exactly at a cell center reproduces that cell bit-exactly.
void trilinear_sample_one(const VoxelVolume& vol, const Eigen::Vector3d& p, float* out);

/// Batch form: returns n*C floats, point-major.
std::vector<float> trilinear_sample(const VoxelVolume& vol,
                                    std::span<const Eigen::Vector3d> points);

/// Resample to new dims assuming both volumes cover the same metric extent.
VoxelVolume resample_volume(const VoxelVolume& vol, std::array<int, 3> out_dims);

// Elementwise helpers shared by the aggregation stages.
VoxelVolume add(const VoxelVolume& a, const VoxelVolume& b);
void add_in_place(VoxelVolume& a, const VoxelVolume& b);
/// out(c,p) = vol(c,p) * per_channel[c]
VoxelVolume scale_channels(const VoxelVolume& vol, std::span<const float> per_channel);
/// out(c,p) = vol(c,p) * mask(0,p); mask must be single-channel, same dims.
VoxelVolume scale_cells(const VoxelVolume& vol, const VoxelVolume& mask);

} // namespace streamocc
