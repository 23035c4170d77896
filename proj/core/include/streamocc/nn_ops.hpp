#pragma once

#include "streamocc/voxel_volume.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace streamocc {

// Forward-only learned layers. All reductions accumulate in double and store
// results as 32-bit floats; the summation order is fixed, so outputs are
// bit-identical across runs and thread counts.

enum class Activation { none, relu, sigmoid };

struct LinearLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<float> weights; // row-major, out_dim x in_dim
    std::vector<float> bias;    // out_dim
    Activation activation = Activation::none;

    static LinearLayer make(int in_dim, int out_dim, Activation act = Activation::none);

    void apply(std::span<const float> in, std::span<float> out) const;
    std::vector<float> apply(std::span<const float> in) const;
};

using Mlp = std::vector<LinearLayer>;

std::vector<float> apply_mlp(const Mlp& layers, std::span<const float> in);

struct Conv3dLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1; // cubic k x k x k
    int stride = 1;
    int padding = 0;
    std::vector<float> weights; // [c_out][c_in][kz][ky][kx], kx fastest
    std::vector<float> bias;    // c_out

    static Conv3dLayer make(int in_channels, int out_channels, int kernel, int stride,
                            int padding);
};

/// Cross-correlation (no kernel flip) with zero padding; output dim per axis
/// is (n + 2*padding - kernel)/stride + 1.
VoxelVolume conv3d(const Conv3dLayer& layer, const VoxelVolume& vol);

/// Transposed convolution with kernel 2, stride 2: doubles every axis.
VoxelVolume deconv3d_x2(const Conv3dLayer& layer, const VoxelVolume& vol);

enum class PoolKind { avg, max };

/// Per-cell reduction across channels; returns a single-channel volume.
VoxelVolume channel_pool(const VoxelVolume& vol, PoolKind kind);

/// Per-channel reduction across all cells; returns a C-vector.
std::vector<float> spatial_pool(const VoxelVolume& vol, PoolKind kind);

/// Numerically stable softmax of v / divisor (max-subtracted).
std::vector<double> softmax(std::span<const double> v, double divisor = 1.0);

double sigmoid(double x);

/// ReLU / sigmoid applied elementwise to a volume.
VoxelVolume relu(const VoxelVolume& vol);
VoxelVolume sigmoid_volume(const VoxelVolume& vol);

/// Applies the same MLP independently at every cell (input channels ->
/// output channels). Cells are processed in blocked batches for locality.
VoxelVolume apply_mlp_per_cell(const Mlp& layers, const VoxelVolume& vol);

/// Central-difference check: max_i |(f(x+h e_i) - f(x-h e_i))/(2h) - grad(x)_i|.
double finite_difference_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& analytic_grad,
    const std::vector<double>& x, double h);

} // namespace streamocc
