#pragma once

#include "streamocc/nn_ops.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace streamocc {

// Weight file = text manifest + float blob.
//
// The manifest lists one parameter block per line:
//   <name> <role> <d0>x<d1>x...
// and the blob (same path with extension replaced by ".blob") holds the
// blocks' little-endian float32 data concatenated in manifest order.

struct ParamBinding {
    std::string name;
    std::string role; // "linear.weight", "conv3d.bias", "vector", "matrix", ...
    std::vector<int> shape;
    std::span<float> data;
};

/// Bindings for one layer's tensors, named <prefix>.weight / <prefix>.bias.
void bind_linear(std::vector<ParamBinding>& out, const std::string& prefix, LinearLayer& layer);
void bind_conv3d(std::vector<ParamBinding>& out, const std::string& prefix, Conv3dLayer& layer);
void bind_vector(std::vector<ParamBinding>& out, const std::string& name, std::vector<float>& v);
void bind_matrix(std::vector<ParamBinding>& out, const std::string& name, std::vector<float>& v,
                 int rows, int cols);

/// Writes manifest + blob. The blob path is the manifest path with its
/// extension replaced by ".blob".
void save_weights(const std::string& manifest_path, std::span<const ParamBinding> bindings);

/// Loads into the bound tensors; every binding must be present with the exact
/// shape. Throws ConfigError naming the first missing/mismatched block and
/// InputError on unreadable/ill-formed files.
void load_weights(const std::string& manifest_path, std::span<ParamBinding> bindings);

/// Untrained-weights mode: per-block uniform values in [-0.05, 0.05], seeded
/// by (seed, block name) so results do not depend on registration order.
/// Blocks whose name ends in ".scale" are set to 1 instead (normalization
/// identity).
void init_uniform_weights(std::span<ParamBinding> bindings, std::uint64_t seed);

} // namespace streamocc
