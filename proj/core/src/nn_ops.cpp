#include "streamocc/nn_ops.hpp"

#include "streamocc/error.hpp"
#include "streamocc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace streamocc {

namespace {

inline float apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::relu: return x > 0.0 ? static_cast<float>(x) : 0.0f;
        case Activation::sigmoid: return static_cast<float>(sigmoid(x));
        case Activation::none: break;
    }
    return static_cast<float>(x);
}

} // namespace

LinearLayer LinearLayer::make(int in_dim, int out_dim, Activation act) {
    require(in_dim >= 1 && out_dim >= 1, "LinearLayer dims must be >= 1");
    LinearLayer l;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.activation = act;
    l.weights.assign(static_cast<std::size_t>(in_dim) * out_dim, 0.0f);
    l.bias.assign(static_cast<std::size_t>(out_dim), 0.0f);
    return l;
}

void LinearLayer::apply(std::span<const float> in, std::span<float> out) const {
    require(static_cast<int>(in.size()) == in_dim, "LinearLayer: input size mismatch");
    require(static_cast<int>(out.size()) == out_dim, "LinearLayer: output size mismatch");
    for (int j = 0; j < out_dim; ++j) {
        const float* w = weights.data() + static_cast<std::size_t>(j) * in_dim;
        double acc = bias[j];
        for (int i = 0; i < in_dim; ++i) acc += static_cast<double>(w[i]) * in[i];
        out[j] = apply_activation(activation, acc);
    }
}

std::vector<float> LinearLayer::apply(std::span<const float> in) const {
    std::vector<float> out(static_cast<std::size_t>(out_dim));
    apply(in, out);
    return out;
}

std::vector<float> apply_mlp(const Mlp& layers, std::span<const float> in) {
    std::vector<float> cur(in.begin(), in.end());
    for (const auto& layer : layers) cur = layer.apply(cur);
    return cur;
}

Conv3dLayer Conv3dLayer::make(int in_channels, int out_channels, int kernel, int stride,
                              int padding) {
    require(in_channels >= 1 && out_channels >= 1, "Conv3dLayer channels must be >= 1");
    require(kernel >= 1 && stride >= 1 && padding >= 0, "Conv3dLayer geometry invalid");
    Conv3dLayer l;
    l.in_channels = in_channels;
    l.out_channels = out_channels;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    l.weights.assign(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel * kernel,
                     0.0f);
    l.bias.assign(static_cast<std::size_t>(out_channels), 0.0f);
    return l;
}

VoxelVolume conv3d(const Conv3dLayer& layer, const VoxelVolume& vol) {
    require(vol.channels() == layer.in_channels, "conv3d: input channel mismatch");
    const int X = vol.dim_x(), Y = vol.dim_y(), Z = vol.dim_z();
    const int K = layer.kernel, S = layer.stride, P = layer.padding;
    const int OX = (X + 2 * P - K) / S + 1;
    const int OY = (Y + 2 * P - K) / S + 1;
    const int OZ = (Z + 2 * P - K) / S + 1;
    require(OX >= 1 && OY >= 1 && OZ >= 1, "conv3d: output dims must be >= 1");

    VoxelVolume out(layer.out_channels, {OX, OY, OZ});
    const std::int64_t in_cells = vol.cells();
    const std::int64_t out_cells = out.cells();
    const std::int64_t kvol = static_cast<std::int64_t>(K) * K * K;

    // One task = one (c_out, z_out) slab; rows along x accumulate in double.
    const std::int64_t tasks = static_cast<std::int64_t>(layer.out_channels) * OZ;
    parallel_for(0, tasks, [&](std::int64_t t0, std::int64_t t1) {
        std::vector<double> row(static_cast<std::size_t>(OX));
        for (std::int64_t t = t0; t < t1; ++t) {
            const int co = static_cast<int>(t / OZ);
            const int zo = static_cast<int>(t % OZ);
            float* out_ch = out.data().data() + co * out_cells;
            for (int yo = 0; yo < OY; ++yo) {
                std::fill(row.begin(), row.end(), static_cast<double>(layer.bias[co]));
                for (int ci = 0; ci < layer.in_channels; ++ci) {
                    const float* in_ch = vol.data().data() + ci * in_cells;
                    const float* w_base = layer.weights.data() +
                                          (static_cast<std::int64_t>(co) * layer.in_channels + ci) * kvol;
                    for (int kz = 0; kz < K; ++kz) {
                        const int zi = zo * S + kz - P;
                        if (zi < 0 || zi >= Z) continue;
                        for (int ky = 0; ky < K; ++ky) {
                            const int yi = yo * S + ky - P;
                            if (yi < 0 || yi >= Y) continue;
                            const float* in_row = in_ch + vol.cell_index(0, yi, zi);
                            const float* w_row = w_base + (kz * K + ky) * K;
                            for (int kx = 0; kx < K; ++kx) {
                                const int off = kx - P;
                                // valid xo range: 0 <= xo*S + off < X
                                int lo = 0;
                                if (off < 0) lo = (-off + S - 1) / S;
                                int hi = (X - 1 - off) / S + 1;
                                if (hi > OX) hi = OX;
                                const double wv = w_row[kx];
                                if (wv == 0.0) continue;
                                if (S == 1) {
                                    const float* src = in_row + off;
                                    for (int xo = lo; xo < hi; ++xo) row[xo] += wv * src[xo];
                                } else {
                                    for (int xo = lo; xo < hi; ++xo)
                                        row[xo] += wv * in_row[xo * S + off];
                                }
                            }
                        }
                    }
                }
                float* out_row = out_ch + out.cell_index(0, yo, zo);
                for (int xo = 0; xo < OX; ++xo) out_row[xo] = static_cast<float>(row[xo]);
            }
        }
    });
    return out;
}

VoxelVolume deconv3d_x2(const Conv3dLayer& layer, const VoxelVolume& vol) {
    require(layer.kernel == 2 && layer.stride == 2 && layer.padding == 0,
            "deconv3d_x2: layer must have kernel 2, stride 2, padding 0");
    require(vol.channels() == layer.in_channels, "deconv3d_x2: input channel mismatch");
    const int X = vol.dim_x(), Y = vol.dim_y(), Z = vol.dim_z();
    const int OX = 2 * X, OY = 2 * Y, OZ = 2 * Z;
    VoxelVolume out(layer.out_channels, {OX, OY, OZ});
    const std::int64_t in_cells = vol.cells();
    const std::int64_t out_cells = out.cells();

    // With kernel 2 / stride 2 every output cell receives exactly one tap from
    // input cell (x/2, y/2, z/2) with kernel offset (x%2, y%2, z%2).
    const std::int64_t tasks = static_cast<std::int64_t>(layer.out_channels) * OZ;
    parallel_for(0, tasks, [&](std::int64_t t0, std::int64_t t1) {
        for (std::int64_t t = t0; t < t1; ++t) {
            const int co = static_cast<int>(t / OZ);
            const int zo = static_cast<int>(t % OZ);
            const int zi = zo / 2, dz = zo % 2;
            float* out_ch = out.data().data() + co * out_cells;
            for (int yo = 0; yo < OY; ++yo) {
                const int yi = yo / 2, dy = yo % 2;
                float* out_row = out_ch + out.cell_index(0, yo, zo);
                for (int xo = 0; xo < OX; ++xo) {
                    const int xi = xo / 2, dx = xo % 2;
                    double acc = layer.bias[co];
                    const std::int64_t in_idx = vol.cell_index(xi, yi, zi);
                    for (int ci = 0; ci < layer.in_channels; ++ci) {
                        const float w = layer.weights[(((static_cast<std::int64_t>(co) *
                                                             layer.in_channels +
                                                         ci) * 2 + dz) * 2 + dy) * 2 + dx];
                        acc += static_cast<double>(w) * vol.data()[ci * in_cells + in_idx];
                    }
                    out_row[xo] = static_cast<float>(acc);
                }
            }
        }
    });
    return out;
}

VoxelVolume channel_pool(const VoxelVolume& vol, PoolKind kind) {
    VoxelVolume out(1, vol.dims());
    const std::int64_t cells = vol.cells();
    const int C = vol.channels();
    float* dst = out.channel(0);
    if (kind == PoolKind::avg) {
        for (std::int64_t i = 0; i < cells; ++i) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c) acc += vol.data()[c * cells + i];
            dst[i] = static_cast<float>(acc / C);
        }
    } else {
        for (std::int64_t i = 0; i < cells; ++i) {
            float m = vol.data()[i];
            for (int c = 1; c < C; ++c) m = std::max(m, vol.data()[c * cells + i]);
            dst[i] = m;
        }
    }
    return out;
}

std::vector<float> spatial_pool(const VoxelVolume& vol, PoolKind kind) {
    const std::int64_t cells = vol.cells();
    const int C = vol.channels();
    std::vector<float> out(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        const float* ch = vol.channel(c);
        if (kind == PoolKind::avg) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < cells; ++i) acc += ch[i];
            out[c] = static_cast<float>(acc / static_cast<double>(cells));
        } else {
            float m = ch[0];
            for (std::int64_t i = 1; i < cells; ++i) m = std::max(m, ch[i]);
            out[c] = m;
        }
    }
    return out;
}

std::vector<double> softmax(std::span<const double> v, double divisor) {
    require(divisor > 0.0, "softmax: divisor must be > 0");
    std::vector<double> out(v.size());
    if (v.empty()) return out;
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x / divisor);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] / divisor - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

VoxelVolume relu(const VoxelVolume& vol) {
    VoxelVolume out = vol;
    for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
    return out;
}

VoxelVolume sigmoid_volume(const VoxelVolume& vol) {
    VoxelVolume out = vol;
    for (float& v : out.data()) v = static_cast<float>(sigmoid(v));
    return out;
}

VoxelVolume apply_mlp_per_cell(const Mlp& layers, const VoxelVolume& vol) {
    require(!layers.empty(), "apply_mlp_per_cell: empty MLP");
    require(layers.front().in_dim == vol.channels(),
            "apply_mlp_per_cell: input channel mismatch");
    for (std::size_t i = 1; i < layers.size(); ++i) {
        require(layers[i].in_dim == layers[i - 1].out_dim,
                "apply_mlp_per_cell: layer dimension chain mismatch");
    }
    const int c_out = layers.back().out_dim;
    VoxelVolume out(c_out, vol.dims());
    const std::int64_t cells = vol.cells();
    const std::int64_t out_cells = out.cells();
    constexpr std::int64_t kBlock = 128;
    const std::int64_t blocks = (cells + kBlock - 1) / kBlock;

    parallel_for(0, blocks, [&](std::int64_t b0, std::int64_t b1) {
        std::vector<float> buf_a, buf_b;
        for (std::int64_t b = b0; b < b1; ++b) {
            const std::int64_t lo = b * kBlock;
            const std::int64_t n = std::min(kBlock, cells - lo);
            // Gather the block into cell-major scratch: buf[cell][channel].
            buf_a.assign(static_cast<std::size_t>(n) * vol.channels(), 0.0f);
            for (int c = 0; c < vol.channels(); ++c) {
                const float* ch = vol.channel(c) + lo;
                for (std::int64_t i = 0; i < n; ++i)
                    buf_a[i * vol.channels() + c] = ch[i];
            }
            const std::vector<float>* cur = &buf_a;
            std::vector<float>* nxt = &buf_b;
            int cur_dim = vol.channels();
            for (const auto& layer : layers) {
                nxt->assign(static_cast<std::size_t>(n) * layer.out_dim, 0.0f);
                for (std::int64_t i = 0; i < n; ++i) {
                    const float* in_vec = cur->data() + i * cur_dim;
                    float* out_vec = nxt->data() + i * layer.out_dim;
                    for (int j = 0; j < layer.out_dim; ++j) {
                        const float* w = layer.weights.data() +
                                         static_cast<std::size_t>(j) * layer.in_dim;
                        double acc = layer.bias[j];
                        for (int k = 0; k < layer.in_dim; ++k)
                            acc += static_cast<double>(w[k]) * in_vec[k];
                        out_vec[j] = apply_activation(layer.activation, acc);
                    }
                }
                if (cur == &buf_a) { cur = &buf_b; nxt = &buf_a; }
                else { cur = &buf_a; nxt = &buf_b; }
                cur_dim = layer.out_dim;
            }
            // Scatter back to channel-major.
            for (int c = 0; c < c_out; ++c) {
                float* ch = out.data().data() + c * out_cells + lo;
                for (std::int64_t i = 0; i < n; ++i) ch[i] = (*cur)[i * c_out + c];
            }
        }
    });
    return out;
}

double finite_difference_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& analytic_grad,
    const std::vector<double>& x, double h) {
    require(h > 0.0, "finite_difference_check: h must be > 0");
    const std::vector<double> g = analytic_grad(x);
    require(g.size() == x.size(), "finite_difference_check: gradient size mismatch");
    double worst = 0.0;
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[i]));
    }
    return worst;
}

} // namespace streamocc
