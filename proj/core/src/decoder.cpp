#include "streamocc/decoder.hpp"

#include "streamocc/error.hpp"
#include "streamocc/parallel.hpp"

namespace streamocc {

DecoderParams DecoderParams::make(int channels, int hidden, int n_classes) {
    DecoderParams p;
    p.deconv = Conv3dLayer::make(channels, channels, 2, 2, 0);
    p.mlp.push_back(LinearLayer::make(channels, hidden, Activation::relu));
    p.mlp.push_back(LinearLayer::make(hidden, n_classes + 1, Activation::none));
    return p;
}

void DecoderParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    bind_conv3d(out, prefix + ".deconv", deconv);
    for (std::size_t i = 0; i < mlp.size(); ++i) {
        bind_linear(out, prefix + ".mlp." + std::to_string(i), mlp[i]);
    }
}

SemanticGrid argmax_labels(const VoxelVolume& logits) {
    require(logits.channels() >= 2, "argmax_labels: need at least empty + one class");
    SemanticGrid grid(logits.dims(), logits.channels() - 1);
    const std::int64_t cells = logits.cells();
    const int C = logits.channels();
    parallel_for(0, cells, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            int best = 0;
            float best_v = logits.data()[i];
            for (int c = 1; c < C; ++c) {
                const float v = logits.data()[c * cells + i];
                if (v > best_v) { // strict: ties keep the lowest class id
                    best_v = v;
                    best = c;
                }
            }
            grid.labels[i] = static_cast<std::uint8_t>(best);
        }
    });
    return grid;
}

DecodeResult decode(const VoxelVolume& v_fin, const DecoderParams& params) {
    DecodeResult res;
    const VoxelVolume up = deconv3d_x2(params.deconv, v_fin);
    res.logits = apply_mlp_per_cell(params.mlp, up);
    res.labels = argmax_labels(res.logits);
    return res;
}

} // namespace streamocc
