#include "streamocc/query_agg.hpp"

#include "streamocc/error.hpp"
#include "streamocc/parallel.hpp"
#include "streamocc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace streamocc {

// ---------------------------------------------------------------------------
// Detector stand-in

DetectorParams DetectorParams::make(int n_classes, int feature_dim) {
    DetectorParams p;
    p.feature_dim = feature_dim;
    p.n_classes = n_classes;
    p.class_embed.assign(static_cast<std::size_t>(n_classes + 1) * feature_dim, 0.0f);
    p.box_proj = LinearLayer::make(7, feature_dim, Activation::none);
    return p;
}

void DetectorParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    bind_matrix(out, prefix + ".class_embed", class_embed, n_classes + 1, feature_dim);
    bind_linear(out, prefix + ".box_proj", box_proj);
}

std::vector<float> DetectorParams::feature_of(int class_id, const OrientedBox& box) const {
    require(class_id >= 0 && class_id <= n_classes, "detector: class id out of range");
    const float in[7] = {static_cast<float>(box.center.x()), static_cast<float>(box.center.y()),
                         static_cast<float>(box.center.z()), static_cast<float>(box.size.x()),
                         static_cast<float>(box.size.y()),   static_cast<float>(box.size.z()),
                         static_cast<float>(box.yaw)};
    std::vector<float> f = box_proj.apply(std::span<const float>(in, 7));
    const float* embed = class_embed.data() + static_cast<std::size_t>(class_id) * feature_dim;
    for (int i = 0; i < feature_dim; ++i) f[i] += embed[i];
    return f;
}

std::vector<ReplayRecord> parse_replay_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot read replay detections: " + path);
    std::vector<ReplayRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream iss(line);
        ReplayRecord r;
        double l = 0, w = 0, h = 0;
        if (!(iss >> r.frame_index)) continue; // blank line
        if (!(iss >> r.track_id >> r.class_id >> r.confidence >> r.box.center.x() >>
              r.box.center.y() >> r.box.center.z() >> l >> w >> h >> r.box.yaw)) {
            throw InputError("replay file " + path + " line " + std::to_string(line_no) +
                             ": expected 'frame track class conf cx cy cz l w h yaw'");
        }
        if (l <= 0.0 || w <= 0.0 || h <= 0.0) {
            throw InputError("replay file " + path + " line " + std::to_string(line_no) +
                             ": box size must be positive");
        }
        r.box.size = Eigen::Vector3d(l, w, h);
        records.push_back(r);
    }
    return records;
}

std::vector<InstanceQuery> detector_source(const SceneFrame& frame, const StreamState& state,
                                           const DetectorConfig& config,
                                           const DetectorParams& params) {
    (void)state; // track ids persist via the scene's stable box ids
    std::vector<InstanceQuery> queries;

    if (config.mode == DetectorMode::replay) {
        const auto records = parse_replay_file(config.replay_path);
        for (const auto& r : records) {
            if (r.frame_index != frame.timestep) continue;
            if (static_cast<int>(queries.size()) >= config.max_queries) break;
            InstanceQuery q;
            q.box = r.box;
            q.confidence = r.confidence;
            q.class_id = r.class_id;
            q.track_id = r.track_id;
            q.feature = params.feature_of(r.class_id, r.box);
            queries.push_back(std::move(q));
        }
        return queries;
    }

    Rng rng(hash_combine(config.seed, static_cast<std::uint64_t>(frame.timestep) + 0x5157ull));
    for (const auto& gt : frame.dynamic_boxes) {
        if (static_cast<int>(queries.size()) >= config.max_queries) break;
        InstanceQuery q;
        q.box = gt.box;
        for (int a = 0; a < 3; ++a) {
            q.box.center[a] += rng.normal(0.0, config.center_sigma);
            q.box.size[a] = std::max(0.05, q.box.size[a] + rng.normal(0.0, config.size_sigma));
        }
        q.box.yaw += rng.normal(0.0, config.yaw_sigma);
        q.confidence = rng.truncated_normal(config.conf_mean, config.conf_sigma, 0.0, 1.0);
        q.class_id = gt.class_id;
        q.track_id = gt.track_id;
        q.feature = params.feature_of(gt.class_id, q.box);
        queries.push_back(std::move(q));
    }
    return queries;
}

// ---------------------------------------------------------------------------
// Voxel-to-query deformable attention

DeformAttnParams DeformAttnParams::make(int channels, int query_dim, int heads, int points) {
    require(heads >= 1 && points >= 1, "DeformAttnParams: heads and points must be >= 1");
    require(channels % heads == 0, "DeformAttnParams: channels must divide by heads");
    DeformAttnParams p;
    p.heads = heads;
    p.points = points;
    p.offset_net = LinearLayer::make(query_dim, heads * points * 3, Activation::none);
    p.weight_net = LinearLayer::make(query_dim, heads * points, Activation::none);
    const int head_dim = channels / heads;
    for (int h = 0; h < heads; ++h) {
        p.value_proj.push_back(LinearLayer::make(channels, head_dim, Activation::none));
        p.out_proj.push_back(LinearLayer::make(head_dim, query_dim, Activation::none));
    }
    return p;
}

void DeformAttnParams::bind(std::vector<ParamBinding>& out, const std::string& prefix) {
    bind_linear(out, prefix + ".offset_net", offset_net);
    bind_linear(out, prefix + ".weight_net", weight_net);
    for (int h = 0; h < heads; ++h) {
        bind_linear(out, prefix + ".value_proj." + std::to_string(h), value_proj[h]);
        bind_linear(out, prefix + ".out_proj." + std::to_string(h), out_proj[h]);
    }
}

std::vector<std::vector<double>> v2q_attention_weights(const DeformAttnParams& params,
                                                       std::span<const float> feature) {
    const std::vector<float> logits = params.weight_net.apply(feature);
    std::vector<std::vector<double>> alpha(static_cast<std::size_t>(params.heads));
    for (int h = 0; h < params.heads; ++h) {
        std::vector<double> head_logits(static_cast<std::size_t>(params.points));
        for (int o = 0; o < params.points; ++o) head_logits[o] = logits[h * params.points + o];
        alpha[h] = softmax(head_logits);
    }
    return alpha;
}

std::vector<InstanceQuery> v2q_deform_attn(const std::vector<InstanceQuery>& queries,
                                           const VoxelVolume& v_sa,
                                           const DeformAttnParams& params,
                                           const GridSpec& spec_half) {
    const int H = params.heads, O = params.points;
    std::vector<InstanceQuery> out = queries;

    std::vector<float> sample(static_cast<std::size_t>(v_sa.channels()));
    for (auto& q : out) {
        require(static_cast<int>(q.feature.size()) == params.offset_net.in_dim,
                "v2q: query feature dim mismatch");
        const std::vector<float> offsets = params.offset_net.apply(q.feature);
        const std::vector<std::vector<double>> head_alpha =
            v2q_attention_weights(params, q.feature);

        std::vector<float> update(q.feature.size(), 0.0f);
        for (int h = 0; h < H; ++h) {
            const std::vector<double>& alpha = head_alpha[static_cast<std::size_t>(h)];

            std::vector<double> head_acc(
                static_cast<std::size_t>(params.value_proj[h].out_dim), 0.0);
            for (int o = 0; o < O; ++o) {
                const int base = (h * O + o) * 3;
                const Eigen::Vector3d p =
                    q.box.center + Eigen::Vector3d(offsets[base], offsets[base + 1],
                                                   offsets[base + 2]);
                trilinear_sample_one(v_sa, spec_half.world_to_cell(p), sample.data());
                const std::vector<float> v = params.value_proj[h].apply(sample);
                for (std::size_t i = 0; i < v.size(); ++i) head_acc[i] += alpha[o] * v[i];
            }
            std::vector<float> head_f(head_acc.size());
            for (std::size_t i = 0; i < head_acc.size(); ++i)
                head_f[i] = static_cast<float>(head_acc[i]);
            const std::vector<float> projected = params.out_proj[h].apply(head_f);
            for (std::size_t i = 0; i < update.size(); ++i) update[i] += projected[i];
        }
        for (std::size_t i = 0; i < q.feature.size(); ++i) q.feature[i] += update[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Query selection

bool SelectionConfig::is_large(int class_id) const {
    return std::find(large_classes.begin(), large_classes.end(), class_id) !=
           large_classes.end();
}

std::vector<InstanceQuery> select_queries(const std::vector<InstanceQuery>& queries,
                                          const std::optional<std::vector<GtBox>>& gt_boxes,
                                          SelectMode mode, const SelectionConfig& config) {
    if (mode == SelectMode::infer) {
        std::vector<InstanceQuery> kept;
        for (const auto& q : queries) {
            if (q.confidence > config.conf_thresh) kept.push_back(q);
        }
        return kept;
    }

    require(gt_boxes.has_value(), "select_queries: train mode requires ground-truth boxes");
    const auto& gts = *gt_boxes;

    // Greedy matching in descending confidence (stable on ties by index).
    std::vector<std::size_t> order(queries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return queries[a].confidence > queries[b].confidence;
    });

    std::vector<bool> gt_claimed(gts.size(), false);
    std::vector<bool> keep(queries.size(), false);

    for (std::size_t qi : order) {
        const auto& q = queries[qi];
        if (!(q.confidence > config.conf_thresh)) continue;

        int best = -1;
        double best_iou = 0.0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (gt_claimed[gi]) continue;
            const double iou = bev_iou(q.box, gts[gi].box);
            const double dist = (q.box.center - gts[gi].box.center).norm();
            if (best < 0 || iou > best_iou || (iou == best_iou && dist < best_dist)) {
                best = static_cast<int>(gi);
                best_iou = iou;
                best_dist = dist;
            }
        }
        if (best < 0) continue;

        bool selected = false;
        if (config.is_large(q.class_id)) {
            selected = best_iou >= config.iou_thresh;
        } else {
            const double d_center = (q.box.center - gts[best].box.center).norm();
            const double d_size = (q.box.size - gts[best].box.size).lpNorm<1>();
            const double score = config.sigma_center * d_center + config.sigma_size * d_size;
            selected = score < config.geo_thresh;
        }
        if (selected) {
            gt_claimed[best] = true;
            keep[qi] = true;
        }
    }

    std::vector<InstanceQuery> kept;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (keep[i]) kept.push_back(queries[i]);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// Query-to-voxel mapping and aggregation

VoxelQueryIndex build_voxel_query_index(const std::vector<InstanceQuery>& queries,
                                        const GridSpec& spec_half) {
    VoxelQueryIndex index;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const OrientedBox& box = queries[qi].box;
        // Conservative AABB of the rotated box in grid coordinates.
        const double c = std::abs(std::cos(box.yaw)), s = std::abs(std::sin(box.yaw));
        const double rx = 0.5 * (c * box.size.x() + s * box.size.y());
        const double ry = 0.5 * (s * box.size.x() + c * box.size.y());
        const double rz = 0.5 * box.size.z();
        const Eigen::Vector3d lo = spec_half.world_to_cell(
            box.center - Eigen::Vector3d(rx, ry, rz));
        const Eigen::Vector3d hi = spec_half.world_to_cell(
            box.center + Eigen::Vector3d(rx, ry, rz));

        const int i0 = std::max(0, static_cast<int>(std::floor(lo.x())));
        const int j0 = std::max(0, static_cast<int>(std::floor(lo.y())));
        const int k0 = std::max(0, static_cast<int>(std::floor(lo.z())));
        const int i1 = std::min(spec_half.dims[0] - 1, static_cast<int>(std::floor(hi.x())));
        const int j1 = std::min(spec_half.dims[1] - 1, static_cast<int>(std::floor(hi.y())));
        const int k1 = std::min(spec_half.dims[2] - 1, static_cast<int>(std::floor(hi.z())));

        for (int k = k0; k <= k1; ++k) {
            for (int j = j0; j <= j1; ++j) {
                for (int i = i0; i <= i1; ++i) {
                    if (box.contains(spec_half.cell_center(i, j, k))) {
                        index.cells[spec_half.cell_index(i, j, k)].push_back(
                            static_cast<int>(qi));
                    }
                }
            }
        }
    }
    return index;
}

DqaParams DqaParams::make(int channels, int query_dim) {
    DqaParams p;
    p.w_q = LinearLayer::make(channels, channels, Activation::none);
    p.w_kv = LinearLayer::make(query_dim, channels, Activation::none);
    p.w_gate = LinearLayer::make(2 * channels, channels, Activation::sigmoid);
    p.pos_enc = LinearLayer::make(3, channels, Activation::none);
    p.ffn0 = LinearLayer::make(channels, 4 * channels, Activation::relu);
    p.ffn1 = LinearLayer::make(4 * channels, channels, Activation::none);
    p.norm_in_scale.assign(channels, 1.0f);
    p.norm_in_shift.assign(channels, 0.0f);
    p.norm_out_scale.assign(channels, 1.0f);
    p.norm_out_shift.assign(channels, 0.0f);
    return p;
}

void DqaParams::bind(std::vector<ParamBinding>& out, const std::string& prefix,
                     const std::string& ffn_prefix) {
    bind_linear(out, prefix + ".w_q", w_q);
    bind_linear(out, prefix + ".w_kv", w_kv);
    bind_linear(out, prefix + ".w_gate", w_gate);
    bind_linear(out, prefix + ".pos_enc", pos_enc);
    bind_linear(out, ffn_prefix + ".0", ffn0);
    bind_linear(out, ffn_prefix + ".1", ffn1);
    bind_vector(out, ffn_prefix + ".norm_in.scale", norm_in_scale);
    bind_vector(out, ffn_prefix + ".norm_in.shift", norm_in_shift);
    bind_vector(out, ffn_prefix + ".norm_out.scale", norm_out_scale);
    bind_vector(out, ffn_prefix + ".norm_out.shift", norm_out_shift);
}

std::vector<double> dqa_cell_attention(const DqaParams& params,
                                       std::span<const float> cell_feature,
                                       const Eigen::Vector3d& normalized_pos,
                                       const std::vector<std::vector<float>>& kv) {
    const int C = params.w_q.in_dim;
    const float pos_in[3] = {static_cast<float>(normalized_pos.x()),
                             static_cast<float>(normalized_pos.y()),
                             static_cast<float>(normalized_pos.z())};
    const std::vector<float> pos = params.pos_enc.apply(std::span<const float>(pos_in, 3));

    std::vector<float> q_in(cell_feature.begin(), cell_feature.end());
    for (int c = 0; c < C; ++c) q_in[c] += pos[c];
    const std::vector<float> qv = params.w_q.apply(q_in);

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(C));
    std::vector<double> logits(kv.size());
    for (std::size_t j = 0; j < kv.size(); ++j) {
        double dot = 0.0;
        for (int c = 0; c < C; ++c) dot += static_cast<double>(qv[c]) * kv[j][c];
        logits[j] = dot * inv_sqrt_d;
    }
    return softmax(logits);
}

VoxelVolume dqa(const VoxelVolume& v_sa, const std::vector<InstanceQuery>& selected,
                const VoxelQueryIndex& index, const DqaParams& params) {
    const int C = v_sa.channels();
    require(params.w_q.in_dim == C, "dqa: channel mismatch");
    VoxelVolume out = v_sa; // un-indexed cells stay bit-identical

    // Shared key/value projection per query, computed once.
    std::vector<std::vector<float>> kv(selected.size());
    for (std::size_t j = 0; j < selected.size(); ++j) {
        kv[j] = params.w_kv.apply(selected[j].feature);
    }

    const std::int64_t cells = v_sa.cells();
    const int X = v_sa.dim_x(), Y = v_sa.dim_y(), Z = v_sa.dim_z();

    std::vector<std::pair<std::int64_t, const std::vector<int>*>> work;
    work.reserve(index.cells.size());
    for (const auto& [cell, list] : index.cells) {
        if (!list.empty()) work.emplace_back(cell, &list);
    }

    parallel_for(0, static_cast<std::int64_t>(work.size()), [&](std::int64_t w0, std::int64_t w1) {
        std::vector<float> cell_feat(static_cast<std::size_t>(C));
        std::vector<float> gate_in(static_cast<std::size_t>(2 * C));
        std::vector<std::vector<float>> cell_kv;
        for (std::int64_t w = w0; w < w1; ++w) {
            const std::int64_t cell = work[w].first;
            const std::vector<int>& list = *work[w].second;
            require(cell >= 0 && cell < cells, "dqa: cell index out of range");

            const int x = static_cast<int>(cell % X);
            const int y = static_cast<int>((cell / X) % Y);
            const int z = static_cast<int>(cell / (static_cast<std::int64_t>(X) * Y));
            for (int c = 0; c < C; ++c) cell_feat[c] = v_sa.data()[c * cells + cell];

            cell_kv.clear();
            for (int j : list) cell_kv.push_back(kv[static_cast<std::size_t>(j)]);
            const Eigen::Vector3d pos((x + 0.5) / X, (y + 0.5) / Y, (z + 0.5) / Z);
            const std::vector<double> alpha = dqa_cell_attention(params, cell_feat, pos, cell_kv);

            std::vector<double> zacc(static_cast<std::size_t>(C), 0.0);
            for (std::size_t j = 0; j < cell_kv.size(); ++j) {
                for (int c = 0; c < C; ++c) zacc[c] += alpha[j] * cell_kv[j][c];
            }

            for (int c = 0; c < C; ++c) {
                gate_in[c] = cell_feat[c];
                gate_in[C + c] = static_cast<float>(zacc[c]);
            }
            const std::vector<float> gate = params.w_gate.apply(gate_in);

            for (int c = 0; c < C; ++c) {
                out.data()[c * cells + cell] = static_cast<float>(
                    static_cast<double>(cell_feat[c]) + static_cast<double>(gate[c]) * zacc[c]);
            }
        }
    });
    return out;
}

namespace {

void standardize(std::span<const float> in, std::span<float> out,
                 std::span<const float> scale, std::span<const float> shift) {
    const int n = static_cast<int>(in.size());
    double mean = 0.0;
    for (float v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (float v : in) {
        const double d = v - mean;
        var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int i = 0; i < n; ++i) {
        out[i] = static_cast<float>((in[i] - mean) * inv * scale[i] + shift[i]);
    }
}

} // namespace

VoxelVolume ffn_residual(const VoxelVolume& v_dqa, const DqaParams& params) {
    const int C = v_dqa.channels();
    require(params.ffn0.in_dim == C, "ffn_residual: channel mismatch");
    VoxelVolume out(C, v_dqa.dims());
    const std::int64_t cells = v_dqa.cells();

    constexpr std::int64_t kBlock = 512;
    const std::int64_t blocks = (cells + kBlock - 1) / kBlock;
    parallel_for(0, blocks, [&](std::int64_t b0, std::int64_t b1) {
        std::vector<float> cell(static_cast<std::size_t>(C));
        std::vector<float> normed(static_cast<std::size_t>(C));
        std::vector<float> summed(static_cast<std::size_t>(C));
        for (std::int64_t b = b0; b < b1; ++b) {
            const std::int64_t lo = b * kBlock;
            const std::int64_t hi = std::min(cells, lo + kBlock);
            for (std::int64_t i = lo; i < hi; ++i) {
                for (int c = 0; c < C; ++c) cell[c] = v_dqa.data()[c * cells + i];
                standardize(cell, normed, params.norm_in_scale, params.norm_in_shift);
                const std::vector<float> f = params.ffn1.apply(params.ffn0.apply(normed));
                for (int c = 0; c < C; ++c) summed[c] = cell[c] + f[c];
                standardize(summed, normed, params.norm_out_scale, params.norm_out_shift);
                for (int c = 0; c < C; ++c) out.data()[c * cells + i] = normed[c];
            }
        }
    });
    return out;
}

} // namespace streamocc
