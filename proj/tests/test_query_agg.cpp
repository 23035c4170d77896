#include "streamocc/query_agg.hpp"

#include "streamocc/error.hpp"
#include "streamocc/rng.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace streamocc;
using testutil::bit_equal;
using testutil::fill_random;

namespace {

GridSpec half_spec(std::array<int, 3> dims, double res = 0.8) {
    GridSpec spec;
    spec.dims = dims;
    spec.min_corner = -0.5 * res * Eigen::Vector3d(dims[0], dims[1], dims[2]);
    spec.resolution = res;
    return spec;
}

SceneFrame frame_with_boxes(const std::vector<DynamicBoxState>& boxes, int timestep = 0) {
    SceneFrame frame;
    frame.timestep = timestep;
    frame.ego.timestep = timestep;
    frame.gt_grid = SemanticGrid({4, 4, 4}, ClassTable::kNumClasses);
    frame.dynamic_boxes = boxes;
    return frame;
}

DynamicBoxState make_box(int class_id, Eigen::Vector3d center, Eigen::Vector3d size,
                         double yaw = 0.0, int track_id = 0) {
    DynamicBoxState b;
    b.class_id = class_id;
    b.box.center = center;
    b.box.size = size;
    b.box.yaw = yaw;
    b.track_id = track_id;
    return b;
}

InstanceQuery make_query(double conf, int class_id, Eigen::Vector3d center,
                         Eigen::Vector3d size, double yaw = 0.0) {
    InstanceQuery q;
    q.confidence = conf;
    q.class_id = class_id;
    q.box.center = center;
    q.box.size = size;
    q.box.yaw = yaw;
    return q;
}

} // namespace

// ---------------------------------------------------------------------------
// detector_source

TEST(Detector, ZeroNoiseFullConfidenceReproducesGt) {
    DetectorConfig cfg;
    cfg.center_sigma = cfg.size_sigma = cfg.yaw_sigma = 0.0;
    cfg.conf_mean = 1.0;
    cfg.conf_sigma = 0.0;
    DetectorParams params = DetectorParams::make(ClassTable::kNumClasses, 8);

    const auto boxes = std::vector<DynamicBoxState>{
        make_box(5, {1.0, 2.0, 0.5}, {4.0, 1.8, 1.6}, 0.3, 7),
        make_box(8, {-2.0, 0.0, 0.9}, {0.6, 0.6, 1.7}, 0.0, 9)};
    const SceneFrame frame = frame_with_boxes(boxes);
    const auto queries =
        detector_source(frame, StreamState::cold_start(), cfg, params);

    ASSERT_EQ(queries.size(), 2u);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        EXPECT_EQ(queries[i].class_id, boxes[i].class_id);
        EXPECT_EQ(queries[i].track_id, boxes[i].track_id);
        EXPECT_DOUBLE_EQ(queries[i].confidence, 1.0);
        EXPECT_LT((queries[i].box.center - boxes[i].box.center).norm(), 1e-12);
        EXPECT_LT((queries[i].box.size - boxes[i].box.size).norm(), 1e-12);
        EXPECT_DOUBLE_EQ(queries[i].box.yaw, boxes[i].box.yaw);
    }
}

TEST(Detector, RespectsQueryBudget) {
    DetectorConfig cfg;
    cfg.max_queries = 2;
    DetectorParams params = DetectorParams::make(ClassTable::kNumClasses, 4);
    std::vector<DynamicBoxState> boxes;
    for (int i = 0; i < 5; ++i) {
        boxes.push_back(make_box(5, {double(i), 0.0, 0.5}, {1.0, 1.0, 1.0}, 0.0, i));
    }
    const auto queries =
        detector_source(frame_with_boxes(boxes), StreamState::cold_start(), cfg, params);
    EXPECT_EQ(queries.size(), 2u);
    EXPECT_EQ(DetectorConfig{}.max_queries, 900);
}

TEST(Detector, SameSeedSameStream) {
    DetectorConfig cfg;
    cfg.seed = 1234;
    DetectorParams params = DetectorParams::make(ClassTable::kNumClasses, 4);
    const auto boxes = std::vector<DynamicBoxState>{
        make_box(5, {1.0, 2.0, 0.5}, {4.0, 1.8, 1.6}, 0.3, 0)};
    const SceneFrame frame = frame_with_boxes(boxes, 3);

    const auto a = detector_source(frame, StreamState::cold_start(), cfg, params);
    const auto b = detector_source(frame, StreamState::cold_start(), cfg, params);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(a[0].box.center, b[0].box.center);
    EXPECT_EQ(a[0].confidence, b[0].confidence);
    EXPECT_EQ(a[0].feature, b[0].feature);

    cfg.seed = 1235;
    const auto c = detector_source(frame, StreamState::cold_start(), cfg, params);
    EXPECT_NE(a[0].box.center, c[0].box.center);
}

TEST(Detector, FeatureIsEmbeddingPlusBoxProjection) {
    DetectorParams params = DetectorParams::make(3, 2);
    params.class_embed = {
        0, 0,       // empty
        1, 2,       // class 1
        3, 4,       // class 2
        5, 6};      // class 3
    params.box_proj.weights.assign(14, 0.0f);
    params.box_proj.weights[0] = 1.0f; // out0 += cx
    params.box_proj.bias = {0.0f, 10.0f};

    OrientedBox box;
    box.center = Eigen::Vector3d(2.5, 0, 0);
    box.size = Eigen::Vector3d(1, 1, 1);
    const auto f = params.feature_of(2, box);
    EXPECT_FLOAT_EQ(f[0], 3.0f + 2.5f);
    EXPECT_FLOAT_EQ(f[1], 4.0f + 10.0f);
}

TEST(Detector, ReplayRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "streamocc_replay_test.txt").string();
    {
        std::ofstream f(path);
        f << "# frame track class conf cx cy cz l w h yaw\n";
        f << "0 11 5 0.9 1.0 2.0 0.5 4.0 1.8 1.6 0.25\n";
        f << "1 11 5 0.8 1.5 2.0 0.5 4.0 1.8 1.6 0.25\n";
    }
    DetectorConfig cfg;
    cfg.mode = DetectorMode::replay;
    cfg.replay_path = path;
    DetectorParams params = DetectorParams::make(ClassTable::kNumClasses, 4);

    const auto q0 = detector_source(frame_with_boxes({}, 0), StreamState::cold_start(), cfg,
                                    params);
    ASSERT_EQ(q0.size(), 1u);
    EXPECT_EQ(q0[0].track_id, 11);
    EXPECT_NEAR(q0[0].box.center.x(), 1.0, 1e-12);
    const auto q1 = detector_source(frame_with_boxes({}, 1), StreamState::cold_start(), cfg,
                                    params);
    ASSERT_EQ(q1.size(), 1u);
    EXPECT_NEAR(q1[0].box.center.x(), 1.5, 1e-12);
    std::filesystem::remove(path);
}

TEST(Detector, ReplayErrorsNameLine) {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "streamocc_replay_bad.txt").string();
    {
        std::ofstream f(path);
        f << "0 11 5 0.9 1.0 2.0 0.5 4.0 1.8 1.6 0.25\n";
        f << "0 12 5 not_a_number\n";
    }
    try {
        parse_replay_file(path);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// v2q_deform_attn

TEST(V2q, ZeroNetsSampleQueryCenterWithUniformWeights) {
    // H=1, O=2, zero offsets and zero weight logits: both samples land on the
    // query center with alpha = 0.5 each, so the update is
    // W_out * W_val * sample(center).
    const GridSpec spec = half_spec({6, 6, 4});
    const int C = 2;
    DeformAttnParams params = DeformAttnParams::make(C, C, 1, 2);
    // value_proj: [[1, 0], [0, 2]]; out_proj: [[3, 0], [0, 1]]
    params.value_proj[0].weights = {1.0f, 0.0f, 0.0f, 2.0f};
    params.out_proj[0].weights = {3.0f, 0.0f, 0.0f, 1.0f};

    VoxelVolume v_sa(C, spec.dims);
    v_sa.fill(0.0f);
    // Put a known feature at an exact cell center.
    v_sa.at(0, 3, 2, 1) = 0.5f;
    v_sa.at(1, 3, 2, 1) = -1.0f;

    InstanceQuery q = make_query(0.9, 5, spec.cell_center(3, 2, 1), {1, 1, 1});
    q.feature = {10.0f, 20.0f};

    const auto alpha = v2q_attention_weights(params, q.feature);
    ASSERT_EQ(alpha.size(), 1u);
    EXPECT_NEAR(alpha[0][0], 0.5, 1e-12);
    EXPECT_NEAR(alpha[0][1], 0.5, 1e-12);

    const auto out = v2q_deform_attn({q}, v_sa, params, spec);
    // update = out_proj(value_proj([0.5, -1])) = out_proj([0.5, -2]) = [1.5, -2]
    EXPECT_NEAR(out[0].feature[0], 10.0f + 1.5f, 1e-5);
    EXPECT_NEAR(out[0].feature[1], 20.0f - 2.0f, 1e-5);
}

TEST(V2q, ZeroOutputProjectionIsResidualIdentity) {
    const GridSpec spec = half_spec({6, 6, 4});
    Rng rng(41);
    const int C = 4;
    DeformAttnParams params = DeformAttnParams::make(C, C, 2, 3);
    for (float& w : params.offset_net.weights) w = static_cast<float>(rng.uniform(-1, 1));
    for (float& w : params.weight_net.weights) w = static_cast<float>(rng.uniform(-1, 1));
    for (auto& l : params.value_proj)
        for (float& w : l.weights) w = static_cast<float>(rng.uniform(-1, 1));
    // out_proj stays zero.

    VoxelVolume v_sa(C, spec.dims);
    fill_random(v_sa, rng);
    InstanceQuery q = make_query(0.9, 5, {0.3, -0.2, 0.1}, {1, 1, 1});
    q.feature = {1.0f, -2.0f, 3.0f, -4.0f};
    const auto out = v2q_deform_attn({q}, v_sa, params, spec);
    EXPECT_EQ(out[0].feature, q.feature);
}

TEST(V2q, AttentionWeightsNormalizePerHead) {
    Rng rng(42);
    const int C = 8;
    DeformAttnParams params = DeformAttnParams::make(C, C, 4, 5);
    for (float& w : params.weight_net.weights) w = static_cast<float>(rng.uniform(-2, 2));
    for (float& b : params.weight_net.bias) b = static_cast<float>(rng.uniform(-2, 2));

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> feature(C);
        for (float& v : feature) v = static_cast<float>(rng.uniform(-3, 3));
        const auto alpha = v2q_attention_weights(params, feature);
        ASSERT_EQ(alpha.size(), 4u);
        for (const auto& head : alpha) {
            double sum = 0.0;
            for (double a : head) sum += a;
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

TEST(V2q, OutOfGridSamplesContributeZero) {
    const GridSpec spec = half_spec({4, 4, 2});
    const int C = 2;
    DeformAttnParams params = DeformAttnParams::make(C, C, 1, 1);
    params.value_proj[0].weights = {1.0f, 0.0f, 0.0f, 1.0f};
    params.out_proj[0].weights = {1.0f, 0.0f, 0.0f, 1.0f};
    VoxelVolume v_sa(C, spec.dims);
    v_sa.fill(5.0f);

    InstanceQuery q = make_query(0.9, 5, {100.0, 100.0, 100.0}, {1, 1, 1});
    q.feature = {1.0f, 1.0f};
    const auto out = v2q_deform_attn({q}, v_sa, params, spec);
    EXPECT_EQ(out[0].feature, q.feature); // sampled zeros, zero update
}

// ---------------------------------------------------------------------------
// select_queries

TEST(Select, LowConfidenceRejectedRegardlessOfOverlap) {
    SelectionConfig cfg;
    const auto gt = std::vector<GtBox>{{5, make_query(1, 5, {0, 0, 0}, {4, 2, 1.5}).box}};
    const auto q = make_query(0.2, 5, {0, 0, 0}, {4, 2, 1.5}); // perfect box, conf 0.2
    const auto kept_train = select_queries({q}, gt, SelectMode::train, cfg);
    EXPECT_TRUE(kept_train.empty());
    const auto kept_infer = select_queries({q}, std::nullopt, SelectMode::infer, cfg);
    EXPECT_TRUE(kept_infer.empty());
}

TEST(Select, LargeObjectAcceptedByIou) {
    SelectionConfig cfg;
    // IoU 0.5: two 4x2 footprints offset along x by 4/3 m.
    const Eigen::Vector3d size(4.0, 2.0, 1.5);
    const auto gt = std::vector<GtBox>{{5, make_query(1, 5, {0, 0, 0}, size).box}};
    const auto q = make_query(0.4, 5, {4.0 / 3.0, 0, 0}, size);
    ASSERT_NEAR(bev_iou(q.box, gt[0].box), 0.5, 1e-9);
    const auto kept = select_queries({q}, gt, SelectMode::train, cfg);
    EXPECT_EQ(kept.size(), 1u);
}

TEST(Select, LargeObjectRejectedBelowIouThreshold) {
    SelectionConfig cfg;
    const Eigen::Vector3d size(4.0, 2.0, 1.5);
    const auto gt = std::vector<GtBox>{{5, make_query(1, 5, {0, 0, 0}, size).box}};
    // IoU 1/3 < 0.4: offset by half the length.
    const auto q = make_query(0.9, 5, {2.0, 0, 0}, size);
    ASSERT_NEAR(bev_iou(q.box, gt[0].box), 1.0 / 3.0, 1e-9);
    EXPECT_TRUE(select_queries({q}, gt, SelectMode::train, cfg).empty());
}

TEST(Select, SmallObjectGeometricScore) {
    SelectionConfig cfg;
    // D_center = 0.3 m, D_size = 0.5 m -> 2.0*0.3 + 1.0*0.5 = 1.1 < 1.5.
    const auto gt =
        std::vector<GtBox>{{8, make_query(1, 8, {0, 0, 0}, {0.6, 0.6, 1.7}).box}};
    const auto q = make_query(0.5, 8, {0.3, 0, 0}, {0.8, 0.8, 1.6});
    ASSERT_NEAR((q.box.size - gt[0].box.size).lpNorm<1>(), 0.5, 1e-12);
    const auto kept = select_queries({q}, gt, SelectMode::train, cfg);
    EXPECT_EQ(kept.size(), 1u);

    // Push the center deviation over the limit: 2.0*0.8 + 0.5 = 2.1 >= 1.5.
    const auto far = make_query(0.5, 8, {0.8, 0, 0}, {0.8, 0.8, 1.6});
    EXPECT_TRUE(select_queries({far}, gt, SelectMode::train, cfg).empty());
}

TEST(Select, TrainModeRequiresGt) {
    const auto q = make_query(0.9, 5, {0, 0, 0}, {1, 1, 1});
    EXPECT_THROW(select_queries({q}, std::nullopt, SelectMode::train, SelectionConfig{}),
                 ContractViolation);
}

TEST(Select, EachGtClaimedOnce) {
    SelectionConfig cfg;
    const Eigen::Vector3d size(4.0, 2.0, 1.5);
    const auto gt = std::vector<GtBox>{{5, make_query(1, 5, {0, 0, 0}, size).box}};
    // Two near-perfect queries on the same GT: only the more confident stays.
    const auto q1 = make_query(0.9, 5, {0.1, 0, 0}, size);
    const auto q2 = make_query(0.8, 5, {0.05, 0, 0}, size);
    const auto kept = select_queries({q2, q1}, gt, SelectMode::train, cfg);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_DOUBLE_EQ(kept[0].confidence, 0.9);
}

TEST(Select, MonotoneInConfidence) {
    Rng rng(43);
    SelectionConfig cfg;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Vector3d size(4.0, 2.0, 1.5);
        std::vector<GtBox> gt{{5, make_query(1, 5, {0, 0, 0}, size).box}};
        auto q = make_query(rng.uniform(0.31, 0.9), 5,
                            {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0}, size);
        const bool selected = !select_queries({q}, gt, SelectMode::train, cfg).empty();
        if (selected) {
            q.confidence = std::min(1.0, q.confidence + rng.uniform(0.0, 0.1));
            EXPECT_FALSE(select_queries({q}, gt, SelectMode::train, cfg).empty());
        }
    }
}

// ---------------------------------------------------------------------------
// build_voxel_query_index

TEST(Index, BoxCoveringExactlyOneCell) {
    const GridSpec spec = half_spec({10, 10, 4});
    // Cell (5, 5, 2) spans [0.0, 0.8) on each axis of its corner; cover it.
    InstanceQuery q = make_query(0.9, 5, spec.cell_center(5, 5, 2), {0.7, 0.7, 0.7});
    const auto index = build_voxel_query_index({q}, spec);
    ASSERT_EQ(index.indexed_cell_count(), 1u);
    EXPECT_EQ(index.cells.begin()->first, spec.cell_index(5, 5, 2));
    EXPECT_EQ(index.cells.begin()->second, std::vector<int>{0});
}

TEST(Index, AxisAlignedBoxMatchesBruteForce) {
    const GridSpec spec = half_spec({10, 10, 6});
    InstanceQuery q = make_query(0.9, 5, {0.0, 0.0, 0.0}, {2.0, 2.0, 2.0});
    const auto index = build_voxel_query_index({q}, spec);
    std::size_t inside = 0;
    for (int k = 0; k < spec.dims[2]; ++k)
        for (int j = 0; j < spec.dims[1]; ++j)
            for (int i = 0; i < spec.dims[0]; ++i) {
                const bool contains = q.box.contains(spec.cell_center(i, j, k));
                const bool indexed = index.cells.count(spec.cell_index(i, j, k)) > 0;
                EXPECT_EQ(contains, indexed);
                inside += contains;
            }
    EXPECT_EQ(index.indexed_cell_count(), inside);
    EXPECT_GT(inside, 0u);
}

TEST(Index, YawedBoxMatchesBruteForce) {
    const GridSpec spec = half_spec({12, 12, 4});
    InstanceQuery q = make_query(0.9, 5, {0.4, -0.4, 0.0}, {3.0, 1.0, 1.5}, M_PI / 2);
    const auto index = build_voxel_query_index({q}, spec);
    for (int k = 0; k < spec.dims[2]; ++k)
        for (int j = 0; j < spec.dims[1]; ++j)
            for (int i = 0; i < spec.dims[0]; ++i) {
                EXPECT_EQ(q.box.contains(spec.cell_center(i, j, k)),
                          index.cells.count(spec.cell_index(i, j, k)) > 0);
            }
}

TEST(Index, RandomBoxesMatchBruteForceExactly) {
    const GridSpec spec = half_spec({20, 20, 8});
    Rng rng(44);
    std::vector<InstanceQuery> queries;
    for (int i = 0; i < 30; ++i) {
        queries.push_back(make_query(
            0.9, 5,
            {rng.uniform(-7, 7), rng.uniform(-7, 7), rng.uniform(-2.5, 2.5)},
            {rng.uniform(0.4, 4.0), rng.uniform(0.4, 2.5), rng.uniform(0.4, 2.0)},
            rng.uniform(-M_PI, M_PI)));
    }
    const auto index = build_voxel_query_index(queries, spec);

    for (int k = 0; k < spec.dims[2]; ++k)
        for (int j = 0; j < spec.dims[1]; ++j)
            for (int i = 0; i < spec.dims[0]; ++i) {
                std::vector<int> expect;
                for (std::size_t qi = 0; qi < queries.size(); ++qi) {
                    if (queries[qi].box.contains(spec.cell_center(i, j, k)))
                        expect.push_back(static_cast<int>(qi));
                }
                const auto it = index.cells.find(spec.cell_index(i, j, k));
                if (expect.empty()) {
                    EXPECT_EQ(it, index.cells.end());
                } else {
                    ASSERT_NE(it, index.cells.end());
                    EXPECT_EQ(it->second, expect);
                }
            }
}

// ---------------------------------------------------------------------------
// dqa / ffn_residual

TEST(Dqa, EmptyIndexCopiesBitExactly) {
    Rng rng(45);
    const int C = 8;
    VoxelVolume v_sa(C, {6, 6, 4});
    fill_random(v_sa, rng);
    DqaParams params = DqaParams::make(C, C);
    for (float& w : params.w_q.weights) w = static_cast<float>(rng.uniform(-1, 1));
    const VoxelVolume out = dqa(v_sa, {}, VoxelQueryIndex{}, params);
    EXPECT_TRUE(bit_equal(out, v_sa));
}

TEST(Dqa, SingleQuerySoftmaxIsOne) {
    Rng rng(46);
    const int C = 4;
    const GridSpec spec = half_spec({6, 6, 4});
    VoxelVolume v_sa(C, spec.dims);
    fill_random(v_sa, rng);

    DqaParams params = DqaParams::make(C, C);
    for (auto* l : {&params.w_q, &params.w_kv, &params.w_gate, &params.pos_enc}) {
        for (float& w : l->weights) w = static_cast<float>(rng.uniform(-0.5, 0.5));
    }

    InstanceQuery q = make_query(0.9, 5, spec.cell_center(2, 3, 1), {0.7, 0.7, 0.7});
    q.feature.assign(C, 0.5f);
    const auto index = build_voxel_query_index({q}, spec);
    ASSERT_EQ(index.indexed_cell_count(), 1u);
    const std::int64_t cell = index.cells.begin()->first;

    const VoxelVolume out = dqa(v_sa, {q}, index, params);

    // Hand evaluation: alpha = 1, z = W_kv q, g = sigmoid(W_gate [v; z]).
    const std::vector<float> z = params.w_kv.apply(q.feature);
    std::vector<float> gate_in(2 * C);
    for (int c = 0; c < C; ++c) {
        gate_in[c] = v_sa.data()[c * v_sa.cells() + cell];
        gate_in[C + c] = z[c];
    }
    const std::vector<float> g = params.w_gate.apply(gate_in);
    for (int c = 0; c < C; ++c) {
        const float expected = static_cast<float>(
            static_cast<double>(v_sa.data()[c * v_sa.cells() + cell]) +
            static_cast<double>(g[c]) * z[c]);
        EXPECT_NEAR(out.data()[c * out.cells() + cell], expected, 1e-6);
    }
    // All other cells untouched.
    for (std::int64_t i = 0; i < v_sa.size(); ++i) {
        if (i % v_sa.cells() == cell) continue;
        EXPECT_EQ(out.data()[i], v_sa.data()[i]);
    }
}

TEST(Dqa, SaturatedNegativeGateLeavesVolumeNearlyUnchanged) {
    Rng rng(47);
    const int C = 4;
    const GridSpec spec = half_spec({6, 6, 4});
    VoxelVolume v_sa(C, spec.dims);
    fill_random(v_sa, rng);

    DqaParams params = DqaParams::make(C, C);
    for (float& w : params.w_kv.weights) w = static_cast<float>(rng.uniform(-0.5, 0.5));
    for (float& b : params.w_gate.bias) b = -30.0f; // sigmoid saturates to ~0

    InstanceQuery q = make_query(0.9, 5, {0.0, 0.0, 0.0}, {2.0, 2.0, 2.0});
    q.feature.assign(C, 1.0f);
    const auto index = build_voxel_query_index({q}, spec);
    ASSERT_GT(index.indexed_cell_count(), 0u);

    const VoxelVolume out = dqa(v_sa, {q}, index, params);
    EXPECT_LT(testutil::max_abs_diff(out, v_sa), 1e-5);
}

TEST(Dqa, SparsityOnRandomizedScenes) {
    Rng rng(48);
    const int C = 4;
    const GridSpec spec = half_spec({12, 12, 6});
    for (int trial = 0; trial < 5; ++trial) {
        VoxelVolume v_sa(C, spec.dims);
        fill_random(v_sa, rng);
        DqaParams params = DqaParams::make(C, C);
        for (auto* l : {&params.w_q, &params.w_kv, &params.w_gate, &params.pos_enc}) {
            for (float& w : l->weights) w = static_cast<float>(rng.uniform(-1, 1));
            for (float& b : l->bias) b = static_cast<float>(rng.uniform(-1, 1));
        }
        std::vector<InstanceQuery> queries;
        for (int i = 0; i < 3; ++i) {
            auto q = make_query(0.9, 5,
                                {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1)},
                                {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), 1.0},
                                rng.uniform(-M_PI, M_PI));
            q.feature.assign(C, static_cast<float>(rng.uniform(-1, 1)));
            queries.push_back(q);
        }
        const auto index = build_voxel_query_index(queries, spec);
        const VoxelVolume out = dqa(v_sa, queries, index, params);

        for (std::int64_t cell = 0; cell < v_sa.cells(); ++cell) {
            const bool indexed = index.cells.count(cell) > 0;
            for (int c = 0; c < C; ++c) {
                const float a = v_sa.data()[c * v_sa.cells() + cell];
                const float b = out.data()[c * out.cells() + cell];
                if (!indexed) {
                    EXPECT_EQ(a, b); // Eq. 10: untouched cells bit-identical
                }
            }
        }
    }
}

TEST(Dqa, GateBoundsUpdate) {
    // 0 < g < 1 implies |out - in| <= |z| per cell and channel.
    Rng rng(49);
    const int C = 4;
    const GridSpec spec = half_spec({8, 8, 4});
    VoxelVolume v_sa(C, spec.dims);
    fill_random(v_sa, rng);
    DqaParams params = DqaParams::make(C, C);
    for (auto* l : {&params.w_q, &params.w_kv, &params.w_gate, &params.pos_enc}) {
        for (float& w : l->weights) w = static_cast<float>(rng.uniform(-1, 1));
    }
    InstanceQuery q = make_query(0.9, 5, {0, 0, 0}, {3, 3, 2});
    q.feature.assign(C, 0.7f);
    const auto index = build_voxel_query_index({q}, spec);
    const VoxelVolume out = dqa(v_sa, {q}, index, params);

    const std::vector<float> z = params.w_kv.apply(q.feature);
    for (const auto& [cell, list] : index.cells) {
        for (int c = 0; c < C; ++c) {
            const double delta = std::abs(static_cast<double>(out.data()[c * out.cells() + cell]) -
                                          v_sa.data()[c * v_sa.cells() + cell]);
            EXPECT_LE(delta, std::abs(static_cast<double>(z[c])) + 1e-6);
        }
    }
}

TEST(Dqa, CellAttentionNormalizes) {
    Rng rng(50);
    const int C = 8;
    DqaParams params = DqaParams::make(C, C);
    for (auto* l : {&params.w_q, &params.w_kv, &params.pos_enc}) {
        for (float& w : l->weights) w = static_cast<float>(rng.uniform(-1, 1));
    }
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> cell(C);
        for (float& v : cell) v = static_cast<float>(rng.uniform(-2, 2));
        const int n = 1 + static_cast<int>(rng.next_u64() % 6);
        std::vector<std::vector<float>> kv;
        for (int j = 0; j < n; ++j) {
            std::vector<float> f(C);
            for (float& v : f) v = static_cast<float>(rng.uniform(-2, 2));
            kv.push_back(params.w_kv.apply(f));
        }
        const auto alpha = dqa_cell_attention(
            params, cell, {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)}, kv);
        double sum = 0.0;
        for (double a : alpha) {
            EXPECT_GT(a, 0.0);
            sum += a;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(FfnResidual, ZeroFfnPassesNormalizedInput) {
    const int C = 4;
    DqaParams params = DqaParams::make(C, C); // zero ffn, unit scale, zero shift
    VoxelVolume v(C, {3, 3, 2});
    Rng rng(51);
    fill_random(v, rng);
    const VoxelVolume out = ffn_residual(v, params);

    for (std::int64_t i = 0; i < v.cells(); ++i) {
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += v.data()[c * v.cells() + i];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = v.data()[c * v.cells() + i] - mean;
            var += d * d;
        }
        var /= C;
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        for (int c = 0; c < C; ++c) {
            const double expected = (v.data()[c * v.cells() + i] - mean) * inv;
            EXPECT_NEAR(out.data()[c * out.cells() + i], expected, 1e-5);
        }
    }
}

TEST(FfnResidual, ConstantVolumeStaysConstant) {
    const int C = 4;
    DqaParams params = DqaParams::make(C, C);
    Rng rng(52);
    for (auto* l : {&params.ffn0, &params.ffn1}) {
        for (float& w : l->weights) w = static_cast<float>(rng.uniform(-1, 1));
        for (float& b : l->bias) b = static_cast<float>(rng.uniform(-1, 1));
    }
    VoxelVolume v(C, {4, 4, 2});
    v.fill(3.0f);
    const VoxelVolume out = ffn_residual(v, params);
    for (int c = 0; c < C; ++c) {
        const float first = out.channel(c)[0];
        for (std::int64_t i = 0; i < out.cells(); ++i) EXPECT_EQ(out.channel(c)[i], first);
    }
}

TEST(FfnResidual, FiniteOnWildInputs) {
    const int C = 8;
    DqaParams params = DqaParams::make(C, C);
    Rng rng(53);
    for (auto* l : {&params.ffn0, &params.ffn1}) {
        for (float& w : l->weights) w = static_cast<float>(rng.uniform(-2, 2));
    }
    for (int trial = 0; trial < 20; ++trial) {
        VoxelVolume v(C, {3, 3, 3});
        fill_random(v, rng, -100, 100);
        EXPECT_TRUE(ffn_residual(v, params).all_finite());
    }
}

TEST(Dqa, DeterministicAcrossRuns) {
    Rng rng(54);
    const int C = 4;
    const GridSpec spec = half_spec({8, 8, 4});
    VoxelVolume v_sa(C, spec.dims);
    fill_random(v_sa, rng);
    DqaParams params = DqaParams::make(C, C);
    for (auto* l : {&params.w_q, &params.w_kv, &params.w_gate, &params.pos_enc, &params.ffn0,
                    &params.ffn1}) {
        for (float& w : l->weights) w = static_cast<float>(rng.uniform(-1, 1));
    }
    InstanceQuery q = make_query(0.9, 5, {0, 0, 0}, {2.5, 1.5, 1.5}, 0.4);
    q.feature.assign(C, 0.25f);
    const auto index = build_voxel_query_index({q}, spec);
    const VoxelVolume a = ffn_residual(dqa(v_sa, {q}, index, params), params);
    const VoxelVolume b = ffn_residual(dqa(v_sa, {q}, index, params), params);
    EXPECT_TRUE(bit_equal(a, b));
}
