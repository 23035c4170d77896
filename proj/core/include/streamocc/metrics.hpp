#pragma once

#include "streamocc/geometry.hpp"
#include "streamocc/semantic_grid.hpp"
#include "streamocc/voxel_volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace streamocc {

// ---------------------------------------------------------------------------
// Voxel IoU / mIoU

/// Per-class and binary-occupancy confusion totals; accumulates across frames.
struct ConfusionCounts {
    int num_classes = 0;
    std::vector<std::int64_t> tp, fp, fn; // per semantic class, index 0 = class id 1
    std::int64_t geo_tp = 0, geo_fp = 0, geo_fn = 0;

    explicit ConfusionCounts(int num_classes = 0);
    void accumulate(const SemanticGrid& pred, const SemanticGrid& gt, bool use_mask);
};

struct IouResult {
    std::vector<double> per_class; // NaN where the class is absent on both sides
    double miou = 0.0;             // mean over defined classes
    double geometry_iou = 0.0;
};

IouResult iou_from_confusion(const ConfusionCounts& counts);
IouResult iou_miou(const SemanticGrid& pred, const SemanticGrid& gt, bool use_mask = false);

// ---------------------------------------------------------------------------
// RayIoU

/// Angular ray lattice cast from a fixed origin. This reconstructs the
/// ray-based metric from its definition (first-hit depth + class agreement
/// within distance thresholds); it is not the benchmark's official ray set.
struct RaySetConfig {
    int n_azimuth = 900;
    int n_elevation = 32;
    double azimuth_min = -3.14159265358979323846;
    double azimuth_max = 3.14159265358979323846;
    double elevation_min = -0.5235987755982988; // -30 deg
    double elevation_max = 0.17453292519943295; //  10 deg

    std::vector<Eigen::Vector3d> directions() const;
};

struct RayHit {
    bool hit = false;
    std::array<int, 3> cell{-1, -1, -1};
    int class_id = 0;
    double depth = 0.0; // meters along the ray to the first occupied cell
};

/// Exact first-occupied-cell traversal (Amanatides-Woo DDA). `origin` is in
/// the grid's metric frame and must be inside the extent; `dir` need not be
/// normalized (depth is measured in units of |dir|... pass unit vectors).
RayHit cast_ray(const SemanticGrid& grid, const GridSpec& spec, const Eigen::Vector3d& origin,
                const Eigen::Vector3d& dir);

/// Per-class ray confusion at the standard thresholds (1, 2, 4 m).
struct RayCounts {
    int num_classes = 0;
    // [threshold][class]
    std::array<std::vector<std::int64_t>, 3> tp, fp, fn;

    explicit RayCounts(int num_classes = 0);
    void accumulate(const SemanticGrid& pred, const SemanticGrid& gt, const GridSpec& spec,
                    const Eigen::Vector3d& origin, const RaySetConfig& rays);
};

struct RayIouResult {
    double at_1m = 0.0, at_2m = 0.0, at_4m = 0.0;
    double mean = 0.0;
};

RayIouResult rayiou_from_counts(const RayCounts& counts);
RayIouResult rayiou(const SemanticGrid& pred, const SemanticGrid& gt, const GridSpec& spec,
                    const Eigen::Vector3d& origin, const RaySetConfig& rays);

// ---------------------------------------------------------------------------
// Losses

struct LossWeights {
    double occ = 10.0;
    double fore = 10.0;
    double bin = 10.0;
};

struct LossReport {
    double occ = 0.0;
    double fore = 0.0;
    double bin = 0.0;
    double total = 0.0;
    bool has_fore = false;
    bool has_bin = false;
};

/// Mean cross-entropy of the semantic logits (classes incl. empty), optional
/// forecast cross-entropy and binary-occupancy BCE; total applies the fixed
/// weights. Null logits skip the corresponding term.
LossReport losses(const VoxelVolume* occ_logits, const VoxelVolume* fore_logits,
                  const VoxelVolume* bin_logits, const SemanticGrid& gt,
                  const LossWeights& weights = {});

// ---------------------------------------------------------------------------
// Aggregate report

struct MetricReport {
    int frames = 0;
    int num_classes = 0;
    std::vector<double> per_class_iou; // NaN = undefined
    double miou = 0.0;
    double geometry_iou = 0.0;
    bool has_rayiou = false;
    RayIouResult ray;
    LossReport loss;
    double mean_selected_queries = 0.0;

    /// Key-value text with fixed key order and %.6f formatting; byte-stable
    /// for identical inputs.
    std::string to_text() const;
    std::string to_json() const;
};

} // namespace streamocc
