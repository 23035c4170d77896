#pragma once

#include "streamocc/geometry.hpp"
#include "streamocc/semantic_grid.hpp"
#include "streamocc/voxel_volume.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace streamocc {

/// Pinhole camera rigidly mounted on the ego vehicle, with exact geometric
/// depth and a per-pixel feature image (class signature + seeded noise).
/// Camera axes follow the usual vision convention: +z forward, +x right,
/// +y down. depth_image stores plane depth (distance along camera z);
/// 0 marks pixels that hit nothing.
struct CameraRig {
    Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
    RigidTransform cam_to_ego;
    int width = 0;
    int height = 0;
    int feature_channels = 0;
    std::vector<float> feature_image; // [c][v][u], u fastest
    std::vector<float> depth_image;   // [v][u]

    std::int64_t pixel_index(int u, int v) const {
        return u + static_cast<std::int64_t>(width) * v;
    }
};

/// One ground-truth box in the current ego frame plus its world-frame motion.
struct DynamicBoxState {
    int class_id = 0;
    OrientedBox box;                                    // ego frame
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero(); // global frame, m/s
    int track_id = -1;
};

struct SceneFrame {
    int timestep = 0;
    EgoPose ego;
    SemanticGrid gt_grid; // full-resolution, current ego frame
    std::vector<DynamicBoxState> dynamic_boxes;
    std::vector<CameraRig> cameras;
};

// Scene configuration: sectioned key=value text, sections [grid], [ego],
// [static], [dynamic.N], [camera.N]. See docs/formats.md for the schema.

struct StaticBoxConfig {
    int class_id = 0;
    OrientedBox box; // global frame
};

struct DynamicBoxConfig {
    int class_id = 0;
    Eigen::Vector3d center = Eigen::Vector3d::Zero(); // global frame at t = 0
    Eigen::Vector3d size = Eigen::Vector3d::Ones();
    double yaw = 0.0;
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    int track_id = -1;
};

struct CameraConfig {
    int width = 64;
    int height = 48;
    double fx = 40.0, fy = 40.0, cx = 32.0, cy = 24.0;
    Eigen::Vector3d position = Eigen::Vector3d(0.0, 0.0, 1.2); // ego frame
    double yaw = 0.0;   // about ego +z; 0 looks along ego +x
    double pitch = 0.0; // positive pitches the view down
    int feature_channels = 8;
    double noise_sigma = 0.0;
};

struct SceneConfig {
    GridSpec grid;
    int frames = 8;
    double dt = 0.5;
    /// Ego waypoints (x, y, yaw), interpolated linearly over the sequence.
    std::vector<Eigen::Vector3d> ego_waypoints;
    std::vector<StaticBoxConfig> static_boxes;
    std::vector<DynamicBoxConfig> dynamic_boxes;
    std::vector<CameraConfig> cameras;
    double feature_scale = 1.0; // magnitude of the class signature features

    void validate() const;
    /// Small indoor-style scene used by `gen-scene` when no config is given.
    static SceneConfig default_config();
};

SceneConfig parse_scene_config(const std::string& path);
SceneConfig parse_scene_config_text(const std::string& text, const std::string& origin);

/// Deterministic synthetic world: rasterizes ground truth in each frame's ego
/// frame, advances dynamic boxes by velocity * dt, renders exact depth and
/// noisy class-signature features for every camera.
std::vector<SceneFrame> generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Depth-given lift: every pixel with positive depth unprojects into the ego
/// frame and its feature vector is summed into the containing cell. Points
/// outside the grid extent are dropped.
VoxelVolume lift_splat(const SceneFrame& frame, const GridSpec& spec);

/// Deterministic per-class feature signature (channel c of class k).
float class_signature(int class_id, int channel, double scale = 1.0);

// Scene directory exchange: per-frame grid dumps gt_000000.occ ... plus
// poses.txt with "timestep r00 ... r22 tx ty tz" per line.

void save_scene_dir(const std::string& dir, const std::vector<SceneFrame>& frames,
                    double resolution);

struct LoadedScene {
    std::vector<int> timesteps;
    std::vector<RigidTransform> ego_to_global;
    std::vector<SemanticGrid> grids;
    double resolution = 0.0;
};

LoadedScene load_scene_dir(const std::string& dir);

} // namespace streamocc
