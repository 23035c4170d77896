#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace streamocc {

/// SE(3) pose stored as rotation matrix + translation. The matrix form is
/// kept (rather than a quaternion) because frame changes are chained as plain
/// matrix products.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    static RigidTransform translate(double x, double y, double z) {
        RigidTransform t;
        t.translation = Eigen::Vector3d(x, y, z);
        return t;
    }

    /// Rotation about +z by yaw radians (right-handed).
    static RigidTransform rot_z(double yaw) {
        RigidTransform t;
        t.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        return t;
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    RigidTransform inverse() const {
        RigidTransform t;
        t.rotation = rotation.transpose();
        t.translation = -(t.rotation * translation);
        return t;
    }

    /// Max |R^T R - I| entry; 0 for an exactly orthonormal rotation.
    double orthonormality_error() const {
        return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    }
};

/// compose(a, b): apply b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

struct EgoPose {
    int timestep = 0;
    RigidTransform ego_to_global;
};

/// Frame-change operator from the previous ego frame to the current one:
/// T = inv(curr.ego_to_global) * prev.ego_to_global. A point fixed in the
/// world and expressed in prev's ego frame maps through T to its coordinates
/// in curr's ego frame.
RigidTransform relative_transform(const EgoPose& prev, const EgoPose& curr);

enum class GridFrame { ego, lidar };

const char* to_string(GridFrame f);
GridFrame grid_frame_from_string(const std::string& s);

/// Voxel lattice geometry. Cells are cubes of side `resolution`; cell (i,j,k)
/// spans [min_corner + (i,j,k)*res, min_corner + (i+1,j+1,k+1)*res). In
/// continuous cell coordinates the center of cell i sits at i + 0.5.
///
/// Linear cell order is x-fastest: index = i + dims[0]*(j + dims[1]*k).
struct GridSpec {
    std::array<int, 3> dims{1, 1, 1};
    Eigen::Vector3d min_corner = Eigen::Vector3d::Zero();
    double resolution = 1.0;
    GridFrame frame = GridFrame::ego;

    void validate() const; // throws ContractViolation on bad dims/resolution

    Eigen::Vector3d max_corner() const {
        return min_corner + resolution * Eigen::Vector3d(dims[0], dims[1], dims[2]);
    }

    std::int64_t cell_count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }

    std::int64_t cell_index(int i, int j, int k) const {
        return i + static_cast<std::int64_t>(dims[0]) * (j + static_cast<std::int64_t>(dims[1]) * k);
    }

    bool contains_cell(int i, int j, int k) const {
        return i >= 0 && i < dims[0] && j >= 0 && j < dims[1] && k >= 0 && k < dims[2];
    }

    Eigen::Vector3d cell_center(int i, int j, int k) const {
        return min_corner + resolution * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
    }

    /// Metric point -> continuous cell coordinates (cell centers at n + 0.5).
    Eigen::Vector3d world_to_cell(const Eigen::Vector3d& p) const {
        return (p - min_corner) / resolution;
    }

    /// Integer cell containing p, or false if outside the extent.
    bool cell_of(const Eigen::Vector3d& p, std::array<int, 3>& out) const;

    /// Same extent at half the cell count per axis (double resolution).
    /// Requires even dims.
    GridSpec half() const;

    /// 200x200x16 ego-frame grid, x,y in [-40,40], z in [-1,5.4], 0.4 m cells.
    static GridSpec occ3d();
    /// 200x200x16 lidar-frame grid, x,y in [-50,50], z in [-5,3], 0.5 m cells.
    static GridSpec surroundocc();
};

/// Cell centers in metric coordinates, x-fastest order.
std::vector<Eigen::Vector3d> cell_centers(const GridSpec& spec);

/// Yaw-oriented 3D box. `size` is (length, width, height) along the box's
/// local x/y/z at yaw = 0.
struct OrientedBox {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Ones();
    double yaw = 0.0;

    /// Point containment, boundary inclusive.
    bool contains(const Eigen::Vector3d& p) const;

    /// BEV footprint corners (counter-clockwise, 4 points in the xy plane).
    std::array<Eigen::Vector2d, 4> bev_corners() const;
};

/// Area of intersection of two BEV footprints (yaw-aware convex clipping).
double bev_intersection_area(const OrientedBox& a, const OrientedBox& b);

/// BEV IoU of two oriented boxes.
double bev_iou(const OrientedBox& a, const OrientedBox& b);

} // namespace streamocc
