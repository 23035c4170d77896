#include "streamocc/geometry.hpp"

#include "streamocc/error.hpp"
#include "streamocc/rng.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace streamocc;

namespace {

constexpr double kPi = 3.14159265358979323846;

RigidTransform random_pose(Rng& rng) {
    RigidTransform t = RigidTransform::rot_z(rng.uniform(-kPi, kPi));
    // Add a little tilt so rotations are not all pure yaw.
    t.rotation = (Eigen::AngleAxisd(rng.uniform(-0.4, 0.4), Eigen::Vector3d::UnitX()) *
                  Eigen::AngleAxisd(t.rotation))
                     .toRotationMatrix();
    t.translation = Eigen::Vector3d(rng.uniform(-10, 10), rng.uniform(-10, 10),
                                    rng.uniform(-2, 2));
    return t;
}

double max_entry_diff(const RigidTransform& a, const RigidTransform& b) {
    const double rot = (a.rotation - b.rotation).cwiseAbs().maxCoeff();
    const double tr = (a.translation - b.translation).cwiseAbs().maxCoeff();
    return std::max(rot, tr);
}

} // namespace

TEST(RigidTransform, ComposeIdentity) {
    const RigidTransform id = RigidTransform::identity();
    EXPECT_EQ(max_entry_diff(compose(id, id), id), 0.0);
}

TEST(RigidTransform, ComposeCommutingTranslations) {
    const RigidTransform t = compose(RigidTransform::translate(1, 0, 0),
                                     RigidTransform::translate(0, 2, 0));
    EXPECT_NEAR(max_entry_diff(t, RigidTransform::translate(1, 2, 0)), 0.0, 1e-15);
}

TEST(RigidTransform, ComposeInverseRotation) {
    const RigidTransform t =
        compose(RigidTransform::rot_z(kPi / 2), RigidTransform::rot_z(-kPi / 2));
    EXPECT_LT(max_entry_diff(t, RigidTransform::identity()), 1e-6);
}

TEST(RigidTransform, InverseRoundTrip) {
    Rng rng(101);
    for (int i = 0; i < 50; ++i) {
        const RigidTransform t = random_pose(rng);
        EXPECT_LT(t.orthonormality_error(), 1e-6);
        EXPECT_LT(max_entry_diff(compose(t, t.inverse()), RigidTransform::identity()), 1e-6);
    }
}

TEST(RigidTransform, ComposeAssociative) {
    Rng rng(102);
    for (int i = 0; i < 20; ++i) {
        const RigidTransform a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
        EXPECT_LT(max_entry_diff(compose(compose(a, b), c), compose(a, compose(b, c))), 1e-9);
    }
}

TEST(RelativeTransform, StationaryEgoIsIdentity) {
    Rng rng(103);
    for (int i = 0; i < 20; ++i) {
        const EgoPose pose{i, random_pose(rng)};
        const RigidTransform t = relative_transform(pose, pose);
        EXPECT_LT(max_entry_diff(t, RigidTransform::identity()), 1e-9);
    }
}

TEST(RelativeTransform, PureTranslationMapsPointsBackward) {
    // Ego advances +2 m along global x with no rotation: a point fixed in the
    // world moves -2 m along x in the ego's view.
    const EgoPose prev{0, RigidTransform::translate(0, 0, 0)};
    const EgoPose curr{1, RigidTransform::translate(2, 0, 0)};
    const RigidTransform t = relative_transform(prev, curr);
    const Eigen::Vector3d p(5.0, 1.0, 0.5);
    const Eigen::Vector3d mapped = t.apply(p);
    EXPECT_NEAR(mapped.x(), 3.0, 1e-12);
    EXPECT_NEAR(mapped.y(), 1.0, 1e-12);
    EXPECT_NEAR(mapped.z(), 0.5, 1e-12);
}

TEST(RelativeTransform, YawedEgoMatchesManualChain) {
    // Ego rotates +90 degrees about z between frames. Verify with an
    // independent chain: prev-ego -> global -> curr-ego computed from raw
    // trigonometry on three non-collinear points.
    const double yaw_prev = 0.3;
    const double yaw_curr = 0.3 + kPi / 2;
    const Eigen::Vector3d pos_prev(1.0, -2.0, 0.0);
    const Eigen::Vector3d pos_curr(2.5, 0.5, 0.0);

    EgoPose prev{0, RigidTransform::rot_z(yaw_prev)};
    prev.ego_to_global.translation = pos_prev;
    EgoPose curr{1, RigidTransform::rot_z(yaw_curr)};
    curr.ego_to_global.translation = pos_curr;

    const RigidTransform t = relative_transform(prev, curr);

    const Eigen::Vector3d points[3] = {{1, 0, 0}, {0, 1, 0}, {3, 2, 1}};
    for (const auto& p : points) {
        // Manual chain with scalar trig.
        const double cg = std::cos(yaw_prev), sg = std::sin(yaw_prev);
        const Eigen::Vector3d global(cg * p.x() - sg * p.y() + pos_prev.x(),
                                     sg * p.x() + cg * p.y() + pos_prev.y(), p.z());
        const double cc = std::cos(yaw_curr), sc = std::sin(yaw_curr);
        const double dx = global.x() - pos_curr.x();
        const double dy = global.y() - pos_curr.y();
        const Eigen::Vector3d expected(cc * dx + sc * dy, -sc * dx + cc * dy, global.z());

        const Eigen::Vector3d got = t.apply(p);
        EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(RelativeTransform, ChainConsistency) {
    Rng rng(104);
    for (int i = 0; i < 20; ++i) {
        const EgoPose a{0, random_pose(rng)};
        const EgoPose b{1, random_pose(rng)};
        const EgoPose c{2, random_pose(rng)};
        const RigidTransform direct = relative_transform(a, c);
        const RigidTransform chained =
            compose(relative_transform(b, c), relative_transform(a, b));
        EXPECT_LT(max_entry_diff(direct, chained), 1e-6);
    }
}

TEST(GridSpec, UnitCellCenter) {
    GridSpec spec;
    spec.dims = {1, 1, 1};
    spec.min_corner = Eigen::Vector3d::Zero();
    spec.resolution = 1.0;
    const auto centers = cell_centers(spec);
    ASSERT_EQ(centers.size(), 1u);
    EXPECT_EQ(centers[0], Eigen::Vector3d(0.5, 0.5, 0.5));
}

TEST(GridSpec, Occ3dCorners) {
    const GridSpec spec = GridSpec::occ3d();
    const Eigen::Vector3d first = spec.cell_center(0, 0, 0);
    EXPECT_NEAR(first.x(), -39.8, 1e-9);
    EXPECT_NEAR(first.y(), -39.8, 1e-9);
    EXPECT_NEAR(first.z(), -0.8, 1e-9);
    const Eigen::Vector3d last = spec.cell_center(199, 199, 15);
    EXPECT_NEAR(last.x(), 39.8, 1e-9);
    EXPECT_NEAR(last.y(), 39.8, 1e-9);
    EXPECT_NEAR(last.z(), 5.2, 1e-9);
}

TEST(GridSpec, ExtentMatchesDimsTimesResolution) {
    for (const GridSpec& spec : {GridSpec::occ3d(), GridSpec::surroundocc()}) {
        const Eigen::Vector3d extent = spec.max_corner() - spec.min_corner;
        for (int a = 0; a < 3; ++a) {
            EXPECT_NEAR(extent[a], spec.dims[a] * spec.resolution, 1e-9);
        }
    }
}

TEST(GridSpec, SurroundOccExtent) {
    const GridSpec spec = GridSpec::surroundocc();
    EXPECT_EQ(spec.frame, GridFrame::lidar);
    EXPECT_NEAR(spec.min_corner.z(), -5.0, 1e-12);
    EXPECT_NEAR(spec.max_corner().z(), 3.0, 1e-9);
}

TEST(GridSpec, CellCenterRoundTrip) {
    const GridSpec spec = GridSpec::occ3d();
    Rng rng(105);
    for (int n = 0; n < 200; ++n) {
        const int i = static_cast<int>(rng.next_u64() % spec.dims[0]);
        const int j = static_cast<int>(rng.next_u64() % spec.dims[1]);
        const int k = static_cast<int>(rng.next_u64() % spec.dims[2]);
        std::array<int, 3> cell;
        ASSERT_TRUE(spec.cell_of(spec.cell_center(i, j, k), cell));
        EXPECT_EQ(cell[0], i);
        EXPECT_EQ(cell[1], j);
        EXPECT_EQ(cell[2], k);
    }
}

TEST(GridSpec, CellCentersOrderIsXFastest) {
    GridSpec spec;
    spec.dims = {3, 2, 2};
    spec.min_corner = Eigen::Vector3d::Zero();
    spec.resolution = 1.0;
    const auto centers = cell_centers(spec);
    ASSERT_EQ(centers.size(), 12u);
    EXPECT_EQ(centers[1], spec.cell_center(1, 0, 0));
    EXPECT_EQ(centers[3], spec.cell_center(0, 1, 0));
    EXPECT_EQ(centers[6], spec.cell_center(0, 0, 1));
    EXPECT_EQ(spec.cell_index(1, 0, 0), 1);
    EXPECT_EQ(spec.cell_index(0, 1, 0), 3);
    EXPECT_EQ(spec.cell_index(0, 0, 1), 6);
}

TEST(GridSpec, HalfKeepsExtent) {
    const GridSpec spec = GridSpec::occ3d();
    const GridSpec half = spec.half();
    EXPECT_EQ(half.dims[0], 100);
    EXPECT_EQ(half.dims[2], 8);
    EXPECT_NEAR(half.resolution, 0.8, 1e-12);
    EXPECT_LT((half.max_corner() - spec.max_corner()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GridSpec, ValidateRejectsBadSpecs) {
    GridSpec spec;
    spec.dims = {0, 1, 1};
    EXPECT_THROW(spec.validate(), ContractViolation);
    spec.dims = {1, 1, 1};
    spec.resolution = 0.0;
    EXPECT_THROW(spec.validate(), ContractViolation);
}

TEST(OrientedBox, ContainsRespectsYaw) {
    OrientedBox box;
    box.center = Eigen::Vector3d(1.0, 1.0, 0.0);
    box.size = Eigen::Vector3d(4.0, 1.0, 2.0);
    box.yaw = kPi / 2; // long axis now along y
    EXPECT_TRUE(box.contains({1.0, 2.8, 0.0}));
    EXPECT_FALSE(box.contains({2.8, 1.0, 0.0}));
}

TEST(OrientedBox, BevIouKnownOverlap) {
    OrientedBox a, b;
    a.size = Eigen::Vector3d(2, 2, 1);
    b.size = Eigen::Vector3d(2, 2, 1);
    b.center = Eigen::Vector3d(1.0, 0.0, 0.0);
    // Overlap 1x2 = 2, union 4 + 4 - 2 = 6.
    EXPECT_NEAR(bev_iou(a, b), 2.0 / 6.0, 1e-12);
    EXPECT_NEAR(bev_iou(a, a), 1.0, 1e-12);
    b.center = Eigen::Vector3d(10.0, 0.0, 0.0);
    EXPECT_EQ(bev_iou(a, b), 0.0);
}

TEST(OrientedBox, BevIouRotationInvariantForSquares) {
    OrientedBox a, b;
    a.size = b.size = Eigen::Vector3d(2, 2, 1);
    b.yaw = kPi / 2;
    EXPECT_NEAR(bev_iou(a, b), 1.0, 1e-9);
    b.yaw = kPi / 4; // rotated square inside the same circumcircle
    const double inter = bev_intersection_area(a, b);
    // Octagon area: 8 * (sqrt(2) - 1) for unit half-width squares.
    EXPECT_NEAR(inter, 8.0 * (std::sqrt(2.0) - 1.0), 1e-9);
}
