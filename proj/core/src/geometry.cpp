#include "streamocc/geometry.hpp"

#include "streamocc/error.hpp"

#include <cmath>

namespace streamocc {

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform relative_transform(const EgoPose& prev, const EgoPose& curr) {
    return compose(curr.ego_to_global.inverse(), prev.ego_to_global);
}

const char* to_string(GridFrame f) {
    return f == GridFrame::ego ? "ego" : "lidar";
}

GridFrame grid_frame_from_string(const std::string& s) {
    if (s == "ego") return GridFrame::ego;
    if (s == "lidar") return GridFrame::lidar;
    throw InputError("unknown grid frame '" + s + "' (expected 'ego' or 'lidar')");
}

void GridSpec::validate() const {
    require(dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1, "grid dims must all be >= 1");
    require(resolution > 0.0, "grid resolution must be > 0");
}

bool GridSpec::cell_of(const Eigen::Vector3d& p, std::array<int, 3>& out) const {
    const Eigen::Vector3d c = world_to_cell(p);
    const int i = static_cast<int>(std::floor(c.x()));
    const int j = static_cast<int>(std::floor(c.y()));
    const int k = static_cast<int>(std::floor(c.z()));
    out = {i, j, k};
    return contains_cell(i, j, k);
}

GridSpec GridSpec::half() const {
    require(dims[0] % 2 == 0 && dims[1] % 2 == 0 && dims[2] % 2 == 0,
            "half() requires even grid dims");
    GridSpec h = *this;
    h.dims = {dims[0] / 2, dims[1] / 2, dims[2] / 2};
    h.resolution = resolution * 2.0;
    return h;
}

GridSpec GridSpec::occ3d() {
    GridSpec s;
    s.dims = {200, 200, 16};
    s.min_corner = Eigen::Vector3d(-40.0, -40.0, -1.0);
    s.resolution = 0.4;
    s.frame = GridFrame::ego;
    return s;
}

GridSpec GridSpec::surroundocc() {
    GridSpec s;
    s.dims = {200, 200, 16};
    s.min_corner = Eigen::Vector3d(-50.0, -50.0, -5.0);
    s.resolution = 0.5;
    s.frame = GridFrame::lidar;
    return s;
}

std::vector<Eigen::Vector3d> cell_centers(const GridSpec& spec) {
    spec.validate();
    std::vector<Eigen::Vector3d> out;
    out.reserve(static_cast<std::size_t>(spec.cell_count()));
    for (int k = 0; k < spec.dims[2]; ++k)
        for (int j = 0; j < spec.dims[1]; ++j)
            for (int i = 0; i < spec.dims[0]; ++i)
                out.push_back(spec.cell_center(i, j, k));
    return out;
}

bool OrientedBox::contains(const Eigen::Vector3d& p) const {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const double dx = p.x() - center.x();
    const double dy = p.y() - center.y();
    // Rotate the offset into the box frame (inverse yaw).
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    const double lz = p.z() - center.z();
    return std::abs(lx) <= 0.5 * size.x() && std::abs(ly) <= 0.5 * size.y() &&
           std::abs(lz) <= 0.5 * size.z();
}

std::array<Eigen::Vector2d, 4> OrientedBox::bev_corners() const {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const double hx = 0.5 * size.x();
    const double hy = 0.5 * size.y();
    const auto corner = [&](double lx, double ly) {
        return Eigen::Vector2d(center.x() + c * lx - s * ly, center.y() + s * lx + c * ly);
    };
    return {corner(hx, hy), corner(-hx, hy), corner(-hx, -hy), corner(hx, -hy)};
}

namespace {

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
    double a = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * std::abs(a);
}

// Sutherland-Hodgman clip of a convex polygon against the half-plane left of
// edge (e0 -> e1).
std::vector<Eigen::Vector2d> clip_edge(const std::vector<Eigen::Vector2d>& poly,
                                       const Eigen::Vector2d& e0,
                                       const Eigen::Vector2d& e1) {
    std::vector<Eigen::Vector2d> out;
    const std::size_t n = poly.size();
    const auto side = [&](const Eigen::Vector2d& p) {
        return (e1.x() - e0.x()) * (p.y() - e0.y()) - (e1.y() - e0.y()) * (p.x() - e0.x());
    };
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& cur = poly[i];
        const Eigen::Vector2d& nxt = poly[(i + 1) % n];
        const double sc = side(cur);
        const double sn = side(nxt);
        if (sc >= 0.0) out.push_back(cur);
        if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
            const double t = sc / (sc - sn);
            out.push_back(cur + t * (nxt - cur));
        }
    }
    return out;
}

} // namespace

double bev_intersection_area(const OrientedBox& a, const OrientedBox& b) {
    const auto ca = a.bev_corners();
    const auto cb = b.bev_corners();
    std::vector<Eigen::Vector2d> poly(ca.begin(), ca.end());
    for (int i = 0; i < 4 && !poly.empty(); ++i) {
        poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
    }
    if (poly.size() < 3) return 0.0;
    return polygon_area(poly);
}

double bev_iou(const OrientedBox& a, const OrientedBox& b) {
    const double inter = bev_intersection_area(a, b);
    const double area_a = a.size.x() * a.size.y();
    const double area_b = b.size.x() * b.size.y();
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

} // namespace streamocc
