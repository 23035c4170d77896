#include "streamocc/scene.hpp"

#include "streamocc/error.hpp"
#include "streamocc/parallel.hpp"
#include "streamocc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace streamocc {

namespace {

double ego_yaw_of(const RigidTransform& t) {
    return std::atan2(t.rotation(1, 0), t.rotation(0, 0));
}

RigidTransform ego_pose_at(const SceneConfig& cfg, int t) {
    const auto& wp = cfg.ego_waypoints;
    Eigen::Vector3d s; // (x, y, yaw)
    if (wp.size() == 1 || cfg.frames <= 1) {
        s = wp.front();
    } else {
        const double u = static_cast<double>(t) * (static_cast<double>(wp.size()) - 1.0) /
                         (static_cast<double>(cfg.frames) - 1.0);
        const int seg = std::min(static_cast<int>(u), static_cast<int>(wp.size()) - 2);
        const double a = u - seg;
        s = (1.0 - a) * wp[seg] + a * wp[seg + 1];
    }
    RigidTransform pose = RigidTransform::rot_z(s.z());
    pose.translation = Eigen::Vector3d(s.x(), s.y(), 0.0);
    return pose;
}

struct WorldBox {
    int class_id;
    OrientedBox box; // global frame
};

// Slab-method ray/oriented-box intersection. Returns the parameter of the
// first visible surface along the ray (entry if outside, exit if the origin
// is inside), or a negative value on miss.
double ray_box_hit(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                   const OrientedBox& box) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const Eigen::Vector3d rel = origin - box.center;
    const Eigen::Vector3d o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
    const Eigen::Vector3d d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());

    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double h = 0.5 * box.size[a];
        if (std::abs(d[a]) < 1e-12) {
            if (o[a] < -h || o[a] > h) return -1.0;
            continue;
        }
        double ta = (-h - o[a]) / d[a];
        double tb = (h - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return -1.0;
    }
    if (t0 > 1e-9) return t0;
    if (t1 > 1e-9) return t1;
    return -1.0;
}

std::vector<WorldBox> world_boxes_at(const SceneConfig& cfg, int t) {
    std::vector<WorldBox> boxes;
    boxes.reserve(cfg.dynamic_boxes.size() + cfg.static_boxes.size());
    // Dynamic boxes take precedence over static layout, so they come first.
    for (const auto& d : cfg.dynamic_boxes) {
        WorldBox wb;
        wb.class_id = d.class_id;
        wb.box.center = d.center + d.velocity * (cfg.dt * t);
        wb.box.size = d.size;
        wb.box.yaw = d.yaw;
        boxes.push_back(wb);
    }
    for (const auto& s : cfg.static_boxes) boxes.push_back({s.class_id, s.box});
    return boxes;
}

void rasterize_gt(const SceneConfig& cfg, const RigidTransform& ego_to_global,
                  const std::vector<WorldBox>& boxes, SemanticGrid& grid) {
    const GridSpec& spec = cfg.grid;
    parallel_for(0, spec.dims[2], [&](std::int64_t z0, std::int64_t z1) {
        for (std::int64_t k = z0; k < z1; ++k) {
            for (int j = 0; j < spec.dims[1]; ++j) {
                for (int i = 0; i < spec.dims[0]; ++i) {
                    const Eigen::Vector3d p =
                        ego_to_global.apply(spec.cell_center(i, j, static_cast<int>(k)));
                    std::uint8_t label = 0;
                    for (const auto& wb : boxes) {
                        if (wb.box.contains(p)) {
                            label = static_cast<std::uint8_t>(wb.class_id);
                            break;
                        }
                    }
                    grid.at(i, j, static_cast<int>(k)) = label;
                }
            }
        }
    });
}

RigidTransform camera_mount(const CameraConfig& cc) {
    // Camera basis in the ego frame: +z forward, +x right, +y down.
    const double cy = std::cos(cc.yaw), sy = std::sin(cc.yaw);
    const double cp = std::cos(cc.pitch), sp = std::sin(cc.pitch);
    const Eigen::Vector3d forward(cy * cp, sy * cp, -sp);
    const Eigen::Vector3d right(sy, -cy, 0.0);
    const Eigen::Vector3d down = forward.cross(right);
    RigidTransform t;
    t.rotation.col(0) = right;
    t.rotation.col(1) = down;
    t.rotation.col(2) = forward;
    t.translation = cc.position;
    return t;
}

void render_camera(const SceneConfig& cfg, const RigidTransform& ego_to_global,
                   const std::vector<WorldBox>& boxes, const CameraConfig& cc,
                   std::uint64_t noise_seed, CameraRig& rig) {
    rig.width = cc.width;
    rig.height = cc.height;
    rig.feature_channels = cc.feature_channels;
    rig.intrinsics << cc.fx, 0, cc.cx, 0, cc.fy, cc.cy, 0, 0, 1;
    rig.cam_to_ego = camera_mount(cc);
    rig.depth_image.assign(static_cast<std::size_t>(cc.width) * cc.height, 0.0f);
    rig.feature_image.assign(
        static_cast<std::size_t>(cc.feature_channels) * cc.width * cc.height, 0.0f);

    const RigidTransform cam_to_global = compose(ego_to_global, rig.cam_to_ego);
    const std::int64_t pixels = static_cast<std::int64_t>(cc.width) * cc.height;

    Rng rng(noise_seed);
    for (int v = 0; v < cc.height; ++v) {
        for (int u = 0; u < cc.width; ++u) {
            const Eigen::Vector3d dir_cam((u + 0.5 - cc.cx) / cc.fx,
                                          (v + 0.5 - cc.cy) / cc.fy, 1.0);
            const double inv_norm = 1.0 / dir_cam.norm();
            const Eigen::Vector3d dir_g = cam_to_global.rotation * (dir_cam * inv_norm);

            double best_t = std::numeric_limits<double>::infinity();
            int best_class = -1;
            for (const auto& wb : boxes) {
                const double t = ray_box_hit(cam_to_global.translation, dir_g, wb.box);
                if (t > 0.0 && t < best_t) {
                    best_t = t;
                    best_class = wb.class_id;
                }
            }

            const std::int64_t pi = rig.pixel_index(u, v);
            if (best_class >= 0) {
                // Plane depth = distance along the camera z axis.
                rig.depth_image[pi] = static_cast<float>(best_t * inv_norm);
                for (int c = 0; c < cc.feature_channels; ++c) {
                    const double noise =
                        cc.noise_sigma > 0.0 ? rng.normal(0.0, cc.noise_sigma) : 0.0;
                    rig.feature_image[c * pixels + pi] = static_cast<float>(
                        class_signature(best_class, c, cfg.feature_scale) + noise);
                }
            } else if (cc.noise_sigma > 0.0) {
                // Keep the draw count per pixel fixed so scenes stay
                // reproducible when layout edits change which rays hit.
                for (int c = 0; c < cc.feature_channels; ++c) (void)rng.normal();
            }
        }
    }
}

} // namespace

float class_signature(int class_id, int channel, double scale) {
    Rng rng(hash_combine(fnv1a("class-signature"),
                         static_cast<std::uint64_t>(class_id) * 977 + channel));
    return static_cast<float>(rng.uniform(0.2, 1.0) * scale);
}

void SceneConfig::validate() const {
    grid.validate();
    if (frames < 1) throw InputError("scene config: [ego] frames must be >= 1");
    if (dt <= 0.0) throw InputError("scene config: [ego] dt must be > 0");
    if (ego_waypoints.empty()) throw InputError("scene config: [ego] waypoints missing");
    for (const auto& d : dynamic_boxes) {
        if (d.size.minCoeff() <= 0.0) throw InputError("scene config: dynamic box size must be > 0");
        if (d.class_id < 1 || d.class_id > ClassTable::kNumClasses)
            throw InputError("scene config: dynamic box class out of range");
    }
    for (const auto& c : cameras) {
        if (c.width < 1 || c.height < 1) throw InputError("scene config: camera size invalid");
        if (c.fx <= 0.0 || c.fy <= 0.0) throw InputError("scene config: camera focal length invalid");
        if (c.feature_channels < 1) throw InputError("scene config: camera channels invalid");
    }
}

SceneConfig SceneConfig::default_config() {
    SceneConfig cfg;
    cfg.grid.dims = {40, 40, 8};
    cfg.grid.min_corner = Eigen::Vector3d(-8.0, -8.0, -0.4);
    cfg.grid.resolution = 0.4;
    cfg.grid.frame = GridFrame::ego;
    cfg.frames = 8;
    cfg.dt = 0.5;
    cfg.ego_waypoints = {Eigen::Vector3d(-2.0, 0.0, 0.0), Eigen::Vector3d(1.5, 0.0, 0.0)};

    StaticBoxConfig ground;
    ground.class_id = ClassTable::id_from_name("driveable_surface");
    ground.box.center = Eigen::Vector3d(0.0, 0.0, -0.2);
    ground.box.size = Eigen::Vector3d(400.0, 400.0, 0.4);
    cfg.static_boxes.push_back(ground);

    StaticBoxConfig wall;
    wall.class_id = ClassTable::id_from_name("manmade");
    wall.box.center = Eigen::Vector3d(0.0, 6.8, 1.0);
    wall.box.size = Eigen::Vector3d(14.0, 0.8, 2.4);
    cfg.static_boxes.push_back(wall);

    StaticBoxConfig pillar;
    pillar.class_id = ClassTable::id_from_name("manmade");
    pillar.box.center = Eigen::Vector3d(4.0, -4.0, 1.2);
    pillar.box.size = Eigen::Vector3d(0.8, 0.8, 2.4);
    cfg.static_boxes.push_back(pillar);

    DynamicBoxConfig car;
    car.class_id = ClassTable::id_from_name("car");
    car.center = Eigen::Vector3d(2.0, 2.4, 0.8);
    car.size = Eigen::Vector3d(4.0, 1.8, 1.6);
    car.velocity = Eigen::Vector3d(1.2, 0.0, 0.0);
    car.track_id = 0;
    cfg.dynamic_boxes.push_back(car);

    DynamicBoxConfig ped;
    ped.class_id = ClassTable::id_from_name("pedestrian");
    ped.center = Eigen::Vector3d(3.0, -2.0, 0.85);
    ped.size = Eigen::Vector3d(0.6, 0.6, 1.7);
    ped.velocity = Eigen::Vector3d(0.0, 0.6, 0.0);
    ped.track_id = 1;
    cfg.dynamic_boxes.push_back(ped);

    CameraConfig cam;
    cfg.cameras.push_back(cam);
    CameraConfig rear = cam;
    rear.yaw = 3.14159265358979323846;
    cfg.cameras.push_back(rear);
    return cfg;
}

std::vector<SceneFrame> generate_scene(const SceneConfig& config, std::uint64_t seed) {
    config.validate();
    std::vector<SceneFrame> frames;
    frames.reserve(static_cast<std::size_t>(config.frames));

    for (int t = 0; t < config.frames; ++t) {
        SceneFrame frame;
        frame.timestep = t;
        frame.ego.timestep = t;
        frame.ego.ego_to_global = ego_pose_at(config, t);

        const auto boxes = world_boxes_at(config, t);
        frame.gt_grid = SemanticGrid(config.grid.dims, ClassTable::kNumClasses);
        rasterize_gt(config, frame.ego.ego_to_global, boxes, frame.gt_grid);

        const RigidTransform global_to_ego = frame.ego.ego_to_global.inverse();
        const double eyaw = ego_yaw_of(frame.ego.ego_to_global);
        for (std::size_t d = 0; d < config.dynamic_boxes.size(); ++d) {
            const auto& dc = config.dynamic_boxes[d];
            DynamicBoxState st;
            st.class_id = dc.class_id;
            st.velocity = dc.velocity;
            st.track_id = dc.track_id >= 0 ? dc.track_id : static_cast<int>(d);
            st.box.center = global_to_ego.apply(boxes[d].box.center);
            st.box.size = dc.size;
            st.box.yaw = dc.yaw - eyaw;
            frame.dynamic_boxes.push_back(st);
        }

        frame.cameras.resize(config.cameras.size());
        for (std::size_t ci = 0; ci < config.cameras.size(); ++ci) {
            const std::uint64_t cam_seed = hash_combine(
                hash_combine(seed, static_cast<std::uint64_t>(t)), 0x43414Dull + ci);
            render_camera(config, frame.ego.ego_to_global, boxes, config.cameras[ci], cam_seed,
                          frame.cameras[ci]);
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

VoxelVolume lift_splat(const SceneFrame& frame, const GridSpec& spec) {
    spec.validate();
    int channels = 1;
    for (const auto& cam : frame.cameras) channels = std::max(channels, cam.feature_channels);

    VoxelVolume out(channels, spec.dims);
    // Accumulate in double; each cell sums an unbounded number of pixels.
    std::vector<double> acc(static_cast<std::size_t>(out.size()), 0.0);
    const std::int64_t cells = out.cells();

    for (const auto& cam : frame.cameras) {
        const Eigen::Matrix3d kinv = cam.intrinsics.inverse();
        const std::int64_t pixels = static_cast<std::int64_t>(cam.width) * cam.height;
        for (int v = 0; v < cam.height; ++v) {
            for (int u = 0; u < cam.width; ++u) {
                const std::int64_t pi = cam.pixel_index(u, v);
                const double depth = cam.depth_image[pi];
                if (!(depth > 0.0)) continue;
                const Eigen::Vector3d p_cam =
                    kinv * Eigen::Vector3d(u + 0.5, v + 0.5, 1.0) * depth;
                const Eigen::Vector3d p_ego = cam.cam_to_ego.apply(p_cam);
                std::array<int, 3> cell;
                if (!spec.cell_of(p_ego, cell)) continue;
                const std::int64_t idx = spec.cell_index(cell[0], cell[1], cell[2]);
                for (int c = 0; c < cam.feature_channels; ++c) {
                    acc[c * cells + idx] += cam.feature_image[c * pixels + pi];
                }
            }
        }
    }

    float* dst = out.data().data();
    for (std::int64_t i = 0; i < out.size(); ++i) dst[i] = static_cast<float>(acc[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

struct RawSection {
    std::vector<std::pair<std::string, std::string>> entries;
};

std::vector<std::string> tokens_of(const std::string& s) {
    std::istringstream iss(s);
    std::vector<std::string> toks;
    std::string t;
    while (iss >> t) toks.push_back(t);
    return toks;
}

double to_double(const std::string& s, const std::string& ctx) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(ctx + ": bad number '" + s + "'");
    }
}

int to_int(const std::string& s, const std::string& ctx) {
    const double v = to_double(s, ctx);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw InputError(ctx + ": expected integer, got '" + s + "'");
    return i;
}

Eigen::Vector3d to_vec3(const std::vector<std::string>& toks, std::size_t from,
                        const std::string& ctx) {
    if (toks.size() < from + 3) throw InputError(ctx + ": expected 3 numbers");
    return {to_double(toks[from], ctx), to_double(toks[from + 1], ctx),
            to_double(toks[from + 2], ctx)};
}

} // namespace

SceneConfig parse_scene_config_text(const std::string& text, const std::string& origin) {
    std::map<std::string, RawSection> sections;
    std::vector<std::string> section_order;
    std::string current;

    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        const std::string ctx = origin + " line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw InputError(ctx + ": unterminated section header");
            current = line.substr(1, line.size() - 2);
            if (!sections.count(current)) section_order.push_back(current);
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(ctx + ": expected 'key = value'");
        if (current.empty()) throw InputError(ctx + ": entry before any [section]");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kb = key.find_first_not_of(" \t");
        const auto ke = key.find_last_not_of(" \t");
        key = key.substr(kb, ke - kb + 1);
        const auto vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        sections[current].entries.emplace_back(key, value);
    }

    SceneConfig cfg;
    cfg.ego_waypoints.clear();
    cfg.static_boxes.clear();
    cfg.dynamic_boxes.clear();
    cfg.cameras.clear();

    if (!sections.count("grid")) throw InputError(origin + ": missing [grid] section");
    if (!sections.count("ego")) throw InputError(origin + ": missing [ego] section");

    for (const auto& [key, value] : sections["grid"].entries) {
        const std::string ctx = origin + ": [grid] " + key;
        const auto toks = tokens_of(value);
        if (key == "dims") {
            if (toks.size() != 3) throw InputError(ctx + ": expected 3 integers");
            cfg.grid.dims = {to_int(toks[0], ctx), to_int(toks[1], ctx), to_int(toks[2], ctx)};
        } else if (key == "min_corner") {
            cfg.grid.min_corner = to_vec3(toks, 0, ctx);
        } else if (key == "resolution") {
            if (toks.size() != 1) throw InputError(ctx + ": expected 1 number");
            cfg.grid.resolution = to_double(toks[0], ctx);
        } else if (key == "frame") {
            if (toks.size() != 1) throw InputError(ctx + ": expected 'ego' or 'lidar'");
            cfg.grid.frame = grid_frame_from_string(toks[0]);
        } else {
            throw InputError(ctx + ": unknown key");
        }
    }

    for (const auto& [key, value] : sections["ego"].entries) {
        const std::string ctx = origin + ": [ego] " + key;
        if (key == "frames") {
            cfg.frames = to_int(value, ctx);
        } else if (key == "dt") {
            cfg.dt = to_double(value, ctx);
        } else if (key == "waypoints") {
            std::string part;
            std::istringstream wp(value);
            while (std::getline(wp, part, ';')) {
                const auto toks = tokens_of(part);
                if (toks.empty()) continue;
                if (toks.size() != 3) throw InputError(ctx + ": each waypoint is 'x y yaw'");
                cfg.ego_waypoints.push_back(to_vec3(toks, 0, ctx));
            }
        } else {
            throw InputError(ctx + ": unknown key");
        }
    }

    if (sections.count("features")) {
        for (const auto& [key, value] : sections["features"].entries) {
            const std::string ctx = origin + ": [features] " + key;
            if (key == "scale") cfg.feature_scale = to_double(value, ctx);
            else throw InputError(ctx + ": unknown key");
        }
    }

    if (sections.count("static")) {
        for (const auto& [key, value] : sections["static"].entries) {
            const std::string ctx = origin + ": [static] " + key;
            const auto toks = tokens_of(value);
            if (key == "box") {
                if (toks.size() != 8) throw InputError(ctx + ": expected 'class cx cy cz l w h yaw'");
                StaticBoxConfig b;
                b.class_id = ClassTable::id_from_name(toks[0]);
                b.box.center = to_vec3(toks, 1, ctx);
                b.box.size = to_vec3(toks, 4, ctx);
                b.box.yaw = to_double(toks[7], ctx);
                cfg.static_boxes.push_back(b);
            } else if (key == "ground") {
                if (toks.size() != 3 && toks.size() != 4)
                    throw InputError(ctx + ": expected 'class z0 z1 [half_extent]'");
                const double z0 = to_double(toks[1], ctx);
                const double z1 = to_double(toks[2], ctx);
                const double half = toks.size() == 4 ? to_double(toks[3], ctx) : 200.0;
                StaticBoxConfig b;
                b.class_id = ClassTable::id_from_name(toks[0]);
                b.box.center = Eigen::Vector3d(0.0, 0.0, 0.5 * (z0 + z1));
                b.box.size = Eigen::Vector3d(2.0 * half, 2.0 * half, z1 - z0);
                cfg.static_boxes.push_back(b);
            } else {
                throw InputError(ctx + ": unknown key");
            }
        }
    }

    for (const auto& name : section_order) {
        if (name.rfind("dynamic.", 0) == 0) {
            DynamicBoxConfig d;
            d.track_id = to_int(name.substr(8), origin + ": section [" + name + "]");
            for (const auto& [key, value] : sections[name].entries) {
                const std::string ctx = origin + ": [" + name + "] " + key;
                const auto toks = tokens_of(value);
                if (key == "class") d.class_id = ClassTable::id_from_name(value);
                else if (key == "center") d.center = to_vec3(toks, 0, ctx);
                else if (key == "size") d.size = to_vec3(toks, 0, ctx);
                else if (key == "yaw") d.yaw = to_double(value, ctx);
                else if (key == "velocity") d.velocity = to_vec3(toks, 0, ctx);
                else throw InputError(ctx + ": unknown key");
            }
            cfg.dynamic_boxes.push_back(d);
        } else if (name.rfind("camera.", 0) == 0) {
            CameraConfig c;
            for (const auto& [key, value] : sections[name].entries) {
                const std::string ctx = origin + ": [" + name + "] " + key;
                const auto toks = tokens_of(value);
                if (key == "size") {
                    if (toks.size() != 2) throw InputError(ctx + ": expected 'W H'");
                    c.width = to_int(toks[0], ctx);
                    c.height = to_int(toks[1], ctx);
                } else if (key == "intrinsics") {
                    if (toks.size() != 4) throw InputError(ctx + ": expected 'fx fy cx cy'");
                    c.fx = to_double(toks[0], ctx);
                    c.fy = to_double(toks[1], ctx);
                    c.cx = to_double(toks[2], ctx);
                    c.cy = to_double(toks[3], ctx);
                } else if (key == "position") c.position = to_vec3(toks, 0, ctx);
                else if (key == "yaw") c.yaw = to_double(value, ctx);
                else if (key == "pitch") c.pitch = to_double(value, ctx);
                else if (key == "channels") c.feature_channels = to_int(value, ctx);
                else if (key == "noise_sigma") c.noise_sigma = to_double(value, ctx);
                else throw InputError(ctx + ": unknown key");
            }
            cfg.cameras.push_back(c);
        } else if (name != "grid" && name != "ego" && name != "static" && name != "features") {
            throw InputError(origin + ": unknown section [" + name + "]");
        }
    }

    if (cfg.ego_waypoints.empty()) cfg.ego_waypoints.push_back(Eigen::Vector3d::Zero());
    cfg.validate();
    return cfg;
}

SceneConfig parse_scene_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot read scene config: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_scene_config_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Scene directory exchange

void save_scene_dir(const std::string& dir, const std::vector<SceneFrame>& frames,
                    double resolution) {
    std::filesystem::create_directories(dir);
    std::ofstream poses(dir + "/poses.txt");
    if (!poses) throw InputError("cannot write poses file in " + dir);
    char buf[64];
    for (const auto& frame : frames) {
        char name[64];
        std::snprintf(name, sizeof(name), "gt_%06d.occ", frame.timestep);
        save_semantic_grid(dir + "/" + name, frame.gt_grid, resolution);

        poses << frame.timestep;
        const auto& R = frame.ego.ego_to_global.rotation;
        const auto& tr = frame.ego.ego_to_global.translation;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                std::snprintf(buf, sizeof(buf), " %.17g", R(r, c));
                poses << buf;
            }
        }
        for (int c = 0; c < 3; ++c) {
            std::snprintf(buf, sizeof(buf), " %.17g", tr(c));
            poses << buf;
        }
        poses << '\n';
    }
    if (!poses.good()) throw InputError("I/O failure writing poses file in " + dir);
}

LoadedScene load_scene_dir(const std::string& dir) {
    LoadedScene scene;
    std::ifstream poses(dir + "/poses.txt");
    if (!poses) throw InputError("cannot read poses file: " + dir + "/poses.txt");
    std::string line;
    int line_no = 0;
    while (std::getline(poses, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream iss(line);
        int t = 0;
        RigidTransform tr;
        if (!(iss >> t)) {
            throw InputError(dir + "/poses.txt line " + std::to_string(line_no) + ": bad timestep");
        }
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (!(iss >> tr.rotation(r, c)))
                    throw InputError(dir + "/poses.txt line " + std::to_string(line_no) +
                                     ": expected 9 rotation floats");
        for (int c = 0; c < 3; ++c)
            if (!(iss >> tr.translation(c)))
                throw InputError(dir + "/poses.txt line " + std::to_string(line_no) +
                                 ": expected 3 translation floats");
        scene.timesteps.push_back(t);
        scene.ego_to_global.push_back(tr);
    }

    for (std::size_t i = 0; i < scene.timesteps.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "gt_%06d.occ", scene.timesteps[i]);
        double res = 0.0;
        scene.grids.push_back(load_semantic_grid(dir + "/" + name, &res));
        scene.resolution = res;
    }
    return scene;
}

} // namespace streamocc
