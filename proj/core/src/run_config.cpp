#include "streamocc/run_config.hpp"

#include "streamocc/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace streamocc {

namespace {

using nlohmann::json;

Eigen::Vector3d vec3_of(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(ctx + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }

    RunConfig cfg;
    PipelineConfig& p = cfg.pipeline;
    try {
        if (j.contains("grid")) {
            const json& g = j["grid"];
            if (g.contains("dims")) {
                const auto& d = g["dims"];
                if (!d.is_array() || d.size() != 3)
                    throw ConfigError(origin + ": grid.dims must be [X, Y, Z]");
                p.grid.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
            }
            if (g.contains("min_corner"))
                p.grid.min_corner = vec3_of(g["min_corner"], origin + ": grid.min_corner");
            if (g.contains("resolution")) p.grid.resolution = g["resolution"].get<double>();
            if (g.contains("frame"))
                p.grid.frame = grid_frame_from_string(g["frame"].get<std::string>());
            cfg.has_grid = true;
        }
        p.channels = j.value("channels", p.channels);
        p.c_init = j.value("c_init", p.c_init);
        p.n_classes = j.value("n_classes", p.n_classes);
        p.fpn_c1 = j.value("fpn_c1", p.fpn_c1);
        p.fpn_c2 = j.value("fpn_c2", p.fpn_c2);
        p.decoder_hidden = j.value("decoder_hidden", p.decoder_hidden);

        if (j.contains("detector")) {
            const json& d = j["detector"];
            if (d.contains("mode")) {
                const std::string m = d["mode"].get<std::string>();
                if (m == "oracle_noise") p.detector.mode = DetectorMode::oracle_noise;
                else if (m == "replay") p.detector.mode = DetectorMode::replay;
                else throw ConfigError(origin + ": detector.mode must be 'oracle_noise' or 'replay'");
            }
            p.detector.center_sigma = d.value("center_sigma", p.detector.center_sigma);
            p.detector.size_sigma = d.value("size_sigma", p.detector.size_sigma);
            p.detector.yaw_sigma = d.value("yaw_sigma", p.detector.yaw_sigma);
            p.detector.conf_mean = d.value("conf_mean", p.detector.conf_mean);
            p.detector.conf_sigma = d.value("conf_sigma", p.detector.conf_sigma);
            p.detector.max_queries = d.value("max_queries", p.detector.max_queries);
            p.detector.replay_path = d.value("replay_path", p.detector.replay_path);
        }
        if (j.contains("selection")) {
            const json& s = j["selection"];
            p.selection.conf_thresh = s.value("conf_thresh", p.selection.conf_thresh);
            p.selection.iou_thresh = s.value("iou_thresh", p.selection.iou_thresh);
            p.selection.geo_thresh = s.value("geo_thresh", p.selection.geo_thresh);
            p.selection.sigma_center = s.value("sigma_center", p.selection.sigma_center);
            p.selection.sigma_size = s.value("sigma_size", p.selection.sigma_size);
            if (s.contains("large_classes"))
                p.selection.large_classes = s["large_classes"].get<std::vector<int>>();
        }
        if (j.contains("select_mode")) {
            const std::string m = j["select_mode"].get<std::string>();
            if (m == "train") p.select_mode = SelectMode::train;
            else if (m == "infer") p.select_mode = SelectMode::infer;
            else throw ConfigError(origin + ": select_mode must be 'train' or 'infer'");
        }
        if (j.contains("v2q")) {
            p.v2q_heads = j["v2q"].value("heads", p.v2q_heads);
            p.v2q_points = j["v2q"].value("points", p.v2q_points);
        }
        p.enable_stream_agg = j.value("enable_stream_agg", p.enable_stream_agg);
        p.enable_query_agg = j.value("enable_query_agg", p.enable_query_agg);
        p.enable_aux_heads = j.value("enable_aux_heads", p.enable_aux_heads);

        if (j.contains("rayiou")) {
            const json& r = j["rayiou"];
            p.compute_rayiou = r.value("enabled", p.compute_rayiou);
            p.rays.n_azimuth = r.value("n_azimuth", p.rays.n_azimuth);
            p.rays.n_elevation = r.value("n_elevation", p.rays.n_elevation);
            p.rays.elevation_min = r.value("elevation_min", p.rays.elevation_min);
            p.rays.elevation_max = r.value("elevation_max", p.rays.elevation_max);
            if (r.contains("origin")) p.ray_origin = vec3_of(r["origin"], origin + ": rayiou.origin");
        }
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read run config: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_run_config_text(buf.str(), path);
}

} // namespace streamocc
