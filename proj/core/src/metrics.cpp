#include "streamocc/metrics.hpp"

#include "streamocc/error.hpp"
#include "streamocc/nn_ops.hpp"
#include "streamocc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace streamocc {

// ---------------------------------------------------------------------------
// Voxel IoU / mIoU

ConfusionCounts::ConfusionCounts(int num_classes_) : num_classes(num_classes_) {
    tp.assign(static_cast<std::size_t>(num_classes), 0);
    fp.assign(static_cast<std::size_t>(num_classes), 0);
    fn.assign(static_cast<std::size_t>(num_classes), 0);
}

void ConfusionCounts::accumulate(const SemanticGrid& pred, const SemanticGrid& gt,
                                 bool use_mask) {
    require(pred.dims == gt.dims, "iou: grid dims mismatch");
    require(pred.num_classes <= num_classes && gt.num_classes <= num_classes,
            "iou: class count exceeds accumulator");
    const std::int64_t n = gt.cells();
    const bool masked = use_mask && gt.has_mask();
    for (std::int64_t i = 0; i < n; ++i) {
        if (masked && gt.mask[i] == 0) continue;
        const int p = pred.labels[i];
        const int g = gt.labels[i];
        if (p == g) {
            if (p > 0) ++tp[p - 1];
        } else {
            if (p > 0) ++fp[p - 1];
            if (g > 0) ++fn[g - 1];
        }
        if (p > 0 && g > 0) ++geo_tp;
        else if (p > 0) ++geo_fp;
        else if (g > 0) ++geo_fn;
    }
}

IouResult iou_from_confusion(const ConfusionCounts& counts) {
    IouResult res;
    res.per_class.assign(static_cast<std::size_t>(counts.num_classes),
                         std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < counts.num_classes; ++c) {
        const std::int64_t denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
        if (denom == 0) continue; // class absent on both sides: excluded
        res.per_class[c] = static_cast<double>(counts.tp[c]) / static_cast<double>(denom);
        sum += res.per_class[c];
        ++defined;
    }
    res.miou = defined > 0 ? sum / defined : 0.0;
    const std::int64_t geo_denom = counts.geo_tp + counts.geo_fp + counts.geo_fn;
    res.geometry_iou =
        geo_denom > 0 ? static_cast<double>(counts.geo_tp) / static_cast<double>(geo_denom) : 1.0;
    return res;
}

IouResult iou_miou(const SemanticGrid& pred, const SemanticGrid& gt, bool use_mask) {
    ConfusionCounts counts(std::max(pred.num_classes, gt.num_classes));
    counts.accumulate(pred, gt, use_mask);
    return iou_from_confusion(counts);
}

// ---------------------------------------------------------------------------
// RayIoU

std::vector<Eigen::Vector3d> RaySetConfig::directions() const {
    std::vector<Eigen::Vector3d> dirs;
    dirs.reserve(static_cast<std::size_t>(n_azimuth) * n_elevation);
    for (int e = 0; e < n_elevation; ++e) {
        const double el =
            n_elevation == 1
                ? 0.5 * (elevation_min + elevation_max)
                : elevation_min + (elevation_max - elevation_min) * e / (n_elevation - 1.0);
        for (int a = 0; a < n_azimuth; ++a) {
            const double az = azimuth_min + (azimuth_max - azimuth_min) * a / n_azimuth;
            dirs.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                              std::sin(el));
        }
    }
    return dirs;
}

RayHit cast_ray(const SemanticGrid& grid, const GridSpec& spec, const Eigen::Vector3d& origin,
                const Eigen::Vector3d& dir) {
    const Eigen::Vector3d po = spec.world_to_cell(origin);
    RayHit out;

    std::array<int, 3> cell{static_cast<int>(std::floor(po.x())),
                            static_cast<int>(std::floor(po.y())),
                            static_cast<int>(std::floor(po.z()))};
    if (!spec.contains_cell(cell[0], cell[1], cell[2])) return out;

    const std::uint8_t start = grid.labels[spec.cell_index(cell[0], cell[1], cell[2])];
    if (start != 0) {
        out.hit = true;
        out.cell = cell;
        out.class_id = start;
        out.depth = 0.0;
        return out;
    }

    // Cell-space direction; t stays metric because tDelta carries resolution.
    std::array<int, 3> step{};
    std::array<double, 3> t_max{}, t_delta{};
    for (int a = 0; a < 3; ++a) {
        const double d = dir[a];
        if (d > 1e-300) {
            step[a] = 1;
            t_max[a] = (cell[a] + 1.0 - po[a]) * spec.resolution / d;
            t_delta[a] = spec.resolution / d;
        } else if (d < -1e-300) {
            step[a] = -1;
            t_max[a] = (cell[a] - po[a]) * spec.resolution / d;
            t_delta[a] = -spec.resolution / d;
        } else {
            step[a] = 0;
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        }
    }

    const std::int64_t max_steps =
        static_cast<std::int64_t>(spec.dims[0]) + spec.dims[1] + spec.dims[2] + 3;
    for (std::int64_t s = 0; s < max_steps; ++s) {
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        const double t = t_max[axis];
        cell[axis] += step[axis];
        if (cell[axis] < 0 || cell[axis] >= spec.dims[axis]) return out;
        t_max[axis] += t_delta[axis];

        const std::uint8_t label = grid.labels[spec.cell_index(cell[0], cell[1], cell[2])];
        if (label != 0) {
            out.hit = true;
            out.cell = cell;
            out.class_id = label;
            out.depth = t;
            return out;
        }
    }
    return out;
}

namespace {
constexpr double kRayThresholds[3] = {1.0, 2.0, 4.0};
}

RayCounts::RayCounts(int num_classes_) : num_classes(num_classes_) {
    for (int t = 0; t < 3; ++t) {
        tp[t].assign(static_cast<std::size_t>(num_classes), 0);
        fp[t].assign(static_cast<std::size_t>(num_classes), 0);
        fn[t].assign(static_cast<std::size_t>(num_classes), 0);
    }
}

void RayCounts::accumulate(const SemanticGrid& pred, const SemanticGrid& gt,
                           const GridSpec& spec, const Eigen::Vector3d& origin,
                           const RaySetConfig& rays) {
    require(pred.dims == gt.dims, "rayiou: grid dims mismatch");
    const Eigen::Vector3d lo = spec.min_corner;
    const Eigen::Vector3d hi = spec.max_corner();
    require(origin.x() >= lo.x() && origin.x() <= hi.x() && origin.y() >= lo.y() &&
                origin.y() <= hi.y() && origin.z() >= lo.z() && origin.z() <= hi.z(),
            "rayiou: origin outside grid extent");

    const auto dirs = rays.directions();
    struct LocalCounts {
        std::array<std::vector<std::int64_t>, 3> tp, fp, fn;
    };
    const int nthreads = thread_count();
    std::vector<LocalCounts> locals(static_cast<std::size_t>(nthreads));
    for (auto& l : locals) {
        for (int t = 0; t < 3; ++t) {
            l.tp[t].assign(static_cast<std::size_t>(num_classes), 0);
            l.fp[t].assign(static_cast<std::size_t>(num_classes), 0);
            l.fn[t].assign(static_cast<std::size_t>(num_classes), 0);
        }
    }

    // Rays partition deterministically; per-ray counts merge in fixed order.
    const std::int64_t n = static_cast<std::int64_t>(dirs.size());
    const std::int64_t chunk = (n + nthreads - 1) / nthreads;
    parallel_for(0, n, [&](std::int64_t r0, std::int64_t r1) {
        LocalCounts& l = locals[static_cast<std::size_t>(r0 / std::max<std::int64_t>(chunk, 1))];
        for (std::int64_t r = r0; r < r1; ++r) {
            const RayHit hg = cast_ray(gt, spec, origin, dirs[r]);
            const RayHit hp = cast_ray(pred, spec, origin, dirs[r]);
            if (!hg.hit && !hp.hit) continue;
            for (int t = 0; t < 3; ++t) {
                const bool match = hg.hit && hp.hit && hg.class_id == hp.class_id &&
                                   std::abs(hg.depth - hp.depth) <= kRayThresholds[t];
                if (match) {
                    ++l.tp[t][hg.class_id - 1];
                } else {
                    if (hg.hit) ++l.fn[t][hg.class_id - 1];
                    if (hp.hit) ++l.fp[t][hp.class_id - 1];
                }
            }
        }
    });

    for (const auto& l : locals) {
        for (int t = 0; t < 3; ++t) {
            for (int c = 0; c < num_classes; ++c) {
                tp[t][c] += l.tp[t][c];
                fp[t][c] += l.fp[t][c];
                fn[t][c] += l.fn[t][c];
            }
        }
    }
}

RayIouResult rayiou_from_counts(const RayCounts& counts) {
    double vals[3] = {0.0, 0.0, 0.0};
    for (int t = 0; t < 3; ++t) {
        double sum = 0.0;
        int defined = 0;
        for (int c = 0; c < counts.num_classes; ++c) {
            const std::int64_t denom = counts.tp[t][c] + counts.fp[t][c] + counts.fn[t][c];
            if (denom == 0) continue;
            sum += static_cast<double>(counts.tp[t][c]) / static_cast<double>(denom);
            ++defined;
        }
        vals[t] = defined > 0 ? sum / defined : 0.0;
    }
    RayIouResult res;
    res.at_1m = vals[0];
    res.at_2m = vals[1];
    res.at_4m = vals[2];
    res.mean = (vals[0] + vals[1] + vals[2]) / 3.0;
    return res;
}

RayIouResult rayiou(const SemanticGrid& pred, const SemanticGrid& gt, const GridSpec& spec,
                    const Eigen::Vector3d& origin, const RaySetConfig& rays) {
    RayCounts counts(std::max(pred.num_classes, gt.num_classes));
    counts.accumulate(pred, gt, spec, origin, rays);
    return rayiou_from_counts(counts);
}

// ---------------------------------------------------------------------------
// Losses

namespace {

double mean_cross_entropy(const VoxelVolume& logits, const SemanticGrid& gt) {
    require(logits.dims() == gt.dims, "losses: logits dims mismatch");
    require(logits.channels() == gt.num_classes + 1, "losses: logits channel count mismatch");
    const std::int64_t cells = logits.cells();
    const int C = logits.channels();

    const int nthreads = thread_count();
    const std::int64_t chunk = (cells + nthreads - 1) / nthreads;
    std::vector<double> partial(static_cast<std::size_t>(nthreads), 0.0);
    parallel_for(0, cells, [&](std::int64_t i0, std::int64_t i1) {
        double acc = 0.0;
        for (std::int64_t i = i0; i < i1; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c) {
                m = std::max(m, static_cast<double>(logits.data()[c * cells + i]));
            }
            double sum = 0.0;
            for (int c = 0; c < C; ++c) {
                sum += std::exp(static_cast<double>(logits.data()[c * cells + i]) - m);
            }
            const double target = logits.data()[gt.labels[i] * cells + i];
            acc += m + std::log(sum) - target;
        }
        partial[static_cast<std::size_t>(i0 / std::max<std::int64_t>(chunk, 1))] += acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(cells);
}

double mean_bce_with_logits(const VoxelVolume& logits, const SemanticGrid& gt) {
    require(logits.dims() == gt.dims, "losses: binary logits dims mismatch");
    require(logits.channels() == 1, "losses: binary logits must be single-channel");
    const std::int64_t cells = logits.cells();
    double acc = 0.0;
    for (std::int64_t i = 0; i < cells; ++i) {
        const double x = logits.data()[i];
        const double y = gt.labels[i] != 0 ? 1.0 : 0.0;
        acc += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    return acc / static_cast<double>(cells);
}

} // namespace

LossReport losses(const VoxelVolume* occ_logits, const VoxelVolume* fore_logits,
                  const VoxelVolume* bin_logits, const SemanticGrid& gt,
                  const LossWeights& weights) {
    LossReport report;
    require(occ_logits != nullptr, "losses: occupancy logits are required");
    report.occ = mean_cross_entropy(*occ_logits, gt);
    if (fore_logits) {
        report.fore = mean_cross_entropy(*fore_logits, gt);
        report.has_fore = true;
    }
    if (bin_logits) {
        report.bin = mean_bce_with_logits(*bin_logits, gt);
        report.has_bin = true;
    }
    report.total = weights.occ * report.occ + weights.fore * report.fore + weights.bin * report.bin;
    return report;
}

// ---------------------------------------------------------------------------
// Aggregate report

namespace {
std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
} // namespace

std::string MetricReport::to_text() const {
    std::ostringstream os;
    os << "frames " << frames << '\n';
    os << "miou " << fmt6(miou) << '\n';
    os << "geometry_iou " << fmt6(geometry_iou) << '\n';
    for (int c = 0; c < num_classes; ++c) {
        if (std::isnan(per_class_iou[c])) continue;
        os << "iou." << ClassTable::name(c + 1) << ' ' << fmt6(per_class_iou[c]) << '\n';
    }
    if (has_rayiou) {
        os << "rayiou.1m " << fmt6(ray.at_1m) << '\n';
        os << "rayiou.2m " << fmt6(ray.at_2m) << '\n';
        os << "rayiou.4m " << fmt6(ray.at_4m) << '\n';
        os << "rayiou.mean " << fmt6(ray.mean) << '\n';
    }
    os << "loss.occ " << fmt6(loss.occ) << '\n';
    os << "loss.fore " << fmt6(loss.fore) << '\n';
    os << "loss.bin " << fmt6(loss.bin) << '\n';
    os << "loss.total " << fmt6(loss.total) << '\n';
    os << "queries.selected_mean " << fmt6(mean_selected_queries) << '\n';
    return os.str();
}

std::string MetricReport::to_json() const {
    std::ostringstream os;
    os << "{\n";
    os << "  \"frames\": " << frames << ",\n";
    os << "  \"miou\": " << fmt6(miou) << ",\n";
    os << "  \"geometry_iou\": " << fmt6(geometry_iou) << ",\n";
    os << "  \"per_class_iou\": {";
    bool first = true;
    for (int c = 0; c < num_classes; ++c) {
        if (std::isnan(per_class_iou[c])) continue;
        if (!first) os << ", ";
        os << '"' << ClassTable::name(c + 1) << "\": " << fmt6(per_class_iou[c]);
        first = false;
    }
    os << "},\n";
    if (has_rayiou) {
        os << "  \"rayiou\": {\"1m\": " << fmt6(ray.at_1m) << ", \"2m\": " << fmt6(ray.at_2m)
           << ", \"4m\": " << fmt6(ray.at_4m) << ", \"mean\": " << fmt6(ray.mean) << "},\n";
    }
    os << "  \"loss\": {\"occ\": " << fmt6(loss.occ) << ", \"fore\": " << fmt6(loss.fore)
       << ", \"bin\": " << fmt6(loss.bin) << ", \"total\": " << fmt6(loss.total) << "},\n";
    os << "  \"queries_selected_mean\": " << fmt6(mean_selected_queries) << "\n";
    os << "}\n";
    return os.str();
}

} // namespace streamocc
