#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace streamocc {

/// Per-cell semantic labels over a voxel lattice. Label 0 is empty space,
/// 1..num_classes are semantic classes. Cell order is x-fastest, matching
/// GridSpec. The visibility mask, when present, marks cells that count for
/// masked evaluation.
struct SemanticGrid {
    std::array<int, 3> dims{0, 0, 0};
    int num_classes = 0;
    std::vector<std::uint8_t> labels;
    std::vector<std::uint8_t> mask; // empty = no mask

    SemanticGrid() = default;
    SemanticGrid(std::array<int, 3> dims, int num_classes);

    std::int64_t cells() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }

    std::int64_t cell_index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) * (y + static_cast<std::int64_t>(dims[1]) * z);
    }

    std::uint8_t& at(int x, int y, int z) { return labels[cell_index(x, y, z)]; }
    std::uint8_t at(int x, int y, int z) const { return labels[cell_index(x, y, z)]; }

    bool has_mask() const { return !mask.empty(); }

    /// Count of cells with label != 0.
    std::int64_t occupied_count() const;
};

// Binary grid dump: header (magic, version, dims, resolution, class count,
// mask flag) followed by one byte per cell, then the mask bytes if flagged.
// The stored resolution is informational; evaluation geometry comes from the
// run configuration.

void save_semantic_grid(const std::string& path, const SemanticGrid& grid, double resolution);
SemanticGrid load_semantic_grid(const std::string& path, double* resolution_out = nullptr);

/// Class table shared by the synthetic scenes, query selection and metric
/// reports: 17 semantic classes in the usual occupancy-benchmark order,
/// ids shifted by one so 0 stays the empty label.
struct ClassTable {
    static constexpr int kNumClasses = 17;

    static const char* name(int class_id); // 0 = "empty"
    static int id_from_name(const std::string& name);
    static bool is_dynamic(int class_id);
    /// Default large-object set for query selection (the physically large
    /// dynamic classes; the rest of the dynamic set is treated as small).
    static bool is_large(int class_id);
};

} // namespace streamocc
