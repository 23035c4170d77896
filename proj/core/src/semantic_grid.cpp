#include "streamocc/semantic_grid.hpp"

#include "streamocc/error.hpp"

#include <cstring>
#include <fstream>

namespace streamocc {

SemanticGrid::SemanticGrid(std::array<int, 3> dims_, int num_classes_) {
    dims = dims_;
    num_classes = num_classes_;
    require(dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1, "SemanticGrid dims must be >= 1");
    require(num_classes >= 1 && num_classes <= 255, "SemanticGrid num_classes out of range");
    labels.assign(static_cast<std::size_t>(cells()), 0);
}

std::int64_t SemanticGrid::occupied_count() const {
    std::int64_t n = 0;
    for (std::uint8_t v : labels) n += (v != 0);
    return n;
}

namespace {
constexpr std::uint32_t kMagic = 0x44524753; // "SGRD" little-endian
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (f.gcount() != 4) throw InputError("grid dump truncated: " + path);
    return v;
}
} // namespace

void save_semantic_grid(const std::string& path, const SemanticGrid& grid, double resolution) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write grid dump: " + path);
    write_u32(f, kMagic);
    write_u32(f, kVersion);
    write_u32(f, static_cast<std::uint32_t>(grid.dims[0]));
    write_u32(f, static_cast<std::uint32_t>(grid.dims[1]));
    write_u32(f, static_cast<std::uint32_t>(grid.dims[2]));
    const float res = static_cast<float>(resolution);
    f.write(reinterpret_cast<const char*>(&res), 4);
    write_u32(f, static_cast<std::uint32_t>(grid.num_classes));
    write_u32(f, grid.has_mask() ? 1u : 0u);
    f.write(reinterpret_cast<const char*>(grid.labels.data()),
            static_cast<std::streamsize>(grid.labels.size()));
    if (grid.has_mask()) {
        f.write(reinterpret_cast<const char*>(grid.mask.data()),
                static_cast<std::streamsize>(grid.mask.size()));
    }
    if (!f.good()) throw InputError("I/O failure writing grid dump: " + path);
}

SemanticGrid load_semantic_grid(const std::string& path, double* resolution_out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot read grid dump: " + path);
    if (read_u32(f, path) != kMagic) throw InputError("not a grid dump (bad magic): " + path);
    if (read_u32(f, path) != kVersion) throw InputError("unsupported grid dump version: " + path);
    std::array<int, 3> dims;
    dims[0] = static_cast<int>(read_u32(f, path));
    dims[1] = static_cast<int>(read_u32(f, path));
    dims[2] = static_cast<int>(read_u32(f, path));
    float res = 0.0f;
    f.read(reinterpret_cast<char*>(&res), 4);
    if (f.gcount() != 4) throw InputError("grid dump truncated: " + path);
    const int num_classes = static_cast<int>(read_u32(f, path));
    const bool has_mask = read_u32(f, path) != 0;

    SemanticGrid grid(dims, num_classes);
    f.read(reinterpret_cast<char*>(grid.labels.data()),
           static_cast<std::streamsize>(grid.labels.size()));
    if (f.gcount() != static_cast<std::streamsize>(grid.labels.size())) {
        throw InputError("grid dump truncated: " + path);
    }
    for (std::uint8_t v : grid.labels) {
        if (v > num_classes) throw InputError("grid dump has label out of range: " + path);
    }
    if (has_mask) {
        grid.mask.assign(grid.labels.size(), 0);
        f.read(reinterpret_cast<char*>(grid.mask.data()),
               static_cast<std::streamsize>(grid.mask.size()));
        if (f.gcount() != static_cast<std::streamsize>(grid.mask.size())) {
            throw InputError("grid dump truncated (mask): " + path);
        }
    }
    if (resolution_out) *resolution_out = res;
    return grid;
}

namespace {
const char* kClassNames[ClassTable::kNumClasses + 1] = {
    "empty",
    "others",
    "barrier",
    "bicycle",
    "bus",
    "car",
    "construction_vehicle",
    "motorcycle",
    "pedestrian",
    "traffic_cone",
    "trailer",
    "truck",
    "driveable_surface",
    "other_flat",
    "sidewalk",
    "terrain",
    "manmade",
    "vegetation",
};
} // namespace

const char* ClassTable::name(int class_id) {
    require(class_id >= 0 && class_id <= kNumClasses, "class id out of range");
    return kClassNames[class_id];
}

int ClassTable::id_from_name(const std::string& name) {
    for (int i = 0; i <= kNumClasses; ++i) {
        if (name == kClassNames[i]) return i;
    }
    throw InputError("unknown class name '" + name + "'");
}

bool ClassTable::is_dynamic(int class_id) {
    return class_id >= 2 && class_id <= 11;
}

bool ClassTable::is_large(int class_id) {
    switch (class_id) {
        case 2:  // barrier
        case 4:  // bus
        case 5:  // car
        case 6:  // construction_vehicle
        case 10: // trailer
        case 11: // truck
            return true;
        default: return false;
    }
}

} // namespace streamocc
