#include "streamocc/weights.hpp"

#include "streamocc/error.hpp"
#include "streamocc/rng.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace streamocc {

namespace {

std::string blob_path_for(const std::string& manifest_path) {
    const auto slash = manifest_path.find_last_of('/');
    const auto dot = manifest_path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return manifest_path + ".blob";
    }
    return manifest_path.substr(0, dot) + ".blob";
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

std::vector<int> parse_shape(const std::string& s, const std::string& context) {
    std::vector<int> shape;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find('x', pos);
        if (next == std::string::npos) next = s.size();
        try {
            shape.push_back(std::stoi(s.substr(pos, next - pos)));
        } catch (const std::exception&) {
            throw InputError("bad shape '" + s + "' in " + context);
        }
        pos = next + 1;
    }
    if (shape.empty()) throw InputError("empty shape in " + context);
    return shape;
}

std::size_t shape_elements(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

} // namespace

void bind_linear(std::vector<ParamBinding>& out, const std::string& prefix, LinearLayer& layer) {
    out.push_back({prefix + ".weight", "linear.weight", {layer.out_dim, layer.in_dim},
                   std::span<float>(layer.weights)});
    out.push_back({prefix + ".bias", "linear.bias", {layer.out_dim}, std::span<float>(layer.bias)});
}

void bind_conv3d(std::vector<ParamBinding>& out, const std::string& prefix, Conv3dLayer& layer) {
    out.push_back({prefix + ".weight", "conv3d.weight",
                   {layer.out_channels, layer.in_channels, layer.kernel, layer.kernel, layer.kernel},
                   std::span<float>(layer.weights)});
    out.push_back({prefix + ".bias", "conv3d.bias", {layer.out_channels},
                   std::span<float>(layer.bias)});
}

void bind_vector(std::vector<ParamBinding>& out, const std::string& name, std::vector<float>& v) {
    out.push_back({name, "vector", {static_cast<int>(v.size())}, std::span<float>(v)});
}

void bind_matrix(std::vector<ParamBinding>& out, const std::string& name, std::vector<float>& v,
                 int rows, int cols) {
    require(static_cast<std::size_t>(rows) * cols == v.size(), "bind_matrix: size mismatch");
    out.push_back({name, "matrix", {rows, cols}, std::span<float>(v)});
}

void save_weights(const std::string& manifest_path, std::span<const ParamBinding> bindings) {
    std::ofstream manifest(manifest_path);
    if (!manifest) throw InputError("cannot write weight manifest: " + manifest_path);
    const std::string blob_path = blob_path_for(manifest_path);
    std::ofstream blob(blob_path, std::ios::binary);
    if (!blob) throw InputError("cannot write weight blob: " + blob_path);

    for (const auto& b : bindings) {
        require(shape_elements(b.shape) == b.data.size(),
                "save_weights: shape/data mismatch for block " + b.name);
        manifest << b.name << ' ' << b.role << ' ' << shape_to_string(b.shape) << '\n';
        blob.write(reinterpret_cast<const char*>(b.data.data()),
                   static_cast<std::streamsize>(b.data.size() * sizeof(float)));
    }
    if (!manifest.good() || !blob.good()) {
        throw InputError("I/O failure writing weights to " + manifest_path);
    }
}

void load_weights(const std::string& manifest_path, std::span<ParamBinding> bindings) {
    std::ifstream manifest(manifest_path);
    if (!manifest) throw InputError("cannot read weight manifest: " + manifest_path);
    const std::string blob_path = blob_path_for(manifest_path);
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw InputError("cannot read weight blob: " + blob_path);

    struct Entry {
        std::vector<int> shape;
        std::uint64_t offset; // in floats
    };
    std::map<std::string, Entry> index;
    std::uint64_t offset = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string name, role, shape_str;
        if (!(iss >> name >> role >> shape_str)) {
            throw InputError("weight manifest " + manifest_path + " line " +
                             std::to_string(line_no) + ": expected '<name> <role> <shape>'");
        }
        const auto shape = parse_shape(shape_str, manifest_path + " line " + std::to_string(line_no));
        index[name] = {shape, offset};
        offset += shape_elements(shape);
    }

    for (auto& b : bindings) {
        const auto it = index.find(b.name);
        if (it == index.end()) {
            throw ConfigError("missing parameter block '" + b.name + "' in " + manifest_path);
        }
        if (it->second.shape != b.shape) {
            throw ConfigError("parameter block '" + b.name + "' has shape " +
                              shape_to_string(it->second.shape) + ", expected " +
                              shape_to_string(b.shape));
        }
        blob.seekg(static_cast<std::streamoff>(it->second.offset * sizeof(float)));
        blob.read(reinterpret_cast<char*>(b.data.data()),
                  static_cast<std::streamsize>(b.data.size() * sizeof(float)));
        if (blob.gcount() != static_cast<std::streamsize>(b.data.size() * sizeof(float))) {
            throw InputError("weight blob " + blob_path + " truncated at block '" + b.name + "'");
        }
    }
}

void init_uniform_weights(std::span<ParamBinding> bindings, std::uint64_t seed) {
    for (auto& b : bindings) {
        Rng rng(hash_combine(seed, fnv1a(b.name)));
        const bool is_scale = b.name.size() >= 6 && b.name.ends_with(".scale");
        for (float& v : b.data) {
            v = is_scale ? 1.0f : static_cast<float>(rng.uniform(-0.05, 0.05));
        }
    }
}

} // namespace streamocc
