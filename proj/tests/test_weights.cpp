#include "streamocc/weights.hpp"

#include "streamocc/error.hpp"
#include "streamocc/rng.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace streamocc;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("streamocc_wtest_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST(Weights, SaveLoadRoundTrip) {
    TempDir dir;
    LinearLayer lin = LinearLayer::make(3, 2);
    Conv3dLayer conv = Conv3dLayer::make(2, 2, 3, 1, 1);
    std::vector<float> vec(5);
    Rng rng(1);
    for (float& w : lin.weights) w = static_cast<float>(rng.uniform(-1, 1));
    for (float& w : conv.weights) w = static_cast<float>(rng.uniform(-1, 1));
    for (float& v : vec) v = static_cast<float>(rng.uniform(-1, 1));

    std::vector<ParamBinding> bindings;
    bind_linear(bindings, "a.lin", lin);
    bind_conv3d(bindings, "a.conv", conv);
    bind_vector(bindings, "a.vec", vec);
    save_weights(dir.file("w.manifest"), bindings);

    LinearLayer lin2 = LinearLayer::make(3, 2);
    Conv3dLayer conv2 = Conv3dLayer::make(2, 2, 3, 1, 1);
    std::vector<float> vec2(5);
    std::vector<ParamBinding> bindings2;
    bind_linear(bindings2, "a.lin", lin2);
    bind_conv3d(bindings2, "a.conv", conv2);
    bind_vector(bindings2, "a.vec", vec2);
    load_weights(dir.file("w.manifest"), bindings2);

    EXPECT_EQ(lin.weights, lin2.weights);
    EXPECT_EQ(lin.bias, lin2.bias);
    EXPECT_EQ(conv.weights, conv2.weights);
    EXPECT_EQ(vec, vec2);
}

TEST(Weights, LoadIsOrderIndependent) {
    TempDir dir;
    std::vector<float> a(3, 1.0f), b(4, 2.0f);
    std::vector<ParamBinding> bindings;
    bind_vector(bindings, "block.a", a);
    bind_vector(bindings, "block.b", b);
    save_weights(dir.file("w.manifest"), bindings);

    std::vector<float> a2(3), b2(4);
    std::vector<ParamBinding> reversed;
    bind_vector(reversed, "block.b", b2);
    bind_vector(reversed, "block.a", a2);
    load_weights(dir.file("w.manifest"), reversed);
    EXPECT_EQ(a, a2);
    EXPECT_EQ(b, b2);
}

TEST(Weights, MissingBlockNamesIt) {
    TempDir dir;
    std::vector<float> a(3, 1.0f);
    std::vector<ParamBinding> bindings;
    bind_vector(bindings, "present", a);
    save_weights(dir.file("w.manifest"), bindings);

    std::vector<float> b(3);
    std::vector<ParamBinding> want;
    bind_vector(want, "absent.block", b);
    try {
        load_weights(dir.file("w.manifest"), want);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("absent.block"), std::string::npos);
    }
}

TEST(Weights, ShapeMismatchRejected) {
    TempDir dir;
    std::vector<float> a(3, 1.0f);
    std::vector<ParamBinding> bindings;
    bind_vector(bindings, "v", a);
    save_weights(dir.file("w.manifest"), bindings);

    std::vector<float> b(4);
    std::vector<ParamBinding> want;
    bind_vector(want, "v", b);
    EXPECT_THROW(load_weights(dir.file("w.manifest"), want), ConfigError);
}

TEST(Weights, TruncatedBlobRejected) {
    TempDir dir;
    std::vector<float> a(8, 1.0f);
    std::vector<ParamBinding> bindings;
    bind_vector(bindings, "v", a);
    save_weights(dir.file("w.manifest"), bindings);
    std::filesystem::resize_file(dir.file("w.blob"), 8);

    std::vector<float> b(8);
    std::vector<ParamBinding> want;
    bind_vector(want, "v", b);
    EXPECT_THROW(load_weights(dir.file("w.manifest"), want), InputError);
}

TEST(Weights, UniformInitIsSeededByName) {
    std::vector<float> a1(16), a2(16), b1(16);
    std::vector<ParamBinding> s1, s2;
    bind_vector(s1, "x.weight", a1);
    bind_vector(s1, "y.weight", b1);
    bind_vector(s2, "x.weight", a2);
    init_uniform_weights(s1, 99);
    init_uniform_weights(s2, 99);

    EXPECT_EQ(a1, a2);      // same (seed, name) -> same values
    EXPECT_NE(a1, b1);      // different name -> different stream
    for (float v : a1) {
        EXPECT_GE(v, -0.05f);
        EXPECT_LE(v, 0.05f);
    }
}

TEST(Weights, ScaleBlocksInitToOne) {
    std::vector<float> scale(4), shift(4);
    std::vector<ParamBinding> b;
    bind_vector(b, "norm.scale", scale);
    bind_vector(b, "norm.shift", shift);
    init_uniform_weights(b, 7) ;
    for (float v : scale) EXPECT_EQ(v, 1.0f);
    for (float v : shift) {
        EXPECT_GE(v, -0.05f);
        EXPECT_LE(v, 0.05f);
    }
}
