#pragma once

#include "streamocc/geometry.hpp"

#include <vector>

namespace streamocc {

/// One dynamic-object candidate: feature vector plus oriented box, confidence
/// and class. track_id is stable across frames for propagated queries.
struct InstanceQuery {
    std::vector<float> feature;
    OrientedBox box;
    double confidence = 0.0;
    int class_id = 0;
    int track_id = -1;
};

} // namespace streamocc
