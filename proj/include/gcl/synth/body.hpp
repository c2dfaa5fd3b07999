#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gcl/core/tensor.hpp"

namespace gcl::synth {

inline constexpr int kNumParts = 4;  // head, torso, arms, legs
inline constexpr int kYawSteps = 8;  // 45-degree increments

/// Identity-bound appearance factors: one RGB per body part plus body
/// proportions. Distinct seeds are guaranteed an L-inf color gap >= 0.15.
struct IdentitySpec {
    int id = 0;
    // part order: head, torso, arms, legs; channels in [0,1]
    std::array<std::array<double, 3>, kNumParts> part_colors{};
    struct Shape {
        double torso_w = 1.0;   // [0.7, 1.3]
        double torso_h = 1.0;   // [0.7, 1.3]
        double limb_thk = 1.0;  // [0.7, 1.3]
        double head_r = 1.0;    // [0.7, 1.3]
    } shape;
};

/// Identity-unrelated factors: viewpoint, articulation, camera, framing.
struct PoseSpec {
    int yaw_step = 0;        // {0..7}, yaw angle = yaw_step * 45 deg, mod-8 arithmetic
    double limb_phase = 0.0; // [0, 2*pi)
    int camera_id = 0;
    double dx = 0.0;  // [-0.1, 0.1] of image width
    double dy = 0.0;  // [-0.1, 0.1] of image height

    PoseSpec rotated(int k) const {
        PoseSpec p = *this;
        p.yaw_step = ((yaw_step + k) % kYawSteps + kYawSteps) % kYawSteps;
        return p;
    }
};

/// Orthographic depth render of the body: depth[1 x H x W] in [0,1]
/// (0 = background, larger = nearer) plus per-pixel part labels
/// (0 = background, 1..4 = part index + 1).
struct StructureMap {
    Tensor depth;
    std::vector<uint8_t> part_mask;
    int height = 0;
    int width = 0;
};

/// Deterministic camera style: per-channel gain/bias tint on the body and a
/// flat background color.
struct CameraStyle {
    std::array<double, 3> gain{};
    std::array<double, 3> bias{};
    std::array<double, 3> background{};
};

IdentitySpec make_identity(int seed);
CameraStyle camera_style(int camera_id);

StructureMap project_body(const IdentitySpec::Shape& shape, const PoseSpec& pose, int height,
                          int width);
/// Paints project_body's parts with the identity's colors, applies the camera
/// tint to the body and the camera background elsewhere. Returns [3 x H x W].
Tensor render_person(const IdentitySpec& id, const PoseSpec& pose, int height, int width);

/// Undoes the camera tint on a body color: (c - bias) / gain per channel.
std::array<double, 3> invert_tint(const CameraStyle& cam, const std::array<double, 3>& c);

}  // namespace gcl::synth
