#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "reflow/features.hpp"
#include "reflow/preprocess.hpp"

namespace reflow::datagen {

/// One of the 33 factor combinations. Offsets are normalised levels in
/// [-1, 1]; they become physical offsets through the per-size ranges in
/// `SizeLayout`, so every size class sees the same relative design.
struct DesignPoint {
    int combination_id = 0;         // 1..33
    double volume_level = 1.0;      // multiplier on nominal paste volume, [0.8, 1.2]
    double volume_asymmetry = 0.0;  // pad1 gets (1 + a), pad2 (1 - a); a in [-0.2, 0.2]
    std::array<double, 3> paste_offset_level{};      // x, y, rot
    double pressure = 2.0;                           // [1, 3]
    std::array<double, 3> placement_offset_level{};  // x, y, rot
};

inline constexpr int kCombinations = 33;

/// The 33 combinations: a rank-1 lattice over the nine factors with
/// generator (1, 2, 28, 25, 17, 19, 10, 13, 26). Combination 1 is the centre
/// point (all offsets zero, symmetric deposits).
std::vector<DesignPoint> design_points();

/// Land pattern and factor ranges for one size class, all scaled to the
/// component body (L x W):
///   pad: 0.4 L along x, 1.1 W along y, pad gap 0.4 L
///   nominal paste: 1.1 x pad area, 0.1 mm high
///   paste offset range: +-0.06 L, +-0.15 W, +-5 deg
///   placement offset range: +-0.12 L, +-0.25 W, +-10 deg
struct SizeLayout {
    double pad_length;
    double pad_width;
    double pad_center_x;  // pads sit at -/+ this from the reference point
    double paste_area;
    double paste_height;
    std::array<double, 3> paste_range;      // um, um, deg
    std::array<double, 3> placement_range;  // um, um, deg
};
SizeLayout size_layout(const ComponentSpec& component);

/// Toy self-alignment ground truth. Not physics: it encodes only the
/// qualitative relations the learners should recover.
///   shift_x   = -kappa_x * placement_dx + gamma_x * (volume_diff / volume_avg) * 100 L
///             + interaction * u * r * 100 L + noise
///   shift_y   = -kappa_y * placement_dy
///             + gamma_y * noncontact_avg * sign(paste_dy) * 300 / L + noise
///   shift_rot = -kappa_rot * placement_rot + noise
/// with u = placement_dy / placement y range and r = placement_rot / 10 deg.
struct TruthModel {
    double kappa_x = 0.9;
    double kappa_y = 0.9;
    double kappa_rot = 0.9;
    double gamma_x = 1.0;
    double gamma_y = 1.0;
    double interaction = 0.0;
};

/// Measurement and process scatter, as standard deviations of normals
/// truncated at 3 sigma. Positional values are fractions of the component
/// dimension along that axis.
struct MeasurementNoise {
    double placement_xy = 0.01;
    double placement_rot = 0.5;  // deg
    double paste_xy = 0.005;
    double paste_rot = 0.3;      // deg
    double volume = 0.03;        // relative
    double area = 0.02;          // relative
};

struct GenConfig {
    std::uint64_t seed = 1;
    int replications = 20;
    /// Noise added to each target (um, um, deg). This is the floor no model
    /// can beat.
    std::array<double, 3> target_noise{8.0, 8.0, 0.5};
    TruthModel truth;
    MeasurementNoise measurement;
    double missing_rate = 0.005;

    void validate() const;
};

/// Records in canonical (combination, component type, replicate) order,
/// without targets. Each record draws from its own stream derived from
/// (seed, record index).
std::vector<AssemblyRecord> design_grid(const GenConfig& config);

/// Noise-free part of the ground truth.
TargetTriple truth_mean(const AssemblyRecord& record, const TruthModel& truth);

TargetTriple synth_truth(const AssemblyRecord& record, const GenConfig& config, std::mt19937_64& rng);

/// Clears the targets of about `rate` of the records.
void inject_missing(std::vector<AssemblyRecord>& records, double rate, std::mt19937_64& rng);

/// design_grid + synth_truth + inject_missing.
std::vector<AssemblyRecord> generate(const GenConfig& config);

/// Feature rows for the records; absent targets stay absent.
std::vector<RawSample> to_samples(const std::vector<AssemblyRecord>& records);

/// Component types in output order: C1005, R1005, C0603, R0603, C0402, R0402.
const std::array<ComponentSpec, 6>& component_types();

}  // namespace reflow::datagen
