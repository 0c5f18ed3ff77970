#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reflow/geometry.hpp"

namespace reflow {

enum class ComponentType : int { Resistor = -1, Capacitor = 1 };

/// Imperial-metric size designation; the numeric value is the code used as a
/// model feature (1005 -> 1.0 x 0.5 mm).
enum class SizeClass : int { S1005 = 1005, S0603 = 603, S0402 = 402 };

std::string_view to_string(ComponentType type);  // "R" / "C"
std::string to_string(SizeClass size);           // "1005" / "0603" / "0402"
ComponentType parse_component_type(std::string_view text);
SizeClass parse_size_class(std::string_view text);

struct ComponentSpec {
    ComponentType type = ComponentType::Resistor;
    SizeClass size = SizeClass::S1005;
    double length = 1.0;  // mm
    double width = 0.5;   // mm

    static ComponentSpec make(ComponentType type, SizeClass size);
    int type_code() const { return static_cast<int>(type); }
    int size_code() const { return static_cast<int>(size); }
    std::string label() const;  // e.g. "C1005"
    void validate() const;
};

/// Solder-paste inspection result for one pad.
struct PasteDeposit {
    double volume = 0.0;  // mm^3
    double area = 0.0;    // mm^2
    double height = 0.0;  // mm
    geometry::Pose offset;  // relative to its own pad center

    void validate() const;
};

/// Pre-reflow optical inspection of the placed component.
struct PlacementMeasure {
    geometry::Pose offset;  // relative to the pad-pair reference point
    double pressure = 1.0;

    void validate() const;
};

/// Component shift during reflow: post-reflow pose minus pre-reflow pose.
struct TargetTriple {
    double shift_x = 0.0;    // um
    double shift_y = 0.0;    // um
    double shift_rot = 0.0;  // deg

    friend bool operator==(const TargetTriple&, const TargetTriple&) = default;
};

enum class Target : std::size_t { ShiftX = 0, ShiftY = 1, ShiftRot = 2 };
inline constexpr std::array<Target, 3> kAllTargets = {Target::ShiftX, Target::ShiftY, Target::ShiftRot};
std::string_view to_string(Target target);
Target parse_target(std::string_view text);
double get(const TargetTriple& t, Target target);
void set(TargetTriple& t, Target target, double value);

struct RecordMeta {
    int board_id = 0;
    int combination_id = 0;
    int replicate_id = 0;

    friend bool operator==(const RecordMeta&, const RecordMeta&) = default;
};

struct AssemblyRecord {
    ComponentSpec component;
    geometry::PadPair pads;
    PasteDeposit paste1;  // on pad1
    PasteDeposit paste2;  // on pad2
    PlacementMeasure placement;
    std::optional<TargetTriple> targets;
    RecordMeta meta;

    void validate() const;
};

namespace features {

inline constexpr std::size_t kFeatureCount = 48;
inline constexpr std::string_view kSchemaVersion = "reflow-features/1";

enum class Category {
    ComponentGeometry,
    PadGeometry,
    PasteInspection,
    PlacementInspection,
    PastePadRelative,
    PlacementPasteRelative,
    PlacementPadRelative,
};
inline constexpr std::size_t kCategoryCount = 7;
std::string_view to_string(Category category);

struct FeatureInfo {
    std::string name;
    Category category;
    std::string unit;
    std::string definition;
};

/// Column positions in the canonical schema.
namespace col {
enum : std::size_t {
    component_length,
    component_width,
    size_code,
    type_code,
    pad_length,
    pad_width,
    pad_pitch,
    pad_area,
    paste_volume_avg,
    paste_volume_diff,
    paste_volume_div,
    paste_area_avg,
    paste_area_diff,
    paste_area_div,
    paste_height_avg,
    paste_height_diff,
    paste_height_div,
    paste_offset_x,
    paste_offset_y,
    paste_offset_rot,
    placement_offset_x,
    placement_offset_y,
    placement_offset_rot,
    placement_pressure,
    paste_pad_contact_avg,
    paste_pad_contact_diff,
    paste_pad_contact_div,
    paste_pad_noncontact_avg,
    paste_pad_noncontact_diff,
    paste_pad_noncontact_div,
    paste_pad_eff_volume_avg,
    paste_pad_eff_volume_diff,
    paste_pad_eff_volume_div,
    placement_paste_offset_x,
    placement_paste_offset_y,
    placement_paste_offset_rot,
    paste_comp_contact_avg,
    paste_comp_contact_diff,
    paste_comp_contact_div,
    paste_comp_eff_volume_avg,
    paste_comp_eff_volume_diff,
    paste_comp_eff_volume_div,
    placement_pad_offset_x,
    placement_pad_offset_y,
    placement_pad_offset_rot,
    overhang_area_avg,
    overhang_area_diff,
    overhang_area_div,
    count_
};
static_assert(count_ == kFeatureCount);
}  // namespace col

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    std::string_view schema_version = kSchemaVersion;

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
};

/// The canonical ordered schema. The returned reference is stable.
const std::vector<FeatureInfo>& feature_schema();

std::vector<std::string> feature_names();

/// Column index for a schema name, or nullopt.
std::optional<std::size_t> feature_index(std::string_view name);

struct Aggregate {
    double avg;
    double diff;  // pad1 - pad2
    double div;   // pad1 / pad2
};

/// Throws DivisorTooSmall when |v2| < 1e-9.
Aggregate aggregate(double v1, double v2);

/// Footprint of a paste deposit in board coordinates. The deposit keeps the
/// aspect ratio of its pad and is sized to the measured area.
geometry::Rect2D paste_footprint(const geometry::Rect2D& pad, const PasteDeposit& paste);

/// Component body at its measured placement pose.
geometry::Rect2D component_footprint(const AssemblyRecord& record);

/// Throws InvalidRecord when the record violates an invariant or yields a
/// degenerate ratio.
FeatureVector extract_features(const AssemblyRecord& record);

}  // namespace features
}  // namespace reflow
