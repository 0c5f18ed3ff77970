#include "reflow/features.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "reflow/error.hpp"

namespace reflow {

using geometry::kUmPerMm;
using geometry::Pose;
using geometry::Rect2D;

std::string_view to_string(ComponentType type) {
    return type == ComponentType::Resistor ? "R" : "C";
}

std::string to_string(SizeClass size) {
    switch (size) {
        case SizeClass::S1005: return "1005";
        case SizeClass::S0603: return "0603";
        case SizeClass::S0402: return "0402";
    }
    return "?";
}

ComponentType parse_component_type(std::string_view text) {
    if (text == "R" || text == "-1") return ComponentType::Resistor;
    if (text == "C" || text == "1" || text == "+1") return ComponentType::Capacitor;
    throw Error(ErrorKind::ParseError, "unknown component type '" + std::string(text) + "'");
}

SizeClass parse_size_class(std::string_view text) {
    if (text == "1005") return SizeClass::S1005;
    if (text == "0603" || text == "603") return SizeClass::S0603;
    if (text == "0402" || text == "402") return SizeClass::S0402;
    throw Error(ErrorKind::ParseError, "unknown size class '" + std::string(text) + "'");
}

ComponentSpec ComponentSpec::make(ComponentType type, SizeClass size) {
    switch (size) {
        case SizeClass::S1005: return {type, size, 1.0, 0.5};
        case SizeClass::S0603: return {type, size, 0.6, 0.3};
        case SizeClass::S0402: return {type, size, 0.4, 0.2};
    }
    throw Error(ErrorKind::InvalidArgument, "unknown size class");
}

std::string ComponentSpec::label() const {
    return std::string(to_string(type)) + to_string(size);
}

void ComponentSpec::validate() const {
    const ComponentSpec expected = make(type, size);
    if (length != expected.length || width != expected.width) {
        throw Error(ErrorKind::InvalidRecord, "component dimensions do not match size class " + label());
    }
    if (type != ComponentType::Resistor && type != ComponentType::Capacitor) {
        throw Error(ErrorKind::InvalidRecord, "type code must be -1 or +1");
    }
}

void PasteDeposit::validate() const {
    if (!(volume > 0.0) || !(area > 0.0) || !(height > 0.0)) {
        throw Error(ErrorKind::InvalidRecord, "paste volume, area and height must be positive");
    }
    if (!std::isfinite(offset.dx) || !std::isfinite(offset.dy) ||
        !(offset.dtheta > -180.0 && offset.dtheta <= 180.0)) {
        throw Error(ErrorKind::InvalidRecord, "paste offset out of range");
    }
}

void PlacementMeasure::validate() const {
    if (!(pressure > 0.0)) {
        throw Error(ErrorKind::InvalidRecord, "placement pressure must be positive");
    }
    if (!std::isfinite(offset.dx) || !std::isfinite(offset.dy) ||
        !(offset.dtheta > -180.0 && offset.dtheta <= 180.0)) {
        throw Error(ErrorKind::InvalidRecord, "placement offset out of range");
    }
}

void AssemblyRecord::validate() const {
    component.validate();
    try {
        pads.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidRecord, e.what());
    }
    paste1.validate();
    paste2.validate();
    placement.validate();
    if (targets && !(targets->shift_rot > -180.0 && targets->shift_rot <= 180.0)) {
        throw Error(ErrorKind::InvalidRecord, "shift_rot must lie in (-180, 180]");
    }
}

std::string_view to_string(Target target) {
    switch (target) {
        case Target::ShiftX: return "shift_x";
        case Target::ShiftY: return "shift_y";
        case Target::ShiftRot: return "shift_rot";
    }
    return "?";
}

Target parse_target(std::string_view text) {
    for (Target t : kAllTargets) {
        if (to_string(t) == text) return t;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown target '" + std::string(text) + "'");
}

double get(const TargetTriple& t, Target target) {
    switch (target) {
        case Target::ShiftX: return t.shift_x;
        case Target::ShiftY: return t.shift_y;
        case Target::ShiftRot: return t.shift_rot;
    }
    return 0.0;
}

void set(TargetTriple& t, Target target, double value) {
    switch (target) {
        case Target::ShiftX: t.shift_x = value; break;
        case Target::ShiftY: t.shift_y = value; break;
        case Target::ShiftRot: t.shift_rot = value; break;
    }
}

namespace features {

std::string_view to_string(Category category) {
    switch (category) {
        case Category::ComponentGeometry: return "component_geometry";
        case Category::PadGeometry: return "pad_geometry";
        case Category::PasteInspection: return "paste_inspection";
        case Category::PlacementInspection: return "placement_inspection";
        case Category::PastePadRelative: return "paste_pad_relative";
        case Category::PlacementPasteRelative: return "placement_paste_relative";
        case Category::PlacementPadRelative: return "placement_pad_relative";
    }
    return "?";
}

namespace {

std::vector<FeatureInfo> build_schema() {
    std::vector<FeatureInfo> s;
    s.reserve(kFeatureCount);
    auto add = [&s](std::string name, Category cat, std::string unit, std::string def) {
        s.push_back({std::move(name), cat, std::move(unit), std::move(def)});
    };
    // avg = (pad1 + pad2) / 2, diff = pad1 - pad2, div = pad1 / pad2
    auto add_agg = [&add](const std::string& stem, Category cat, const std::string& unit,
                          const std::string& what) {
        add(stem + "_avg", cat, unit, "mean over both pads of " + what);
        add(stem + "_diff", cat, unit, what + " on pad1 minus pad2");
        add(stem + "_div", cat, "ratio", what + " on pad1 divided by pad2");
    };

    using C = Category;
    add("component_length", C::ComponentGeometry, "mm", "component body extent along x");
    add("component_width", C::ComponentGeometry, "mm", "component body extent along y");
    add("size_code", C::ComponentGeometry, "code", "size class as a number (1005, 603, 402)");
    add("type_code", C::ComponentGeometry, "code", "-1 resistor, +1 capacitor");

    add("pad_length", C::PadGeometry, "mm", "mean pad extent along x");
    add("pad_width", C::PadGeometry, "mm", "mean pad extent along y");
    add("pad_pitch", C::PadGeometry, "mm", "distance between pad centers");
    add("pad_area", C::PadGeometry, "mm^2", "mean pad area");

    add_agg("paste_volume", C::PasteInspection, "mm^3", "paste volume");
    add_agg("paste_area", C::PasteInspection, "mm^2", "paste area");
    add_agg("paste_height", C::PasteInspection, "mm", "paste height");
    add("paste_offset_x", C::PasteInspection, "um", "mean paste x position w.r.t. the reference point");
    add("paste_offset_y", C::PasteInspection, "um", "mean paste y position w.r.t. the reference point");
    add("paste_offset_rot", C::PasteInspection, "deg", "mean paste rotation");

    add("placement_offset_x", C::PlacementInspection, "um", "component x offset w.r.t. the reference point");
    add("placement_offset_y", C::PlacementInspection, "um", "component y offset w.r.t. the reference point");
    add("placement_offset_rot", C::PlacementInspection, "deg", "component rotation");
    add("placement_pressure", C::PlacementInspection, "machine units", "placement pressure");

    add_agg("paste_pad_contact", C::PastePadRelative, "mm^2", "paste/pad overlap area");
    add_agg("paste_pad_noncontact", C::PastePadRelative, "mm^2", "paste area off its pad");
    add_agg("paste_pad_eff_volume", C::PastePadRelative, "mm^3", "paste volume over its pad");

    add("placement_paste_offset_x", C::PlacementPasteRelative, "um", "component x minus mean paste x");
    add("placement_paste_offset_y", C::PlacementPasteRelative, "um", "component y minus mean paste y");
    add("placement_paste_offset_rot", C::PlacementPasteRelative, "deg", "component rotation minus mean paste rotation");
    add_agg("paste_comp_contact", C::PlacementPasteRelative, "mm^2", "paste/component-body overlap area");
    add_agg("paste_comp_eff_volume", C::PlacementPasteRelative, "mm^3", "paste volume under the component body");

    add("placement_pad_offset_x", C::PlacementPadRelative, "um", "component x relative to the pad pair frame");
    add("placement_pad_offset_y", C::PlacementPadRelative, "um", "component y relative to the pad pair frame");
    add("placement_pad_offset_rot", C::PlacementPadRelative, "deg", "component rotation relative to the pad pair frame");
    add_agg("overhang_area", C::PlacementPadRelative, "mm^2", "area of the component half off its pad");
    return s;
}

Aggregate aggregate_or_invalid(double v1, double v2, std::string_view what) {
    try {
        return aggregate(v1, v2);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidRecord, std::string(what) + ": " + e.what());
    }
}

void put(FeatureVector& fv, std::size_t first, const Aggregate& a) {
    fv[first] = a.avg;
    fv[first + 1] = a.diff;
    fv[first + 2] = a.div;
}

// Half of the component body on the side of `pad`.
Rect2D component_half_toward(const Rect2D& body, const Rect2D& pad, double fallback_side) {
    const double rad = body.rotation * std::numbers::pi / 180.0;
    const double ux = std::cos(rad);
    const double uy = std::sin(rad);
    const double along = ux * (pad.center_x - body.center_x) + uy * (pad.center_y - body.center_y);
    const double side = along > 0.0 ? 1.0 : (along < 0.0 ? -1.0 : fallback_side);
    Rect2D half = body;
    half.length = 0.5 * body.length;
    half.center_x = body.center_x + side * 0.25 * body.length * ux;
    half.center_y = body.center_y + side * 0.25 * body.length * uy;
    return half;
}

}  // namespace

const std::vector<FeatureInfo>& feature_schema() {
    static const std::vector<FeatureInfo> schema = build_schema();
    return schema;
}

std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    names.reserve(kFeatureCount);
    for (const auto& f : feature_schema()) names.push_back(f.name);
    return names;
}

std::optional<std::size_t> feature_index(std::string_view name) {
    static const std::unordered_map<std::string, std::size_t> index = [] {
        std::unordered_map<std::string, std::size_t> m;
        const auto& s = feature_schema();
        for (std::size_t i = 0; i < s.size(); ++i) m.emplace(s[i].name, i);
        return m;
    }();
    auto it = index.find(std::string(name));
    if (it == index.end()) return std::nullopt;
    return it->second;
}

Aggregate aggregate(double v1, double v2) {
    if (std::abs(v2) < 1e-9) {
        throw Error(ErrorKind::DivisorTooSmall, "divisor magnitude below 1e-9");
    }
    return {(v1 + v2) / 2.0, v1 - v2, v1 / v2};
}

Rect2D paste_footprint(const Rect2D& pad, const PasteDeposit& paste) {
    const double aspect = pad.length / pad.width;
    Rect2D r;
    r.length = std::sqrt(paste.area * aspect);
    r.width = paste.area / r.length;
    r.center_x = pad.center_x + paste.offset.dx / kUmPerMm;
    r.center_y = pad.center_y + paste.offset.dy / kUmPerMm;
    r.rotation = geometry::wrap_degrees(pad.rotation + paste.offset.dtheta);
    return r;
}

Rect2D component_footprint(const AssemblyRecord& record) {
    const auto ref = record.pads.reference();
    Rect2D r;
    r.length = record.component.length;
    r.width = record.component.width;
    r.center_x = ref.x + record.placement.offset.dx / kUmPerMm;
    r.center_y = ref.y + record.placement.offset.dy / kUmPerMm;
    r.rotation = record.placement.offset.dtheta;
    return r;
}

FeatureVector extract_features(const AssemblyRecord& record) {
    record.validate();
    namespace g = geometry;
    const auto& pad1 = record.pads.pad1;
    const auto& pad2 = record.pads.pad2;
    const auto& p1 = record.paste1;
    const auto& p2 = record.paste2;
    const auto ref = record.pads.reference();

    FeatureVector fv;
    fv[col::component_length] = record.component.length;
    fv[col::component_width] = record.component.width;
    fv[col::size_code] = record.component.size_code();
    fv[col::type_code] = record.component.type_code();

    fv[col::pad_length] = 0.5 * (pad1.length + pad2.length);
    fv[col::pad_width] = 0.5 * (pad1.width + pad2.width);
    fv[col::pad_pitch] = record.pads.pitch();
    fv[col::pad_area] = 0.5 * (pad1.area() + pad2.area());

    put(fv, col::paste_volume_avg, aggregate_or_invalid(p1.volume, p2.volume, "paste volume"));
    put(fv, col::paste_area_avg, aggregate_or_invalid(p1.area, p2.area, "paste area"));
    put(fv, col::paste_height_avg, aggregate_or_invalid(p1.height, p2.height, "paste height"));

    // Paste positions in um relative to the reference point.
    const double p1x = (pad1.center_x - ref.x) * kUmPerMm + p1.offset.dx;
    const double p1y = (pad1.center_y - ref.y) * kUmPerMm + p1.offset.dy;
    const double p2x = (pad2.center_x - ref.x) * kUmPerMm + p2.offset.dx;
    const double p2y = (pad2.center_y - ref.y) * kUmPerMm + p2.offset.dy;
    const Pose mean_paste{0.5 * (p1x + p2x), 0.5 * (p1y + p2y),
                          g::wrap_degrees(0.5 * (p1.offset.dtheta + p2.offset.dtheta))};
    fv[col::paste_offset_x] = mean_paste.dx;
    fv[col::paste_offset_y] = mean_paste.dy;
    fv[col::paste_offset_rot] = mean_paste.dtheta;

    const Pose& placed = record.placement.offset;
    fv[col::placement_offset_x] = placed.dx;
    fv[col::placement_offset_y] = placed.dy;
    fv[col::placement_offset_rot] = placed.dtheta;
    fv[col::placement_pressure] = record.placement.pressure;

    const Rect2D foot1 = paste_footprint(pad1, p1);
    const Rect2D foot2 = paste_footprint(pad2, p2);
    put(fv, col::paste_pad_contact_avg,
        aggregate_or_invalid(g::contact_area(foot1, pad1), g::contact_area(foot2, pad2), "paste-pad contact"));
    put(fv, col::paste_pad_noncontact_avg,
        aggregate_or_invalid(g::noncontact_area(foot1, pad1), g::noncontact_area(foot2, pad2),
                             "paste-pad non-contact"));
    put(fv, col::paste_pad_eff_volume_avg,
        aggregate_or_invalid(g::effective_volume(p1.volume, foot1, pad1),
                             g::effective_volume(p2.volume, foot2, pad2), "paste-pad effective volume"));

    const Pose to_paste = g::relative_pose(placed, mean_paste);
    fv[col::placement_paste_offset_x] = to_paste.dx;
    fv[col::placement_paste_offset_y] = to_paste.dy;
    fv[col::placement_paste_offset_rot] = to_paste.dtheta;

    const Rect2D body = component_footprint(record);
    put(fv, col::paste_comp_contact_avg,
        aggregate_or_invalid(g::contact_area(foot1, body), g::contact_area(foot2, body), "paste-component contact"));
    put(fv, col::paste_comp_eff_volume_avg,
        aggregate_or_invalid(g::effective_volume(p1.volume, foot1, body),
                             g::effective_volume(p2.volume, foot2, body), "paste-component effective volume"));

    // Pads are unrotated and centered on the reference, so the pad-frame pose
    // is the placement pose itself.
    const Pose to_pads = g::relative_pose(placed, Pose{});
    fv[col::placement_pad_offset_x] = to_pads.dx;
    fv[col::placement_pad_offset_y] = to_pads.dy;
    fv[col::placement_pad_offset_rot] = to_pads.dtheta;

    const Rect2D half1 = component_half_toward(body, pad1, -1.0);
    const Rect2D half2 = component_half_toward(body, pad2, 1.0);
    const double overhang1 = half1.area() - g::convex_overlap_area(half1, pad1);
    const double overhang2 = half2.area() - g::convex_overlap_area(half2, pad2);
    put(fv, col::overhang_area_avg, aggregate_or_invalid(overhang1, overhang2, "overhang area"));

    for (double v : fv.values) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidRecord, "non-finite feature value");
    }
    return fv;
}

}  // namespace features
}  // namespace reflow
