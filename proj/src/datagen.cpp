#include "reflow/datagen.hpp"

#include <cmath>

#include "reflow/error.hpp"
#include "reflow/random.hpp"

namespace reflow::datagen {

using geometry::kUmPerMm;

namespace {

constexpr std::array<int, 9> kGenerator = {1, 2, 28, 25, 17, 19, 10, 13, 26};

// Lattice level in [-1, 1] for combination c (0-based) and factor j.
double lattice_level(int c, int j) {
    const int half = kCombinations / 2;
    const int v = (c * kGenerator[j] + half) % kCombinations;
    return static_cast<double>(v - half) / half;
}

// Normal truncated at +-3 sigma, by rejection.
double truncated_normal(std::mt19937_64& rng, double sigma) {
    if (sigma <= 0.0) return 0.0;
    std::normal_distribution<double> dist(0.0, 1.0);
    for (;;) {
        const double z = dist(rng);
        if (std::abs(z) <= 3.0) return sigma * z;
    }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

constexpr std::uint64_t kMissingStream = 0xffffffffffffffffULL;

}  // namespace

const std::array<ComponentSpec, 6>& component_types() {
    static const std::array<ComponentSpec, 6> types = {
        ComponentSpec::make(ComponentType::Capacitor, SizeClass::S1005),
        ComponentSpec::make(ComponentType::Resistor, SizeClass::S1005),
        ComponentSpec::make(ComponentType::Capacitor, SizeClass::S0603),
        ComponentSpec::make(ComponentType::Resistor, SizeClass::S0603),
        ComponentSpec::make(ComponentType::Capacitor, SizeClass::S0402),
        ComponentSpec::make(ComponentType::Resistor, SizeClass::S0402),
    };
    return types;
}

std::vector<DesignPoint> design_points() {
    std::vector<DesignPoint> points;
    points.reserve(kCombinations);
    for (int c = 0; c < kCombinations; ++c) {
        DesignPoint p;
        p.combination_id = c + 1;
        p.volume_level = 1.0 + 0.2 * lattice_level(c, 0);
        p.volume_asymmetry = 0.2 * lattice_level(c, 1);
        p.paste_offset_level = {lattice_level(c, 2), lattice_level(c, 3), lattice_level(c, 4)};
        p.pressure = 2.0 + lattice_level(c, 5);
        p.placement_offset_level = {lattice_level(c, 6), lattice_level(c, 7), lattice_level(c, 8)};
        points.push_back(p);
    }
    return points;
}

SizeLayout size_layout(const ComponentSpec& component) {
    const double L = component.length;
    const double W = component.width;
    SizeLayout s;
    s.pad_length = 0.4 * L;
    s.pad_width = 1.1 * W;
    s.pad_center_x = 0.4 * L;
    s.paste_area = 1.1 * s.pad_length * s.pad_width;
    s.paste_height = 0.1;
    s.paste_range = {0.06 * L * kUmPerMm, 0.15 * W * kUmPerMm, 5.0};
    s.placement_range = {0.12 * L * kUmPerMm, 0.25 * W * kUmPerMm, 10.0};
    return s;
}

void GenConfig::validate() const {
    if (replications < 1) throw Error(ErrorKind::InvalidArgument, "replications must be >= 1");
    for (double s : target_noise) {
        if (!(s >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise scales must be >= 0");
    }
    const auto& m = measurement;
    for (double s : {m.placement_xy, m.placement_rot, m.paste_xy, m.paste_rot, m.volume, m.area}) {
        if (!(s >= 0.0)) throw Error(ErrorKind::InvalidArgument, "measurement noise must be >= 0");
    }
    // Relative noise is truncated at 3 sigma; keep deposits positive.
    if (m.volume >= 0.25 || m.area >= 0.25) {
        throw Error(ErrorKind::InvalidArgument, "relative volume/area noise must be < 0.25");
    }
    if (!(missing_rate >= 0.0 && missing_rate <= 0.1)) {
        throw Error(ErrorKind::InvalidArgument, "missing rate must lie in [0, 0.1]");
    }
}

std::vector<AssemblyRecord> design_grid(const GenConfig& config) {
    config.validate();
    const auto points = design_points();
    const auto& types = component_types();
    const auto& m = config.measurement;

    std::vector<AssemblyRecord> records;
    records.reserve(points.size() * types.size() * static_cast<std::size_t>(config.replications));
    std::uint64_t index = 0;
    for (const auto& point : points) {
        for (const auto& component : types) {
            const SizeLayout lay = size_layout(component);
            const double L = component.length * kUmPerMm;
            const double W = component.width * kUmPerMm;
            for (int rep = 0; rep < config.replications; ++rep, ++index) {
                std::mt19937_64 rng(derive_seed(config.seed, 2 * index));
                AssemblyRecord r;
                r.component = component;
                r.pads.pad1 = {-lay.pad_center_x, 0.0, lay.pad_length, lay.pad_width, 0.0};
                r.pads.pad2 = {lay.pad_center_x, 0.0, lay.pad_length, lay.pad_width, 0.0};

                const double nominal_volume = lay.paste_area * lay.paste_height * point.volume_level;
                const double sides[2] = {1.0 + point.volume_asymmetry, 1.0 - point.volume_asymmetry};
                PasteDeposit* pastes[2] = {&r.paste1, &r.paste2};
                for (int k = 0; k < 2; ++k) {
                    PasteDeposit& p = *pastes[k];
                    p.volume = nominal_volume * sides[k] * (1.0 + truncated_normal(rng, m.volume));
                    p.area = lay.paste_area * (1.0 + truncated_normal(rng, m.area));
                    p.height = p.volume / p.area;
                    p.offset.dx = point.paste_offset_level[0] * lay.paste_range[0] +
                                  truncated_normal(rng, m.paste_xy * L);
                    p.offset.dy = point.paste_offset_level[1] * lay.paste_range[1] +
                                  truncated_normal(rng, m.paste_xy * W);
                    p.offset.dtheta = point.paste_offset_level[2] * lay.paste_range[2] +
                                      truncated_normal(rng, m.paste_rot);
                }

                r.placement.pressure = point.pressure;
                r.placement.offset.dx = point.placement_offset_level[0] * lay.placement_range[0] +
                                        truncated_normal(rng, m.placement_xy * L);
                r.placement.offset.dy = point.placement_offset_level[1] * lay.placement_range[1] +
                                        truncated_normal(rng, m.placement_xy * W);
                r.placement.offset.dtheta = point.placement_offset_level[2] * lay.placement_range[2] +
                                            truncated_normal(rng, m.placement_rot);

                r.meta = {rep + 1, point.combination_id, rep + 1};
                records.push_back(std::move(r));
            }
        }
    }
    return records;
}

TargetTriple truth_mean(const AssemblyRecord& record, const TruthModel& truth) {
    const double L = record.component.length;
    const double W = record.component.width;
    const auto& place = record.placement.offset;

    const double v1 = record.paste1.volume;
    const double v2 = record.paste2.volume;
    const double volume_ratio = (v1 - v2) / (0.5 * (v1 + v2));

    const double nc1 = geometry::noncontact_area(features::paste_footprint(record.pads.pad1, record.paste1),
                                                 record.pads.pad1);
    const double nc2 = geometry::noncontact_area(features::paste_footprint(record.pads.pad2, record.paste2),
                                                 record.pads.pad2);
    const double paste_dy = 0.5 * (record.paste1.offset.dy + record.paste2.offset.dy);

    const double u = place.dy / (0.25 * W * kUmPerMm);
    const double rot = place.dtheta / 10.0;

    TargetTriple t;
    t.shift_x = -truth.kappa_x * place.dx + truth.gamma_x * volume_ratio * 100.0 * L +
                truth.interaction * u * rot * 100.0 * L;
    t.shift_y = -truth.kappa_y * place.dy + truth.gamma_y * 0.5 * (nc1 + nc2) * sign(paste_dy) * 300.0 / L;
    t.shift_rot = -truth.kappa_rot * place.dtheta;
    return t;
}

TargetTriple synth_truth(const AssemblyRecord& record, const GenConfig& config, std::mt19937_64& rng) {
    TargetTriple t = truth_mean(record, config.truth);
    std::normal_distribution<double> unit(0.0, 1.0);
    t.shift_x += config.target_noise[0] * unit(rng);
    t.shift_y += config.target_noise[1] * unit(rng);
    t.shift_rot = geometry::wrap_degrees(t.shift_rot + config.target_noise[2] * unit(rng));
    return t;
}

void inject_missing(std::vector<AssemblyRecord>& records, double rate, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate <= 0.1)) {
        throw Error(ErrorKind::InvalidArgument, "missing rate must lie in [0, 0.1]");
    }
    if (rate == 0.0) return;
    std::bernoulli_distribution lost(rate);
    for (auto& r : records) {
        if (lost(rng)) r.targets.reset();
    }
}

std::vector<AssemblyRecord> generate(const GenConfig& config) {
    auto records = design_grid(config);
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::mt19937_64 rng(derive_seed(config.seed, 2 * i + 1));
        records[i].targets = synth_truth(records[i], config, rng);
    }
    std::mt19937_64 rng(derive_seed(config.seed, kMissingStream));
    inject_missing(records, config.missing_rate, rng);
    return records;
}

std::vector<RawSample> to_samples(const std::vector<AssemblyRecord>& records) {
    std::vector<RawSample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        RawSample s;
        s.meta = {r.meta, r.component.type, r.component.size};
        const auto fv = features::extract_features(r);
        s.features.assign(fv.values.begin(), fv.values.end());
        if (r.targets) {
            for (Target t : kAllTargets) s.targets[static_cast<std::size_t>(t)] = get(*r.targets, t);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace reflow::datagen
