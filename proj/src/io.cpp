#include "reflow/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "reflow/error.hpp"

namespace reflow::io {

using nlohmann::json;

namespace {

constexpr std::size_t kMetaCount = 5;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

[[noreturn]] void parse_fail(std::size_t line_no, std::string_view column, const std::string& what) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_no) + ", column '" + std::string(column) + "': " + what);
}

double parse_double(std::string_view text, std::size_t line_no, std::string_view column) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) parse_fail(line_no, column, "not a number: '" + std::string(text) + "'");
    return v;
}

int parse_int(std::string_view text, std::size_t line_no, std::string_view column) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        parse_fail(line_no, column, "not an integer: '" + std::string(text) + "'");
    }
    return v;
}

bool is_target_name(std::string_view name) {
    for (Target t : kAllTargets) {
        if (to_string(t) == name) return true;
    }
    return false;
}

json scaler_json(const preprocess::Scaler& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

preprocess::Scaler scaler_from(const json& j) {
    preprocess::Scaler s;
    j.at("mean").get_to(s.mean);
    j.at("stddev").get_to(s.stddev);
    if (s.mean.size() != s.stddev.size()) throw Error(ErrorKind::ParseError, "scaler mean/stddev size differ");
    return s;
}

json series_json(const preprocess::SeriesScale& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

preprocess::SeriesScale series_from(const json& j) {
    return {j.at("mean").get<double>(), j.at("stddev").get<double>()};
}

json tree_json(const rfr::SplitTree& tree) {
    std::vector<std::int32_t> feature;
    std::vector<double> threshold;
    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    std::vector<double> value;
    std::vector<std::uint32_t> count;
    std::vector<double> decrease;
    for (const auto& n : tree.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        count.push_back(n.count);
        decrease.push_back(n.impurity_decrease);
    }
    return {{"feature_subset", tree.feature_subset},
            {"feature", feature},
            {"threshold", threshold},
            {"left", left},
            {"right", right},
            {"value", value},
            {"count", count},
            {"impurity_decrease", decrease}};
}

rfr::SplitTree tree_from(const json& j) {
    rfr::SplitTree tree;
    j.at("feature_subset").get_to(tree.feature_subset);
    const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<std::uint32_t>>();
    const auto right = j.at("right").get<std::vector<std::uint32_t>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto count = j.at("count").get<std::vector<std::uint32_t>>();
    const auto decrease = j.at("impurity_decrease").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n ||
        count.size() != n || decrease.size() != n) {
        throw Error(ErrorKind::ParseError, "tree node arrays are empty or differ in length");
    }
    tree.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        tree.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i], count[i], decrease[i]};
        if (feature[i] >= 0 && (left[i] >= n || right[i] >= n)) {
            throw Error(ErrorKind::ParseError, "tree child index out of range");
        }
    }
    return tree;
}

}  // namespace

const std::vector<std::string>& meta_columns() {
    static const std::vector<std::string> cols = {"board_id", "combination_id", "replicate_id", "component_type",
                                                  "size_class"};
    return cols;
}

void write_csv(std::ostream& out, const CsvTable& table, const ExtraColumns& extra) {
    for (const auto& [name, values] : extra) {
        if (values.size() != table.rows.size()) {
            throw Error(ErrorKind::LengthMismatch, "extra column '" + name + "' has the wrong length");
        }
    }
    std::string line;
    auto header = meta_columns();
    header.insert(header.end(), table.feature_names.begin(), table.feature_names.end());
    if (table.has_targets) {
        for (Target t : kAllTargets) header.emplace_back(to_string(t));
    }
    for (const auto& e : extra) header.push_back(e.first);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) line += ',';
        line += header[i];
    }
    out << line << '\n';

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const RawSample& s = table.rows[r];
        if (s.features.size() != table.feature_names.size()) {
            throw Error(ErrorKind::ShapeMismatch, "row " + std::to_string(r) + " has the wrong feature count");
        }
        line.clear();
        line += std::to_string(s.meta.ids.board_id) + ',' + std::to_string(s.meta.ids.combination_id) + ',' +
                std::to_string(s.meta.ids.replicate_id) + ',' + std::string(to_string(s.meta.type)) + ',' +
                to_string(s.meta.size);
        for (double v : s.features) {
            line += ',';
            if (std::isfinite(v)) line += format_double(v);
        }
        if (table.has_targets) {
            for (const auto& t : s.targets) {
                line += ',';
                if (t) line += format_double(*t);
            }
        }
        for (const auto& e : extra) {
            line += ',';
            line += format_double(e.second[r]);
        }
        out << line << '\n';
    }
    if (!out) throw Error(ErrorKind::IoError, "write failed");
}

CsvTable read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    for (auto f : split(line)) header.emplace_back(f);

    const auto& meta = meta_columns();
    if (header.size() < kMetaCount || !std::equal(meta.begin(), meta.end(), header.begin())) {
        throw Error(ErrorKind::SchemaMismatch, "header must start with board_id,combination_id,replicate_id,"
                                               "component_type,size_class");
    }
    CsvTable table;
    std::size_t n_features = 0;
    for (std::size_t c = kMetaCount; c < header.size(); ++c) {
        if (is_target_name(header[c])) break;
        table.feature_names.push_back(header[c]);
        ++n_features;
    }
    const std::size_t target_start = kMetaCount + n_features;
    table.has_targets = target_start < header.size();
    if (table.has_targets) {
        if (header.size() != target_start + 3) {
            throw Error(ErrorKind::SchemaMismatch, "targets must be the last three columns");
        }
        for (std::size_t t = 0; t < 3; ++t) {
            if (header[target_start + t] != to_string(kAllTargets[t])) {
                throw Error(ErrorKind::SchemaMismatch, "target columns must be shift_x,shift_y,shift_rot");
            }
        }
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != header.size()) {
            parse_fail(line_no, "*",
                       "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        RawSample s;
        s.meta.ids.board_id = parse_int(fields[0], line_no, header[0]);
        s.meta.ids.combination_id = parse_int(fields[1], line_no, header[1]);
        s.meta.ids.replicate_id = parse_int(fields[2], line_no, header[2]);
        try {
            s.meta.type = parse_component_type(fields[3]);
            s.meta.size = parse_size_class(fields[4]);
        } catch (const Error& e) {
            parse_fail(line_no, "component_type/size_class", e.what());
        }
        s.features.resize(n_features);
        for (std::size_t j = 0; j < n_features; ++j) {
            const auto f = fields[kMetaCount + j];
            s.features[j] = f.empty() ? std::nan("") : parse_double(f, line_no, header[kMetaCount + j]);
        }
        if (table.has_targets) {
            for (std::size_t t = 0; t < 3; ++t) {
                const auto f = fields[target_start + t];
                if (!f.empty()) s.targets[t] = parse_double(f, line_no, header[target_start + t]);
            }
        }
        table.rows.push_back(std::move(s));
    }
    if (in.bad()) throw Error(ErrorKind::IoError, "read failed");
    return table;
}

CsvTable to_table(const Dataset& d) {
    CsvTable t;
    t.feature_names = d.feature_names;
    t.rows.reserve(d.size());
    for (const auto& s : d.rows) t.rows.push_back(to_raw(s));
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv_file(const std::string& path, const CsvTable& table, const ExtraColumns& extra) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    write_csv(out, table, extra);
}

json schema_json() {
    json cols = json::array();
    cols.push_back({{"name", "board_id"}, {"unit", ""}, {"definition", "board the component was placed on"}});
    cols.push_back({{"name", "combination_id"}, {"unit", ""}, {"definition", "design combination, 1..33"}});
    cols.push_back({{"name", "replicate_id"}, {"unit", ""}, {"definition", "replication of the combination"}});
    cols.push_back({{"name", "component_type"}, {"unit", ""}, {"definition", "R (resistor) or C (capacitor)"}});
    cols.push_back({{"name", "size_class"}, {"unit", ""}, {"definition", "1005, 0603 or 0402"}});
    for (const auto& f : features::feature_schema()) {
        cols.push_back({{"name", f.name},
                        {"unit", f.unit},
                        {"category", std::string(features::to_string(f.category))},
                        {"definition", f.definition}});
    }
    cols.push_back({{"name", "shift_x"}, {"unit", "um"}, {"definition", "post-reflow minus pre-reflow x"}});
    cols.push_back({{"name", "shift_y"}, {"unit", "um"}, {"definition", "post-reflow minus pre-reflow y"}});
    cols.push_back(
        {{"name", "shift_rot"}, {"unit", "deg"}, {"definition", "post-reflow minus pre-reflow rotation"}});
    return {{"feature_schema", std::string(features::kSchemaVersion)},
            {"float_format", "%.9g"},
            {"missing", "empty field"},
            {"columns", cols}};
}

json to_json(const FittedModel& m) {
    json j;
    j["schema_version"] = std::string(kModelSchemaVersion);
    j["feature_schema"] =
        m.input_names == features::feature_names() ? std::string(features::kSchemaVersion) : "custom";
    j["family"] = std::string(to_string(m.family));
    j["target"] = std::string(to_string(m.target));
    j["input_names"] = m.input_names;
    j["kept"] = m.kept;
    j["kept_names"] = m.kept_names();
    json body;
    std::visit(
        [&](const auto& model) {
            using M = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<M, svr::SvrModel>) {
                body = {{"C", model.C},
                        {"epsilon", model.epsilon},
                        {"w", model.hyperplane.w},
                        {"b", model.hyperplane.b},
                        {"scaler", scaler_json(model.scaler)},
                        {"target_scale", series_json(model.target_scale)}};
            } else if constexpr (std::is_same_v<M, nn::NnModel>) {
                const auto& c = model.config;
                body = {{"sizes", model.net.sizes},
                        {"params", model.net.params},
                        {"scaler", scaler_json(model.scaler)},
                        {"target_scale", series_json(model.target_scale)},
                        {"config",
                         {{"learning_rate", c.adam.learning_rate},
                          {"beta1", c.adam.beta1},
                          {"beta2", c.adam.beta2},
                          {"eps", c.adam.eps},
                          {"batch_size", c.batch_size},
                          {"epochs", c.epochs},
                          {"second_hidden", c.second_hidden},
                          {"seed", c.seed}}},
                        {"loss_history", model.loss_history}};
            } else if constexpr (std::is_same_v<M, rfr::RfrModel>) {
                json trees = json::array();
                for (const auto& t : model.trees) trees.push_back(tree_json(t));
                body = {{"params",
                         {{"trees", model.params.trees},
                          {"feature_fraction", model.params.feature_fraction},
                          {"per_node_subsample", model.params.per_node_subsample},
                          {"seed", model.params.seed}}},
                        {"feature_count", model.feature_count},
                        {"importances", model.importances},
                        {"trees", trees}};
            } else {
                body = {{"value", model.value}};
            }
        },
        m.model);
    j["model"] = body;
    return j;
}

FittedModel model_from_json(const json& j) {
    const std::string version = j.value("schema_version", "");
    if (version != kModelSchemaVersion) {
        throw Error(ErrorKind::SchemaMismatch,
                    "model schema_version '" + version + "' (expected " + std::string(kModelSchemaVersion) + ")");
    }
    try {
        FittedModel m;
        m.family = parse_family(j.at("family").get<std::string>());
        m.target = parse_target(j.at("target").get<std::string>());
        j.at("input_names").get_to(m.input_names);
        j.at("kept").get_to(m.kept);
        const std::string fschema = j.at("feature_schema").get<std::string>();
        if (fschema == features::kSchemaVersion && m.input_names != features::feature_names()) {
            throw Error(ErrorKind::SchemaMismatch, "input names disagree with " + fschema);
        }
        if (fschema != features::kSchemaVersion && fschema != "custom") {
            throw Error(ErrorKind::SchemaMismatch, "unknown feature schema '" + fschema + "'");
        }
        for (std::size_t k : m.kept) {
            if (k >= m.input_names.size()) throw Error(ErrorKind::ParseError, "kept column out of range");
        }
        const json& b = j.at("model");
        const std::size_t p = m.kept.size();
        switch (m.family) {
            case Family::Svr: {
                svr::SvrModel s;
                s.C = b.at("C").get<double>();
                s.epsilon = b.at("epsilon").get<double>();
                b.at("w").get_to(s.hyperplane.w);
                s.hyperplane.b = b.at("b").get<double>();
                s.scaler = scaler_from(b.at("scaler"));
                s.target_scale = series_from(b.at("target_scale"));
                if (s.hyperplane.w.size() != p || s.scaler.size() != p) {
                    throw Error(ErrorKind::ParseError, "svr weights do not match kept features");
                }
                m.model = std::move(s);
                break;
            }
            case Family::Nn: {
                nn::NnModel n;
                b.at("sizes").get_to(n.net.sizes);
                b.at("params").get_to(n.net.params);
                n.scaler = scaler_from(b.at("scaler"));
                n.target_scale = series_from(b.at("target_scale"));
                const json& c = b.at("config");
                n.config.adam = {c.at("learning_rate").get<double>(), c.at("beta1").get<double>(),
                                 c.at("beta2").get<double>(), c.at("eps").get<double>()};
                n.config.batch_size = c.at("batch_size").get<std::size_t>();
                n.config.epochs = c.at("epochs").get<std::size_t>();
                n.config.second_hidden = c.at("second_hidden").get<std::size_t>();
                n.config.seed = c.at("seed").get<std::uint64_t>();
                b.at("loss_history").get_to(n.loss_history);
                if (n.net.sizes.size() < 2 || n.net.sizes.front() != p || n.net.sizes.back() != 1 ||
                    n.net.params.size() != nn::parameter_count(n.net.sizes) || n.scaler.size() != p) {
                    throw Error(ErrorKind::ParseError, "network shape does not match its parameters");
                }
                m.model = std::move(n);
                break;
            }
            case Family::Rfr: {
                rfr::RfrModel r;
                const json& params = b.at("params");
                r.params.trees = params.at("trees").get<std::size_t>();
                r.params.feature_fraction = params.at("feature_fraction").get<double>();
                r.params.per_node_subsample = params.at("per_node_subsample").get<bool>();
                r.params.seed = params.at("seed").get<std::uint64_t>();
                r.feature_count = b.at("feature_count").get<std::size_t>();
                b.at("importances").get_to(r.importances);
                for (const auto& t : b.at("trees")) r.trees.push_back(tree_from(t));
                if (r.feature_count != p || r.importances.size() != p || r.trees.empty()) {
                    throw Error(ErrorKind::ParseError, "forest does not match kept features");
                }
                for (const auto& t : r.trees) {
                    for (const auto& node : t.nodes) {
                        if (node.feature >= static_cast<std::int32_t>(p)) {
                            throw Error(ErrorKind::ParseError, "tree split feature out of range");
                        }
                    }
                }
                m.model = std::move(r);
                break;
            }
            case Family::Mean: m.model = MeanModel{b.at("value").get<double>()}; break;
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed model file: ") + e.what());
    }
}

void save_model(const std::string& path, const FittedModel& model) {
    write_text_file(path, to_json(model).dump(1) + "\n");
}

FittedModel load_model(const std::string& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, "'" + path + "' is not JSON: " + e.what());
    }
    return model_from_json(j);
}

namespace {

json summary_json(const eval::Summary& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }

json model_config_json(const ModelConfig& c) {
    json j = {{"family", std::string(to_string(c.family))},
              {"filter_features", c.filter_features},
              {"spearman_threshold", c.spearman_threshold}};
    switch (c.family) {
        case Family::Svr:
            j["svr"] = {{"C", c.svr.C}, {"epsilon", c.svr.epsilon}, {"tol", c.svr.tol}, {"max_passes", c.svr.max_passes}};
            break;
        case Family::Nn:
            j["nn"] = {{"learning_rate", c.nn.adam.learning_rate},
                       {"batch_size", c.nn.batch_size},
                       {"epochs", c.nn.epochs},
                       {"second_hidden", c.nn.second_hidden},
                       {"seed", c.nn.seed}};
            break;
        case Family::Rfr:
            j["rfr"] = {{"trees", c.rfr.trees},
                        {"feature_fraction", c.rfr.feature_fraction},
                        {"per_node_subsample", c.rfr.per_node_subsample},
                        {"seed", c.rfr.seed}};
            break;
        case Family::Mean: break;
    }
    return j;
}

}  // namespace

json to_json(const eval::CvReport& report) {
    json targets = json::array();
    for (const auto& t : report.targets) {
        json folds = json::array();
        for (const auto& f : t.folds) {
            folds.push_back({{"fold", f.fold},
                             {"train_rows", f.train_rows},
                             {"test_rows", f.test_rows},
                             {"train_r2", f.train_r2},
                             {"test_rmse", f.test_rmse},
                             {"train_rmse", f.train_rmse},
                             {"test_r2", f.test_r2 ? json(*f.test_r2) : json(nullptr)},
                             {"kept_features", f.kept_features}});
        }
        json types = json::array();
        for (std::size_t g = 0; g < eval::kTypeGroups; ++g) {
            json row = {{"type", eval::type_group(g).label()}};
            if (t.per_type[g]) {
                row["count"] = t.per_type[g]->count;
                row["test_rmse"] = t.per_type[g]->rmse;
            } else {
                row["count"] = 0;
                row["test_rmse"] = nullptr;
            }
            types.push_back(row);
        }
        targets.push_back({{"target", std::string(to_string(t.target))},
                           {"folds", folds},
                           {"train_r2", summary_json(t.train_r2)},
                           {"test_rmse", summary_json(t.test_rmse)},
                           {"extensions", {{"train_rmse", summary_json(t.train_rmse)}}},
                           {"per_type", types}});
    }
    return {{"schema_version", std::string(kReportSchemaVersion)},
            {"model", model_config_json(report.config)},
            {"folds", report.options.folds},
            {"seed", report.options.seed},
            {"stratified", report.options.stratified},
            {"rows", report.rows},
            {"targets", targets}};
}

json to_json(const preprocess::OutlierResult& outliers, const preprocess::MissingResult& missing) {
    json fences = json::object();
    for (Target t : kAllTargets) {
        const auto& f = outliers.fences[static_cast<std::size_t>(t)];
        fences[std::string(to_string(t))] = {{"q1", f.q1}, {"q3", f.q3}, {"lower", f.lower}, {"upper", f.upper},
                                             {"flagged", outliers.flagged_by_target[static_cast<std::size_t>(t)]}};
    }
    return {{"input_rows", missing.input_rows},
            {"missing_removed", missing.removed},
            {"outliers_removed", outliers.removed},
            {"output_rows", outliers.data.size()},
            {"fences", fences}};
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

}  // namespace reflow::io
