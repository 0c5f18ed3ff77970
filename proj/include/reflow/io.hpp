#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reflow/eval.hpp"
#include "reflow/model.hpp"
#include "reflow/preprocess.hpp"

namespace reflow::io {

inline constexpr std::string_view kModelSchemaVersion = "reflow-model/1";
inline constexpr std::string_view kReportSchemaVersion = "reflow-report/1";

/// board_id, combination_id, replicate_id, component_type, size_class.
const std::vector<std::string>& meta_columns();

/// Rows read from a dataset CSV. Target columns are optional in the file;
/// a file without them yields rows with absent targets.
struct CsvTable {
    std::vector<std::string> feature_names;
    std::vector<RawSample> rows;
    bool has_targets = true;
};

/// Extra numeric columns appended after the targets (e.g. predictions).
using ExtraColumns = std::vector<std::pair<std::string, std::vector<double>>>;

/// Floats use 9 significant digits; NaN features and absent targets are
/// written as empty fields.
void write_csv(std::ostream& out, const CsvTable& table, const ExtraColumns& extra = {});

/// Throws ParseError with row and column context.
CsvTable read_csv(std::istream& in);

CsvTable to_table(const Dataset& d);

CsvTable read_csv_file(const std::string& path);
void write_csv_file(const std::string& path, const CsvTable& table, const ExtraColumns& extra = {});

/// Units and definitions of every CSV column.
nlohmann::json schema_json();

nlohmann::json to_json(const FittedModel& model);

/// Throws SchemaMismatch for an unknown schema_version or feature schema.
FittedModel model_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const FittedModel& model);
FittedModel load_model(const std::string& path);

nlohmann::json to_json(const eval::CvReport& report);
nlohmann::json to_json(const preprocess::OutlierResult& outliers, const preprocess::MissingResult& missing);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace reflow::io
