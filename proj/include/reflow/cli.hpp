#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "reflow/error.hpp"

namespace reflow::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kIoError = 2,
    kParseError = 3,
    kNoData = 4,  // EmptyDataset, TooFewRows
    kSchemaMismatch = 5,
    kNotConverged = 6,
    kDiverged = 7,
    kWrongModelFamily = 8,
    kOther = 9,
};

int exit_code(ErrorKind kind);

/// Runs one command line (args[0] is the program name). Errors are reported
/// on `err` as "error: <Kind>: <message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reflow::cli
