#pragma once

// Plain-text matrix files: one row per line, whitespace-separated decimals.

#include "qgd/core.hpp"

#include <filesystem>
#include <iosfwd>

namespace qgd {

/// Reads a real matrix; blank lines and lines starting with '#' are skipped.
/// Ragged rows raise ValidationError.
Matrix read_matrix(std::istream& in);
Matrix read_matrix(const std::filesystem::path& path);

/// Writes with 17 significant digits so values round-trip exactly.
void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// "%.17g" formatting used by every text output.
std::string format_double(double value);

}  // namespace qgd
