#pragma once

// CSV import/export for measurement records and state time series.
//
// Record files carry a header `t,dY` or `t,dY,dYp`; row k holds the increment
// over [k dt, (k+1) dt] and t is the end of that interval, so t of the first
// row equals dt. Values are written with 17 significant digits.

#include "qfilt/filter.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace qfilt {

std::string format_double(double x);

void write_record_csv(std::ostream& os, const MeasurementRecord& r);
MeasurementRecord read_record_csv(std::istream& is);

void save_record_csv(const std::filesystem::path& path, const MeasurementRecord& r);
MeasurementRecord load_record_csv(const std::filesystem::path& path);

/// Column names rho_re_ij... then rho_im_ij... (row-major).
std::vector<std::string> state_columns(Eigen::Index dim, const std::string& prefix = "rho");
/// Values in the order of state_columns.
std::vector<double> state_values(const CMatrix& rho);

/// Writes one CSV line joining `values` with commas.
void write_csv_row(std::ostream& os, const std::vector<double>& values);
void write_csv_header(std::ostream& os, const std::vector<std::string>& names);

}  // namespace qfilt
