#include "qfilt/record_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qfilt {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::runtime_error("record csv line " + std::to_string(line) + ": cannot parse '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_record_csv(std::ostream& os, const MeasurementRecord& r) {
  const bool prime = r.has_prime();
  os << (prime ? "t,dY,dYp\n" : "t,dY\n");
  for (std::size_t k = 0; k < r.steps(); ++k) {
    os << format_double(static_cast<double>(k + 1) * r.dt) << ',' << format_double(r.dY[k]);
    if (prime) os << ',' << format_double(r.dYp[k]);
    os << '\n';
  }
}

MeasurementRecord read_record_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("record csv: empty input");
  const auto header = split(line);
  bool prime = false;
  if (header == std::vector<std::string>{"t", "dY", "dYp"}) {
    prime = true;
  } else if (header != std::vector<std::string>{"t", "dY"}) {
    throw std::runtime_error("record csv: header must be 't,dY' or 't,dY,dYp'");
  }
  MeasurementRecord r;
  std::vector<double> times;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != (prime ? 3u : 2u)) {
      throw std::runtime_error("record csv line " + std::to_string(lineno) + ": wrong column count");
    }
    times.push_back(parse_double(cells[0], lineno));
    r.dY.push_back(parse_double(cells[1], lineno));
    if (prime) r.dYp.push_back(parse_double(cells[2], lineno));
  }
  if (times.empty()) throw std::runtime_error("record csv: no increments");
  r.dt = times.front();
  if (!(r.dt > 0.0)) throw std::runtime_error("record csv: first time stamp must be dt > 0");
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double expected = static_cast<double>(k + 1) * r.dt;
    if (std::abs(times[k] - expected) > 1e-9 * std::max(1.0, expected)) {
      throw std::runtime_error("record csv: time grid is not uniform at row " + std::to_string(k + 1));
    }
  }
  return r;
}

void save_record_csv(const std::filesystem::path& path, const MeasurementRecord& r) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_record_csv(os, r);
}

MeasurementRecord load_record_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_record_csv(is);
}

std::vector<std::string> state_columns(Eigen::Index dim, const std::string& prefix) {
  std::vector<std::string> names;
  for (const char* part : {"_re_", "_im_"}) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        names.push_back(prefix + part + std::to_string(i) + std::to_string(j));
      }
    }
  }
  return names;
}

std::vector<double> state_values(const CMatrix& rho) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(2 * rho.size()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j) v.push_back(rho(i, j).real());
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j) v.push_back(rho(i, j).imag());
  return v;
}

void write_csv_row(std::ostream& os, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << format_double(values[i]);
  }
  os << '\n';
}

void write_csv_header(std::ostream& os, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) os << ',';
    os << names[i];
  }
  os << '\n';
}

}  // namespace qfilt
