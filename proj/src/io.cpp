#include "nsr/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nsr {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& os, const SensingMatrix& matrix) {
  matrix.validate();
  if (matrix.column_weight <= 0) {
    throw std::invalid_argument(
        "only fixed column-weight matrices are serializable");
  }
  os << matrix.m << ' ' << matrix.n << ' ' << matrix.column_weight << '\n';
  for (const auto& col : matrix.columns) {
    for (size_t t = 0; t < col.size(); ++t) {
      if (t > 0) os << ' ';
      os << col[t];
    }
    os << '\n';
  }
}

SensingMatrix read_matrix(std::istream& is) {
  int m = 0;
  int n = 0;
  int weight = 0;
  if (!(is >> m >> n >> weight)) {
    throw std::invalid_argument("matrix header must be 'M N L'");
  }
  if (m <= 0 || n <= 0 || weight <= 0 || weight > m) {
    throw std::invalid_argument("matrix header values out of range");
  }
  std::vector<std::vector<int>> columns(n);
  for (int i = 0; i < n; ++i) {
    columns[i].resize(weight);
    for (int t = 0; t < weight; ++t) {
      if (!(is >> columns[i][t])) {
        throw std::invalid_argument("matrix body truncated at column " +
                                    std::to_string(i));
      }
    }
  }
  return SensingMatrix::from_columns(m, n, std::move(columns), weight);
}

void write_vector(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) os << format_double(x) << '\n';
}

std::vector<double> read_vector(std::istream& is) {
  std::vector<double> v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    size_t pos = 0;
    double x = 0.0;
    try {
      x = std::stod(line, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("vector line is not a real number: " + line);
    }
    while (pos < line.size() &&
           (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) {
      ++pos;
    }
    if (pos != line.size()) {
      throw std::invalid_argument("trailing characters on vector line: " +
                                  line);
    }
    v.push_back(x);
  }
  return v;
}

void write_density_csv(std::ostream& os, const SampledDensity& d) {
  os << "index,value,mass\n";
  for (int m = 0; m < d.grid.n_d; ++m) {
    os << m << ',' << format_double(d.grid.value(m)) << ','
       << format_double(d.mass[m]) << '\n';
  }
}

void write_marginal_trace_csv(std::ostream& os,
                              const std::vector<SampledDensity>& trace) {
  os << "round,index,value,mass\n";
  for (size_t l = 0; l < trace.size(); ++l) {
    const auto& d = trace[l];
    for (int m = 0; m < d.grid.n_d; ++m) {
      os << (l + 1) << ',' << m << ',' << format_double(d.grid.value(m)) << ','
         << format_double(d.mass[m]) << '\n';
    }
  }
}

}  // namespace nsr
