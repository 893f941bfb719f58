#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nsr/density.hpp"
#include "nsr/model.hpp"

namespace nsr {

// Matrix text format: first line "M N L", then one line per column holding
// its L ascending row indices (0-based, space-separated). Only fixed
// column-weight matrices are serializable.
void write_matrix(std::ostream& os, const SensingMatrix& matrix);
SensingMatrix read_matrix(std::istream& is);

// Vector text format: one real per line, full double precision.
void write_vector(std::ostream& os, const std::vector<double>& v);
std::vector<double> read_vector(std::istream& is);

// Density dump: "index,value,mass" rows with a header.
void write_density_csv(std::ostream& os, const SampledDensity& d);

// Per-round marginal trace: "round,index,value,mass" rows with a header.
void write_marginal_trace_csv(std::ostream& os,
                              const std::vector<SampledDensity>& trace);

// Full-precision, locale-independent float formatting ("%.17g").
std::string format_double(double v);

}  // namespace nsr
