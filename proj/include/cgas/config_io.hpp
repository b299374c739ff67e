#pragma once

#include <iosfwd>
#include <string>

#include "cgas/core.hpp"

namespace cgas {

// CSV with header "x0,x1" or "x0,x1,x2", one point per row, 17 significant digits.
void write_configuration_csv(std::ostream& os, const Configuration& c);
void write_configuration_csv(const std::string& path, const Configuration& c);
Configuration read_configuration_csv(std::istream& is);
Configuration read_configuration_csv(const std::string& path);

// Shortest decimal rendering that round-trips (printf %.17g).
std::string format_double(double x);

} // namespace cgas
