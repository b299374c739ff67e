#include "cgas/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cgas {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_configuration_csv(std::ostream& os, const Configuration& c) {
  os << (c.d == 2 ? "x0,x1\n" : "x0,x1,x2\n");
  for (const Point& p : c.points) {
    os << format_double(p[0]) << ',' << format_double(p[1]);
    if (c.d == 3) os << ',' << format_double(p[2]);
    os << '\n';
  }
}

void write_configuration_csv(const std::string& path, const Configuration& c) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_configuration_csv(os, c);
}

Configuration read_configuration_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SpecError("configuration CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int d;
  if (line == "x0,x1")
    d = 2;
  else if (line == "x0,x1,x2")
    d = 3;
  else
    throw SpecError("configuration CSV header must be x0,x1 or x0,x1,x2, got '" + line + "'");
  std::vector<Point> pts;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    Point p{0, 0, 0};
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= d) throw SpecError("configuration CSV row " + std::to_string(row) + ": too many columns");
      try {
        size_t used = 0;
        p[k] = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw SpecError("configuration CSV row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
      ++k;
    }
    if (k != d) throw SpecError("configuration CSV row " + std::to_string(row) + ": expected " + std::to_string(d) + " columns");
    pts.push_back(p);
  }
  return Configuration(d, std::move(pts));
}

Configuration read_configuration_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SpecError("cannot open configuration file " + path);
  return read_configuration_csv(is);
}

} // namespace cgas
