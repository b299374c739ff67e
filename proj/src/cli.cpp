#include "cgas/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fftw3.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <toml.hpp>

#include "cgas/acceptance.hpp"
#include "cgas/config_io.hpp"
#include "cgas/diagnostics.hpp"
#include "cgas/equilibrium.hpp"
#include "cgas/jellium.hpp"
#include "cgas/sampler.hpp"
#include "cgas/splitting.hpp"

#ifndef CGAS_VERSION
#define CGAS_VERSION "0.0.0"
#endif

namespace cgas {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ------------------------------------------------------------------ parsing

namespace {

json toml_to_json(const toml::node& node) {
  if (auto t = node.as_table()) {
    json j = json::object();
    for (auto&& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (auto a = node.as_array()) {
    json j = json::array();
    for (auto&& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (auto s = node.as_string()) return s->get();
  if (auto i = node.as_integer()) return i->get();
  if (auto f = node.as_floating_point()) return f->get();
  if (auto b = node.as_boolean()) return b->get();
  throw SpecError("unsupported TOML value at line " + std::to_string(node.source().begin.line));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SpecError("cannot read " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

} // namespace

json parse_spec_text(const std::string& text, const std::string& path) {
  if (ends_with(path, ".toml")) {
    try {
      return toml_to_json(toml::parse(text, path));
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << path << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
      throw SpecError(os.str());
    }
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    size_t line = 1;
    for (size_t k = 0; k < std::min(e.byte, text.size()); ++k) line += text[k] == '\n';
    throw SpecError(path + ":" + std::to_string(line) + ": invalid JSON");
  }
}

json read_spec_file(const std::string& path) { return parse_spec_text(read_file(path), path); }

// ------------------------------------------------------------------- hashes

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
  return os.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

// --------------------------------------------------------------- validation

namespace {

// Reads fields of one spec table, remembering which keys were consumed so
// that leftovers can be rejected.
class Fields {
public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SpecError(where() + ": expected a table");
  }

  std::string name(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const json& raw(const std::string& k) {
    used_.insert(k);
    if (!j_.contains(k)) throw SpecError(name(k) + ": required field missing");
    return j_.at(k);
  }

  template <class T>
  T req(const std::string& k) {
    return convert<T>(raw(k), name(k));
  }

  template <class T>
  T opt(const std::string& k, T def) {
    used_.insert(k);
    return j_.contains(k) ? convert<T>(j_.at(k), name(k)) : def;
  }

  double positive(const std::string& k, std::optional<double> def = std::nullopt) {
    double x = def && !has(k) ? opt<double>(k, *def) : req<double>(k);
    if (!(x > 0) || !std::isfinite(x)) throw SpecError(name(k) + ": must be a positive number");
    return x;
  }

  long count(const std::string& k, std::optional<long> def = std::nullopt, long min = 1) {
    long x = def && !has(k) ? opt<long>(k, *def) : req<long>(k);
    if (x < min) throw SpecError(name(k) + ": must be at least " + std::to_string(min));
    return x;
  }

  Fields table(const std::string& k) {
    used_.insert(k);
    static const json empty = json::object();
    return Fields(j_.contains(k) ? j_.at(k) : empty, name(k));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw SpecError(name(it.key()) + ": unknown key");
  }

private:
  std::string where() const { return path_.empty() ? "spec" : path_; }

  template <class T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, json>) {
      return v;
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw SpecError(field + ": expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, long> || std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer()) throw SpecError(field + ": expected an integer");
      if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.get<long long>() < 0) throw SpecError(field + ": must be nonnegative");
      }
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw SpecError(field + ": expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw SpecError(field + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw SpecError(field + ": expected an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) throw SpecError(field + ": expected an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) throw SpecError(field + ": expected an array of strings");
      std::vector<std::string> out;
      for (const auto& e : v) {
        if (!e.is_string()) throw SpecError(field + ": expected an array of strings");
        out.push_back(e.get<std::string>());
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<double> positive_list(Fields& f, const std::string& k, std::vector<double> def) {
  auto xs = f.opt<std::vector<double>>(k, def);
  if (xs.empty()) throw SpecError(f.name(k) + ": must not be empty");
  for (double x : xs)
    if (!(x > 0) || !std::isfinite(x)) throw SpecError(f.name(k) + ": entries must be positive");
  return xs;
}

struct MeasureSpec {
  std::string method = "auto"; // auto, radial, obstacle
  double half_width = 1.5;
  double h = 0.02;
  double tol = 1e-9;

  json to_json() const { return {{"method", method}, {"half_width", half_width}, {"h", h}, {"tol", tol}}; }
};

MeasureSpec read_measure(Fields f) {
  MeasureSpec m;
  m.method = f.opt<std::string>("method", m.method);
  if (m.method != "auto" && m.method != "radial" && m.method != "obstacle")
    throw SpecError(f.name("method") + ": expected auto, radial or obstacle");
  m.half_width = f.positive("half_width", m.half_width);
  m.h = f.positive("h", m.h);
  m.tol = f.positive("tol", m.tol);
  if (m.h >= m.half_width) throw SpecError(f.name("h") + ": must be smaller than half_width");
  f.finish();
  return m;
}

EquilibriumMeasure solve_measure(const Potential& v, const MeasureSpec& m) {
  const bool radial = m.method == "radial" || (m.method == "auto" && v.is_radial());
  if (radial) {
    if (!v.is_radial()) throw SpecError("measure.method: radial solver needs a radial potential");
    return solve_equilibrium_radial(v);
  }
  Grid g = Grid::centered(v.d, v.center, m.half_width, m.h);
  return solve_equilibrium_obstacle(v, g, m.tol);
}

// Common context of the particle pipelines.
struct Setup {
  std::string pipeline;
  int d = 2;
  json potential_json;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output;
};

struct Output {
  fs::path dir;
  std::vector<std::string> files;

  void write(const std::string& rel, const std::string& content) {
    fs::path p = dir / rel;
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    os << content;
    if (!os) throw Error("write failed for " + p.string());
    files.push_back(rel);
  }
  void write_config(const std::string& rel, const Configuration& c) {
    std::ostringstream os;
    write_configuration_csv(os, c);
    write(rel, os.str());
  }
};

std::string fmt(double x) { return format_double(x); }

// --------------------------------------------------------------- pipelines
//
// Each pipeline is split into a parse step, which validates the whole spec and
// returns the compute step as a closure, so that no work starts on a bad spec.

using Compute = std::function<json(Output&)>;

Compute parse_equilibrium(Fields& f, const Setup& s) {
  Potential v = potential_from_json(s.d, s.potential_json);
  MeasureSpec m = read_measure(f.table("measure"));
  return [=](Output& out) {
    EquilibriumMeasure mu = solve_measure(v, m);
    fs::create_directories(out.dir);
    write_measure(mu, v, (out.dir / "measure.csv").string(), (out.dir / "measure.json").string());
    out.files.push_back("measure.csv");
    out.files.push_back("measure.json");
    EffectivePotential z = zeta_potential(mu, v);
    return json{{"model", mu.model},
                {"robin_constant", mu.robin_constant},
                {"energy", mu.energy(v)},
                {"mass", mu.grid_mass()},
                {"support_radius", mu.support_radius()},
                {"zeta_min", z.min_value},
                {"zeta_max_abs_on_support", z.max_abs_on_support}};
  };
}

json ground_state_summary(const Configuration& c, const EquilibriumMeasure& mu, const Potential& v) {
  json j{{"energy", hamiltonian(c, v)},
         {"next_order", next_order_energy(c, mu, v)},
         {"next_order_lower_bound", next_order_lower_bound(mu)}};
  XiEstimate xi = xi_d(mu);
  j["xi"] = xi.to_json();
  if (c.d == 2 && c.size() >= 7) {
    BondOrder b = bond_order_psi6(c);
    j["psi6_bulk_mean"] = b.bulk_mean;
    j["psi6_interior_mean"] = b.interior_mean;
  }
  return j;
}

Compute parse_ground_state(Fields& f, const Setup& s) {
  Potential v = potential_from_json(s.d, s.potential_json);
  MeasureSpec m = read_measure(f.table("measure"));
  const size_t n = f.count("n", std::nullopt, 2);
  AnnealSchedule schedule = AnnealSchedule::from_json(f.opt<json>("schedule", json::object()));
  const double tol = f.positive("tol", 1e-7);
  return [=](Output& out) {
    EquilibriumMeasure mu = solve_measure(v, m);
    GroundState gs = find_ground_state(n, v, mu, schedule, s.seed, tol, s.threads);
    out.write_config("ground_state.csv", gs.config);
    json j = gs.to_json();
    j.update(ground_state_summary(gs.config, mu, v));
    j["schedule"] = schedule.to_json();
    return j;
  };
}

Compute parse_tile(Fields& f, const Setup& s) {
  Potential v = potential_from_json(s.d, s.potential_json);
  MeasureSpec m = read_measure(f.table("measure"));
  const size_t n = f.count("n", std::nullopt, 2);
  const double r_cell = f.positive("r_cell", 2.0);
  const double r0 = f.opt<double>("r0", 0.0);
  if (r0 < 0) throw SpecError(f.name("r0") + ": must be nonnegative");
  return [=](Output& out) {
    EquilibriumMeasure mu = solve_measure(v, m);
    TilingReport rep;
    Configuration c = generate_tiled_configuration(mu, n, r_cell, s.seed, &rep, r0);
    out.write_config("tiled.csv", c);
    json j = ground_state_summary(c, mu, v);
    j["tiles"] = rep.tiles;
    j["lattice_points"] = rep.lattice_points;
    j["boundary_points"] = rep.boundary_points;
    j["r0"] = rep.r0;
    j["min_separation"] = rep.min_separation;
    return j;
  };
}

GibbsOptions read_gibbs_options(Fields& f, const Setup& s) {
  GibbsOptions o;
  o.chains = static_cast<int>(f.count("chains", 4));
  o.burn_in = f.count("burn_in", 2000, 0);
  o.samples = f.count("samples", 250);
  o.thin = f.count("thin", 0, 0);
  o.start = f.opt<std::string>("start", "measure");
  if (o.start != "measure" && o.start != "ground-state")
    throw SpecError(f.name("start") + ": expected measure or ground-state");
  o.seed = s.seed;
  o.threads = s.threads;
  return o;
}

std::string energies_csv(const GibbsRun& run, int chains) {
  std::ostringstream os;
  os << "chain,index,energy\n";
  const size_t per = run.energies.size() / chains;
  for (size_t k = 0; k < run.energies.size(); ++k) os << k / per << ',' << k % per << ',' << fmt(run.energies[k]) << '\n';
  return os.str();
}

Compute parse_gibbs(Fields& f, const Setup& s, std::vector<std::string>& inputs) {
  Potential v = potential_from_json(s.d, s.potential_json);
  MeasureSpec m = read_measure(f.table("measure"));
  const size_t n = f.count("n", std::nullopt, 2);
  const double beta = f.positive("beta");
  GibbsOptions o = read_gibbs_options(f, s);
  const long stride = f.count("dump_stride", 0, 0);
  const std::string resume = f.opt<std::string>("resume", "");
  if (!resume.empty()) {
    json ck = read_spec_file(resume);
    if (!ck.contains("chains") || !ck.contains("thin")) throw SpecError(f.name("resume") + ": not a checkpoint file");
    for (const auto& c : ck.at("chains")) o.resume.push_back(Chain::from_json(c));
    o.chains = static_cast<int>(o.resume.size());
    o.thin = ck.at("thin").get<long>();
    if (ck.value("n", size_t(0)) != n || ck.value("beta", 0.0) != beta)
      throw SpecError(f.name("resume") + ": checkpoint was made with a different n or beta");
    inputs.push_back(resume);
  }
  return [=](Output& out) {
    EquilibriumMeasure mu = solve_measure(v, m);
    GibbsRun run = sample_gibbs(n, v, mu, beta, o);
    out.write("energies.csv", energies_csv(run, o.chains));
    if (stride > 0) {
      const size_t per = run.samples.size() / o.chains;
      for (size_t k = 0; k < run.samples.size(); ++k)
        if ((k % per) % stride == 0) {
          std::ostringstream name;
          name << "samples/chain" << k / per << "_" << std::setw(6) << std::setfill('0') << k % per << ".csv";
          out.write_config(name.str(), run.samples[k]);
        }
    }
    json ck{{"n", n}, {"beta", beta}, {"thin", run.thin}, {"chains", json::array()}};
    for (const Chain& c : run.chains) ck["chains"].push_back(c.to_json());
    out.write("checkpoint.json", ck.dump(1) + "\n");
    json j = run.to_json();
    Accumulator e;
    for (double x : run.energies) e += x;
    j["mean_energy"] = e.value() / run.energies.size();
    j["resumed"] = !resume.empty();
    return j;
  };
}

Compute parse_free_energy(Fields& f, const Setup& s) {
  Potential v = potential_from_json(s.d, s.potential_json);
  MeasureSpec m = read_measure(f.table("measure"));
  const size_t n = f.count("n", std::nullopt, 1);
  std::vector<double> betas;
  if (f.has("beta") && f.has("betas")) throw SpecError(f.name("betas") + ": give either beta or betas");
  if (f.has("betas"))
    betas = positive_list(f, "betas", {});
  else
    betas = {f.positive("beta")};
  FreeEnergyProtocol protocol = FreeEnergyProtocol::from_json(f.opt<json>("protocol", json::object()));
  protocol.seed = s.seed;
  protocol.threads = s.threads;
  const bool bounds = f.opt<bool>("bounds", true);
  const double trial_h = f.positive("trial_h", 0.05);
  return [=](Output& out) {
    EquilibriumMeasure mu = solve_measure(v, m);
    std::ostringstream os;
    os << "n,beta,free_energy,error,reference,lower,upper,flagged\n";
    json rows = json::array();
    for (double beta : betas) {
      FreeEnergyEstimate est = free_energy(n, v, mu, beta, protocol);
      json row = est.to_json();
      double lo = NAN, hi = NAN;
      if (bounds) {
        EquilibriumMeasure trial = solve_mu_beta(v, int(n), beta, mu_beta_grid(v, int(n), beta, trial_h));
        FreeEnergyBounds b = free_energy_bounds(n, v, mu, trial, beta);
        lo = b.lower;
        hi = b.upper;
        row["bounds"] = b.to_json();
      }
      os << n << ',' << fmt(beta) << ',' << fmt(est.value) << ',' << fmt(est.error) << ',' << fmt(est.reference)
         << ',' << fmt(lo) << ',' << fmt(hi) << ',' << (est.flagged ? 1 : 0) << '\n';
      rows.push_back(row);
    }
    out.write("free_energy.csv", os.str());
    return json{{"estimates", rows}, {"protocol", protocol.to_json()}};
  };
}

Compute parse_jellium(Fields& f, const Setup& s) {
  const int d = s.d;
  std::vector<std::string> names;
  if (f.has("lattices")) {
    names = f.req<std::vector<std::string>>("lattices");
    for (const auto& nm : names) {
      try {
        if (make_lattice(nm).d != d) throw SpecError(f.name("lattices") + ": '" + nm + "' is not a " +
                                                     std::to_string(d) + "-dimensional lattice");
      } catch (const SpecError&) {
        throw;
      } catch (const Error&) {
        throw SpecError(f.name("lattices") + ": unknown lattice '" + nm + "'");
      }
    }
  } else {
    for (const Lattice& l : lattice_catalog(d)) names.push_back(l.name);
  }
  if (names.empty()) throw SpecError(f.name("lattices") + ": must not be empty");
  std::vector<double> zs = positive_list(f, "zeta_s", d == 2 ? std::vector<double>{0.1, 0.5, 1.0}
                                                             : std::vector<double>{0.5, 1.5, 2.0});
  for (double x : zs)
    if (std::fabs(2 + x - d) < 1e-12) throw SpecError(f.name("zeta_s") + ": s = d - 2 is the pole of the zeta function");
  const double density = f.positive("density", 1.0);
  const double tol = f.positive("tol", 1e-13);
  std::vector<double> etas;
  if (f.has("box_eta")) etas = positive_list(f, "box_eta", {});
  std::vector<double> sides;
  if (f.has("density_check_sides")) sides = positive_list(f, "density_check_sides", {});
  return [=](Output& out) {
    std::ostringstream os;
    os << "lattice,d,density,W";
    for (double x : zs) { std::ostringstream s; s << x; os << ",zeta_" << s.str(); }
    for (double e : etas) os << ",box_W_eta_" << fmt(e);
    os << '\n';
    json rows = json::array();
    std::vector<Lattice> lats;
    for (const auto& nm : names) {
      Lattice lat = make_lattice(nm).with_density(density);
      lats.push_back(lat);
      double w = lattice_energy(lat, tol);
      json row{{"lattice", nm}, {"W", w}};
      os << nm << ',' << d << ',' << fmt(density) << ',' << fmt(w);
      for (double x : zs) {
        double z = epstein_zeta(lat, x);
        os << ',' << fmt(z);
        row["zeta"][fmt(x)] = z;
      }
      for (double e : etas) {
        double b = box_averaged_W_eta(lat, e).value;
        os << ',' << fmt(b);
        row["box_W_eta"][fmt(e)] = b;
      }
      os << '\n';
      rows.push_back(row);
    }
    out.write("jellium.csv", os.str());
    json j{{"lattices", rows}};
    if (d == 2 && lats.size() >= 2) {
      json cmp = json::array();
      for (size_t k = 1; k < lats.size(); ++k) {
        json e = zeta_renorm_consistency(lats[0], lats[k], zs).to_json();
        e["pair"] = {names[0], names[k]};
        cmp.push_back(e);
      }
      j["zeta_consistency"] = cmp;
    }
    if (!sides.empty()) {
      std::ostringstream ps;
      ps << "lattice,side,ratio,envelope,within\n";
      for (size_t k = 0; k < lats.size(); ++k) {
        PeriodDensityReport rep = period_density_check(lattice_torus(lats[k]), sides);
        for (const auto& r : rep.rows)
          ps << names[k] << ',' << fmt(r.side) << ',' << fmt(r.ratio) << ',' << fmt(r.envelope) << ','
             << (r.within ? 1 : 0) << '\n';
        j["density_check"][names[k]] = rep.to_json();
      }
      out.write("period_density.csv", ps.str());
    }
    return j;
  };
}

Compute parse_diagnostics(Fields& f, const Setup& s, std::vector<std::string>& inputs) {
  Potential v = potential_from_json(s.d, s.potential_json);
  MeasureSpec m = read_measure(f.table("measure"));
  const std::string source = f.opt<std::string>("source", "gibbs");
  if (source != "gibbs" && source != "iid" && source != "files")
    throw SpecError(f.name("source") + ": expected gibbs, iid or files");
  size_t n = 0;
  double beta = 0;
  GibbsOptions o;
  long count = 0;
  std::vector<std::string> files;
  if (source == "files") {
    files = f.req<std::vector<std::string>>("files");
    if (files.empty()) throw SpecError(f.name("files") + ": must not be empty");
    for (const auto& p : files) inputs.push_back(p);
  } else {
    n = f.count("n", std::nullopt, 2);
    if (source == "gibbs") {
      beta = f.positive("beta");
      Fields g = f.table("gibbs");
      o = read_gibbs_options(g, s);
      g.finish();
    } else {
      count = f.count("samples", 1000);
    }
  }
  std::vector<double> radii;
  if (f.has("radii")) radii = positive_list(f, "radii", {});
  const std::vector<double> lambdas = positive_list(f, "lambdas", {0.2, 0.5});
  const bool baseline = f.opt<bool>("baseline", true);
  const double grid_h = f.positive("grid_h", 0.1);
  return [=](Output& out) {
    EquilibriumMeasure mu = solve_measure(v, m);
    std::vector<Configuration> samples;
    json j{{"source", source}};
    if (source == "files") {
      for (const auto& p : files) samples.push_back(read_configuration_csv(p));
      for (const auto& c : samples)
        if (c.d != s.d || c.size() != samples.front().size())
          throw SpecError("files: configurations must share the dimension and point count");
    } else if (source == "gibbs") {
      GibbsRun run = sample_gibbs(n, v, mu, beta, o);
      samples = run.samples;
      j["gibbs"] = run.to_json();
      j["beta"] = beta;
    } else {
      std::mt19937_64 rng(s.seed);
      for (long k = 0; k < count; ++k) samples.push_back(sample_measure(mu, n, rng));
    }
    const size_t np = samples.front().size();
    std::vector<double> rs = radii.empty() ? std::vector<double>{micro_radius(np, s.d)} : radii;
    TailTable tails = fluctuation_tails(samples, mu, rs, lambdas);
    std::string csv = tails.to_csv();
    std::ostringstream tc;
    tc << "ensemble," << csv.substr(0, csv.find('\n') + 1);
    auto append = [&](const std::string& tag, const std::string& body) {
      std::istringstream is(body);
      std::string line;
      std::getline(is, line);
      while (std::getline(is, line)) tc << tag << ',' << line << '\n';
    };
    append(source, csv);
    j["tails"] = tails.to_json();
    if (baseline && source != "iid") {
      std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
      std::vector<Configuration> iid;
      for (size_t k = 0; k < samples.size(); ++k) iid.push_back(sample_measure(mu, np, rng));
      TailTable base = fluctuation_tails(iid, mu, rs, lambdas, tails.centers);
      append("iid", base.to_csv());
      j["baseline_tails"] = base.to_json();
    }
    out.write("tails.csv", tc.str());

    Grid g = Grid::centered(s.d, mu.center(), 1.1 * mu.support_radius(), grid_h);
    DensityProfile prof = density_profile(samples, mu, g);
    std::ostringstream dc;
    dc << (s.d == 2 ? "x0,x1,empirical,mu0\n" : "x0,x1,x2,empirical,mu0\n");
    for (size_t k = 0; k < g.size(); ++k) {
      Point x = g.node(k);
      for (int a = 0; a < s.d; ++a) dc << fmt(x[a]) << ',';
      dc << fmt(prof.empirical[k]) << ',' << fmt(mu.density(x)) << '\n';
    }
    out.write("density.csv", dc.str());
    std::ostringstream bc;
    bc << (s.d == 2 ? "scale,c0,c1,value\n" : "scale,c0,c1,c2,value\n");
    for (size_t k = 0; k < prof.bump_values.size(); ++k) {
      bc << fmt(prof.bump_scales[k]);
      for (int a = 0; a < s.d; ++a) bc << ',' << fmt(prof.bump_centers[k][a]);
      bc << ',' << fmt(prof.bump_values[k]) << '\n';
    }
    out.write("bumps.csv", bc.str());
    j["density_profile"] = prof.to_json();

    if (s.d == 2 && np >= 7) {
      std::ostringstream pc;
      pc << "sample,bulk_mean,interior_mean\n";
      Accumulator mean;
      for (size_t k = 0; k < samples.size(); ++k) {
        BondOrder b = bond_order_psi6(samples[k]);
        mean += b.bulk_mean;
        pc << k << ',' << fmt(b.bulk_mean) << ',' << fmt(b.interior_mean) << '\n';
      }
      out.write("psi6.csv", pc.str());
      j["psi6_bulk_mean"] = mean.value() / samples.size();
    }
    j["samples"] = samples.size();
    return j;
  };
}

json versions() {
  return {{"cgas", CGAS_VERSION},
          {"boost", BOOST_LIB_VERSION},
          {"fftw", std::string(fftw_version)},
          {"openssl", OPENSSL_VERSION_TEXT},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

} // namespace

RunResult run_spec(const json& spec_in, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  // A manifest can be rerun directly.
  json spec = spec_in.is_object() && spec_in.contains("manifest_version") ? spec_in.at("spec") : spec_in;
  if (opt.seed) spec["seed"] = *opt.seed;
  if (!opt.out.empty()) spec["output"] = opt.out;

  std::vector<std::string> inputs;
  Compute compute;
  Setup s;
  Fields f(spec, "");
  try {
    s.pipeline = f.req<std::string>("pipeline");
    static const std::set<std::string> known{"equilibrium", "ground-state", "gibbs", "free-energy",
                                             "jellium",     "diagnostics",  "tile"};
    if (!known.count(s.pipeline)) throw SpecError("pipeline: unknown pipeline '" + s.pipeline + "'");
    s.d = f.req<int>("dimension");
    if (s.d != 2 && s.d != 3) throw SpecError("dimension: must be 2 or 3");
    s.seed = f.opt<std::uint64_t>("seed", 1);
    s.threads = opt.threads ? *opt.threads : f.opt<int>("threads", default_threads());
    if (s.threads < 1) throw SpecError("threads: must be at least 1");
    s.output = f.req<std::string>("output");
    if (s.pipeline != "jellium") s.potential_json = f.opt<json>("potential", json{{"type", "quadratic"}});
    if (s.pipeline == "equilibrium") compute = parse_equilibrium(f, s);
    if (s.pipeline == "ground-state") compute = parse_ground_state(f, s);
    if (s.pipeline == "tile") compute = parse_tile(f, s);
    if (s.pipeline == "gibbs") compute = parse_gibbs(f, s, inputs);
    if (s.pipeline == "free-energy") compute = parse_free_energy(f, s);
    if (s.pipeline == "jellium") compute = parse_jellium(f, s);
    if (s.pipeline == "diagnostics") compute = parse_diagnostics(f, s, inputs);
    f.finish();
  } catch (const json::exception& e) {
    throw SpecError(std::string("spec: ") + e.what());
  }

  Output out;
  out.dir = s.output;
  fs::create_directories(out.dir);
  json summary = compute(out);
  summary["pipeline"] = s.pipeline;
  out.write("summary.json", summary.dump(2) + "\n");

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest{{"manifest_version", 1}, {"pipeline", s.pipeline}, {"spec", spec},   {"seed", s.seed},
                {"threads", s.threads},  {"versions", versions()},  {"wall_time_seconds", wall}};
  manifest["inputs"] = json::object();
  manifest["inputs"]["spec"] = sha256_hex(spec.dump());
  if (!opt.spec_path.empty()) manifest["inputs"][opt.spec_path] = sha256_file(opt.spec_path);
  for (const auto& p : inputs) manifest["inputs"][p] = sha256_file(p);
  manifest["outputs"] = json::object();
  for (const auto& rel : out.files) manifest["outputs"][rel] = sha256_file((out.dir / rel).string());
  {
    std::ofstream os(out.dir / "manifest.json");
    if (!os) throw Error("cannot write manifest");
    os << manifest.dump(2) << '\n';
  }
  return {out.dir.string(), out.files, summary, manifest};
}

// -------------------------------------------------------------------- main

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coulomb gas laboratory"};
  app.require_subcommand(1);
  std::string spec_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  auto* run = app.add_subcommand("run", "execute a run specification (JSON or TOML)");
  run->add_option("--spec", spec_path, "spec file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the spec seed");
  auto* threads_opt = run->add_option("--threads", threads, "worker threads (default: CGAS_THREADS or 1)")
                          ->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory (overrides the spec)");

  std::string suite, tolerances;
  std::vector<int> only;
  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  verify->add_option("suite", suite, "fast or full")->required()->check(CLI::IsMember({"fast", "full"}));
  verify->add_option("--tolerances", tolerances, "JSON/TOML file overriding criterion tolerances");
  verify->add_option("--only", only, "criterion numbers to run");
  auto* vthreads = verify->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) {
      RunOptions o;
      if (*seed_opt) o.seed = seed;
      if (*threads_opt) o.threads = threads;
      o.out = out_dir;
      o.spec_path = spec_path;
      RunResult r = run_spec(read_spec_file(spec_path), o);
      out << "wrote " << r.files.size() << " files to " << r.output_dir << '\n';
      return 0;
    }
    AcceptanceOptions ao;
    ao.suite = suite;
    ao.threads = *vthreads ? threads : default_threads();
    if (!tolerances.empty()) ao.tolerances = read_spec_file(tolerances);
    ao.only = only;
    auto results = run_acceptance(ao, out);
    return all_passed(results) ? 0 : 1;
  } catch (const SpecError& e) {
    err << "invalid spec: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return 3;
  }
}

} // namespace cgas
