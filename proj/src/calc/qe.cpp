#include "crystalgym/calc/qe.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <sys/wait.h>

#include "crystalgym/calc/constants.hpp"
#include "crystalgym/calc/eos.hpp"
#include "crystalgym/core/errors.hpp"

namespace crystalgym {
namespace {

std::string fixed10(double x) {
  if (x == 0.0) x = 0.0;  // no "-0.0000000000"
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10f", x);
  return buf;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::vector<const Element*> species_of(const Composition& c) {
  std::vector<const Element*> out;
  for (const auto* e : c) {
    bool seen = false;
    for (const auto* s : out) seen = seen || s == e;
    if (!seen) out.push_back(e);
  }
  return out;
}

double number_after(const std::string& line, std::size_t pos) {
  const char* start = line.c_str() + pos;
  char* end = nullptr;
  const double v = std::strtod(start, &end);
  if (end == start) throw ParseError("expected a number in pw.x output line: " + line);
  return v;
}

double total_mass(const Composition& c) {
  double m = 0.0;
  for (const auto* e : c) m += e->atomic_mass;
  return m;
}

}  // namespace

int qe_band_count(const Composition& composition) {
  long z = 0;
  for (const auto* e : composition) z += e->atomic_number;
  const long half = z / 2;
  // ceil(half * 1.2) in exact integer arithmetic
  return static_cast<int>((half * 6 + 4) / 5);
}

std::array<int, 3> qe_kpoint_grid(const Lattice& lattice, double k_density) {
  const double lengths[3] = {lattice.a(), lattice.b(), lattice.c()};
  std::array<int, 3> grid{};
  for (int i = 0; i < 3; ++i) grid[i] = std::max(1, static_cast<int>(std::lround(k_density / lengths[i])));
  return grid;
}

std::string render_qe_input(const Structure& s, const Composition& c, Property property, const QeOptions& o) {
  require_filled(s, c);
  const bool vc_relax = property == Property::density;
  const auto species = species_of(c);
  std::ostringstream os;
  os << "&CONTROL\n"
     << "  calculation = '" << (vc_relax ? "vc-relax" : "scf") << "'\n"
     << "  prefix = '" << o.prefix << "'\n"
     << "  outdir = '" << o.outdir << "'\n"
     << "  pseudo_dir = '" << o.pseudo_dir << "'\n"
     << "  nstep = 1\n"
     << "/\n"
     << "&SYSTEM\n"
     << "  ibrav = 0\n"
     << "  nat = " << s.site_count() << "\n"
     << "  ntyp = " << species.size() << "\n"
     << "  nbnd = " << qe_band_count(c) << "\n"
     << "  ecutwfc = 50\n"
     << "  ecutrho = 400\n"
     << "  occupations = '" << (property == Property::band_gap ? "fixed" : "smearing") << "'\n"
     << "  degauss = 0.001\n"
     << "  nspin = 1\n"
     << "/\n"
     << "&ELECTRONS\n"
     << "  electron_maxstep = 300\n"
     << "  mixing_mode = 'plain'\n"
     << "  mixing_beta = 0.7\n"
     << "  diagonalization = 'david'\n"
     << "/\n";
  if (vc_relax) os << "&IONS\n/\n&CELL\n/\n";
  os << "ATOMIC_SPECIES\n";
  for (const auto* e : species) {
    char mass[32];
    std::snprintf(mass, sizeof mass, "%.5f", e->atomic_mass);
    os << "  " << e->symbol << ' ' << mass << ' ' << replace_all(o.pseudo_pattern, "{symbol}", std::string(e->symbol))
       << '\n';
  }
  os << "ATOMIC_POSITIONS crystal\n";
  for (std::size_t i = 0; i < s.site_count(); ++i) {
    const auto& f = s.sites()[i];
    os << "  " << c[i]->symbol << ' ' << fixed10(f[0]) << ' ' << fixed10(f[1]) << ' ' << fixed10(f[2]) << '\n';
  }
  os << "CELL_PARAMETERS angstrom\n";
  for (const auto& v : s.lattice().vectors()) {
    os << "  " << fixed10(v[0]) << ' ' << fixed10(v[1]) << ' ' << fixed10(v[2]) << '\n';
  }
  const auto k = qe_kpoint_grid(s.lattice(), o.k_density);
  os << "K_POINTS automatic\n"
     << "  " << k[0] << ' ' << k[1] << ' ' << k[2] << " 0 0 0\n";
  return os.str();
}

std::filesystem::path write_qe_input(const Structure& s, const Composition& c, Property property,
                                     const std::filesystem::path& workdir, const QeOptions& o) {
  const std::string text = render_qe_input(s, c, property, o);
  std::error_code ec;
  std::filesystem::create_directories(workdir, ec);
  const auto path = workdir / (o.prefix + "." + std::string(to_string(property)) + ".in");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write QE input " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing QE input " + path.string());
  return path;
}

CalculatorResult parse_qe_output_text(const std::string& text, const QeJob& job) {
  if (text.find("Program PWSCF") == std::string::npos) throw ParseError("not a pw.x output (no PWSCF header)");

  bool job_done = false, converged = false, error_block = false;
  std::string error_message;
  std::optional<double> energy_ry, homo, lumo, fermi, final_volume_a3, initial_volume_bohr3;

  std::istringstream in(text);
  std::string line;
  bool expect_error_text = false;
  while (std::getline(in, line)) {
    if (line.find("JOB DONE.") != std::string::npos) job_done = true;
    if (line.find("convergence has been achieved") != std::string::npos) converged = true;
    if (line.find("%%%%%%%%") != std::string::npos) {
      error_block = true;
      expect_error_text = !expect_error_text;
      continue;
    }
    if (expect_error_text) {
      error_message += line + "\n";
      continue;
    }
    if (!line.empty() && line[0] == '!' && line.find("total energy") != std::string::npos) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("malformed total energy line: " + line);
      energy_ry = number_after(line, eq + 1);
    } else if (auto p = line.find("highest occupied, lowest unoccupied level (ev):"); p != std::string::npos) {
      const auto colon = line.find(':', p);
      const char* start = line.c_str() + colon + 1;
      char* end = nullptr;
      const double h = std::strtod(start, &end);
      char* end2 = nullptr;
      const double l = std::strtod(end, &end2);
      if (end == start || end2 == end) throw ParseError("malformed band edge line: " + line);
      homo = h;
      lumo = l;
    } else if (auto q = line.find("highest occupied level (ev):"); q != std::string::npos) {
      homo = number_after(line, line.find(':', q) + 1);
    } else if (auto f = line.find("the Fermi energy is"); f != std::string::npos) {
      fermi = number_after(line, f + std::string("the Fermi energy is").size());
    } else if (auto nv = line.find("new unit-cell volume ="); nv != std::string::npos) {
      const auto paren = line.find('(', nv);
      if (paren == std::string::npos) throw ParseError("malformed unit-cell volume line: " + line);
      final_volume_a3 = number_after(line, paren + 1);
    } else if (auto uv = line.find("unit-cell volume"); uv != std::string::npos && !initial_volume_bohr3) {
      initial_volume_bohr3 = number_after(line, line.find('=', uv) + 1);
    }
  }

  if (error_block) {
    const bool charge = error_message.find("charge") != std::string::npos;
    return CalculatorResult::failed(charge ? FailureReason::charge : FailureReason::convergence);
  }
  if (!job_done) throw ParseError("pw.x output is truncated (no JOB DONE marker)");
  if (!converged) return CalculatorResult::failed(FailureReason::convergence);

  switch (job.kind) {
    case QeJobKind::energy:
      if (!energy_ry) throw ParseError("no total energy in pw.x output");
      return CalculatorResult::ok(*energy_ry * units::kEvPerRydberg);
    case QeJobKind::band_gap:
      if (homo && lumo) return CalculatorResult::ok(std::max(0.0, *lumo - *homo));
      if (fermi) return CalculatorResult::ok(0.0);
      throw ParseError("no band edges in pw.x output");
    case QeJobKind::density: {
      double volume_a3 = 0.0;
      if (final_volume_a3) {
        volume_a3 = *final_volume_a3;
      } else if (initial_volume_bohr3) {
        volume_a3 = *initial_volume_bohr3 * std::pow(units::kBohrInAngstrom, 3);
      } else {
        throw ParseError("no unit-cell volume in pw.x output");
      }
      if (!(volume_a3 > 0.0) || !(job.total_mass > 0.0)) throw ParseError("invalid volume or mass for density");
      return CalculatorResult::ok(job.total_mass / (units::kAvogadro * volume_a3 * units::kA3ToCm3));
    }
  }
  throw ParseError("unknown QE job kind");
}

CalculatorResult parse_qe_output(const std::filesystem::path& path, const QeJob& job) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pw.x output " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_qe_output_text(buf.str(), job);
}

QeCalculator::QeCalculator(Property property, QeOptions options) : property_(property), options_(std::move(options)) {
  if (options_.command.empty()) {
    throw ConfigError("the qe calculator needs qe_command (a shell command running pw.x)");
  }
}

CalculatorResult QeCalculator::run_job(const Structure& s, const Composition& c, Property input_property,
                                       const QeJob& job, const std::string& tag) const {
  const auto dir = options_.workdir / tag;
  const auto input = write_qe_input(s, c, input_property, dir, options_);
  const auto output = dir / (options_.prefix + "." + std::string(to_string(input_property)) + ".out");
  std::string cmd = replace_all(options_.command, "{input}", input.string());
  cmd = replace_all(cmd, "{output}", output.string());
  cmd = replace_all(cmd, "{workdir}", dir.string());
  if (options_.timeout_seconds > 0.0) {
    cmd = "timeout " + std::to_string(static_cast<long>(std::ceil(options_.timeout_seconds))) + " sh -c '" +
          replace_all(cmd, "'", "'\\''") + "'";
  }
  std::error_code ec;
  std::filesystem::remove(output, ec);  // never parse a stale output from an earlier run
  const int status = std::system(cmd.c_str());
  if (options_.timeout_seconds > 0.0 && WIFEXITED(status) && WEXITSTATUS(status) == 124) {
    return CalculatorResult::failed(FailureReason::timeout);
  }
  try {
    return parse_qe_output(output, job);
  } catch (const ParseError&) {
    return CalculatorResult::failed(FailureReason::parse);
  } catch (const IoError&) {
    return CalculatorResult::failed(FailureReason::parse);
  }
}

CalculatorResult QeCalculator::compute(const Structure& s, const Composition& c) const {
  require_filled(s, c);
  const auto start = std::chrono::steady_clock::now();
  char tag[32];
  std::uint64_t h = s.content_hash();
  for (const auto* e : c) h = (h ^ static_cast<std::uint64_t>(e->atomic_number)) * 1099511628211ULL;
  std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(h));

  CalculatorResult result;
  switch (property_) {
    case Property::density:
      result = run_job(s, c, Property::density, {QeJobKind::density, total_mass(c)}, tag);
      break;
    case Property::band_gap:
      result = run_job(s, c, Property::band_gap, {QeJobKind::band_gap, 0.0}, tag);
      break;
    case Property::bulk_modulus: {
      std::optional<FailureReason> failure;
      int point = 0;
      result = bulk_modulus_from_scan(s, c, [&](const Structure& strained, const Composition& comp) {
        const auto r = run_job(strained, comp, Property::bulk_modulus, {QeJobKind::energy, 0.0},
                               std::string(tag) + "/v" + std::to_string(point++));
        if (!r.success) {
          if (!failure) failure = r.failure_reason;
          return std::nan("");
        }
        return *r.value;
      });
      if (failure) result = CalculatorResult::failed(*failure);
      break;
    }
  }
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace crystalgym
