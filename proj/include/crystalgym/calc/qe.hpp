#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "crystalgym/calc/calculator.hpp"

namespace crystalgym {

struct QeOptions {
  double k_density = 30.0;                  // Angstrom; n_i = max(1, round(k_density / a_i))
  std::string prefix = "crystal";
  std::string outdir = "./out";
  std::string pseudo_dir = "./pseudo";
  std::string pseudo_pattern = "{symbol}.upf";  // "{symbol}" is replaced per species
  // Shell command that runs pw.x. "{input}", "{output}" and "{workdir}" are
  // substituted. Empty disables execution.
  std::string command;
  std::filesystem::path workdir = "qe_runs";
  double timeout_seconds = 0.0;  // 0 = no limit
};

// ceil(((sum Z) div 2) * 1.2)
int qe_band_count(const Composition& composition);
std::array<int, 3> qe_kpoint_grid(const Lattice& lattice, double k_density);

// pw.x input text for one job. Pure function of its arguments.
std::string render_qe_input(const Structure& structure, const Composition& composition, Property property,
                            const QeOptions& options = {});

// Writes <workdir>/<prefix>.<property>.in and returns its path. Throws IoError
// or ValidationError (unfilled sites).
std::filesystem::path write_qe_input(const Structure& structure, const Composition& composition, Property property,
                                     const std::filesystem::path& workdir, const QeOptions& options = {});

enum class QeJobKind { energy, band_gap, density };

struct QeJob {
  QeJobKind kind = QeJobKind::energy;
  double total_mass = 0.0;  // g/mol, used by density jobs
};

// Reads a pw.x output. Energy jobs yield the total energy in eV, band-gap
// jobs LUMO - HOMO in eV, density jobs the final-cell density in g/cm^3.
// Runs that stopped on a QE error or never reached SCF convergence come back
// as failures. Throws ParseError when the output is unreadable or truncated.
CalculatorResult parse_qe_output(const std::filesystem::path& path, const QeJob& job);
CalculatorResult parse_qe_output_text(const std::string& text, const QeJob& job);

// Runs pw.x through QeOptions::command. Throws ConfigError when no command is set.
class QeCalculator final : public PropertyCalculator {
 public:
  QeCalculator(Property property, QeOptions options);

  std::string_view id() const noexcept override { return "quantum-espresso"; }
  Property property() const noexcept override { return property_; }
  CalculatorResult compute(const Structure& structure, const Composition& composition) const override;

 private:
  CalculatorResult run_job(const Structure& structure, const Composition& composition, Property input_property,
                           const QeJob& job, const std::string& tag) const;

  Property property_;
  QeOptions options_;
};

}  // namespace crystalgym
