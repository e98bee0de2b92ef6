#pragma once

namespace crystalgym::units {

inline constexpr double kGPaPerEvPerA3 = 160.21766;   // 1 eV/A^3 in GPa
inline constexpr double kEvPerRydberg = 13.60569;
inline constexpr double kAvogadro = 6.02214076e23;    // 1/mol
inline constexpr double kA3ToCm3 = 1e-24;
inline constexpr double kBohrInAngstrom = 0.529177210903;

}  // namespace crystalgym::units
