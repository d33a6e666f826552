#include "pps/params.hpp"

#include <stdexcept>

namespace pps {

std::string to_string(Statistics s) { return s == Statistics::boson ? "boson" : "fermion"; }

Statistics statistics_from_string(const std::string& s) {
  if (s == "boson" || s == "bosons") return Statistics::boson;
  if (s == "fermion" || s == "fermions") return Statistics::fermion;
  throw std::invalid_argument("unknown statistics '" + s + "' (expected boson or fermion)");
}

std::string to_string(Species s) {
  switch (s) {
    case Species::bath: return "bath";
    case Species::up: return "up";
    case Species::down: return "down";
  }
  return "?";
}

Species species_from_string(const std::string& s) {
  if (s == "B" || s == "bath") return Species::bath;
  if (s == "up") return Species::up;
  if (s == "down") return Species::down;
  throw std::invalid_argument("unknown species '" + s + "' (expected bath, up or down)");
}

void SystemParams::validate(bool allow_empty_bath) const {
  if (n_bath < (allow_empty_bath ? 0 : 1)) throw std::invalid_argument("n_bath must be >= 1");
  if (n_imp != 1 && n_imp != 2) throw std::invalid_argument("n_imp must be 1 or 2");
  if (!(mass_bath > 0) || !(mass_imp > 0)) throw std::invalid_argument("masses must be positive");
  if (!(omega > 0)) throw std::invalid_argument("omega must be positive");
  if (g_bb < 0) throw std::invalid_argument("g_bb must be non-negative");
}

}  // namespace pps
