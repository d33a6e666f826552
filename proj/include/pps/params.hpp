#pragma once

#include <string>

namespace pps {

enum class Statistics { boson, fermion };
enum class Species { bath, up, down };

std::string to_string(Statistics s);
Statistics statistics_from_string(const std::string& s);
std::string to_string(Species s);
// Accepts B/bath, up, down; throws std::invalid_argument otherwise.
Species species_from_string(const std::string& s);

// Physical parameters in harmonic units of the bath (m_B = omega = hbar = 1 by default).
struct SystemParams {
  int n_bath = 100;
  int n_imp = 1;
  double mass_bath = 1.0;
  double mass_imp = 1.0;
  double omega = 1.0;
  double g_bb = 0.5;
  double g_bi = 0.0;
  double g_ii = 0.0;
  Statistics statistics = Statistics::boson;

  // Throws std::invalid_argument on inconsistent values. CI allows an empty bath.
  void validate(bool allow_empty_bath = false) const;
};

}  // namespace pps
