#pragma once

#include <string>

#include "hypow/geometry.hpp"

namespace hypow {

struct CheckLine {
  std::string name;
  bool pass = false;
  double worst = 0.0;      // worst observed error
  double tolerance = 0.0;  // limit it was held against
};

struct GeomCheckReport {
  std::vector<CheckLine> lines;
  bool all_pass() const {
    for (const CheckLine& l : lines)
      if (!l.pass) return false;
    return true;
  }
};

/// Randomized geometry invariant suite: metric axioms, ball closure, Mobius
/// translation invariance, the c -> 0 limit, the cosine identity, and a
/// finite-difference check of dist_grad. `kind` switches the distance to the
/// printed-arctan variant, which is expected to break translation
/// invariance.
GeomCheckReport run_geometry_checks(std::uint64_t seed, int trials,
                                    DistKind kind = DistKind::Artanh);

}  // namespace hypow
