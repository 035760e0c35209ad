#pragma once

#include <array>

namespace qbmaser {

// Mean-field state kept real-valued for the integrator: five level
// populations, the intracavity photon number, Re/Im of <a+ s35> (the
// conjugate <s53 a> is implied), and the real two-spin correlation
// <s1_53 s2_35>.
enum StateIndex : int {
  iP1 = 0,
  iP2,
  iP3,
  iP4,
  iP5,
  iNph,
  iCohRe,
  iCohIm,
  iCorr,
  kStateDim
};

using StateVec = std::array<double, kStateDim>;

inline double population_trace(const StateVec& y) {
  return y[iP1] + y[iP2] + y[iP3] + y[iP4] + y[iP5];
}

// everything in |1>, optionally a classical seed field in the cavity
inline StateVec ground_state(double seed_photons = 0.0) {
  StateVec y{};
  y[iP1] = 1.0;
  y[iNph] = seed_photons;
  return y;
}

}  // namespace qbmaser
