#pragma once

#include "dlqr/lyap_riccati.hpp"

namespace dlqr::problems {

/// Two-state, one-input system whose optimal gain is destabilizing for
/// discount factors roughly in [0.02, 0.12]:
/// A = [[-0.97, 0], [3.88, 0.97]], B = [2, -1]', Q = diag(2, 3), R = 5.
ProblemInstance example1();

/// A = B = Q = R = 1.
ProblemInstance scalar_unit();

}  // namespace dlqr::problems
