#pragma once

#include <Eigen/Dense>

namespace batchbound {

// Renormalizes v so that v.dot(v) == 1.0 holds bit-exactly, not merely to
// rounding. Certificates report the Q-gap 2 * w.dot(w) and pin it to exactly
// 2, which needs an exactly-self-normal w. Strategy: Newton rescaling lands
// on an exact fixed point about half the time; tiny seeded ulp perturbations
// restart it, and a two-coordinate lattice scan mops up the rest. The result
// stays within ~1e-12 of v's direction, far inside subspace-containment
// tolerances. Throws InvariantBreach if no exact point is found (not observed
// in practice).
Eigen::VectorXd exact_unit(Eigen::VectorXd v);

}  // namespace batchbound
