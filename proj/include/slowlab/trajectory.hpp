#pragma once

#include <optional>
#include <vector>

#include "slowlab/numerics.hpp"

namespace slowlab {

struct TrajectoryPoint {
    long s = 0;                 // round index (discrete) or step index (SDE)
    double t = 0.0;             // slow-SDE time, s*H*eta^2 for discrete rounds
    Vector theta;
    std::optional<Vector> phi;  // manifold projection when recorded
    double dist_manifold = 0.0; // ||theta - phi||, 0 when phi not recorded
    double loss = 0.0;
    double tr_hess = 0.0;       // trace of the Hessian at phi (or theta for SDE)
};

struct TrajectoryRecord {
    std::vector<TrajectoryPoint> points;
    bool diverged = false;
    long switch_round = -1;     // post-local switch marker, -1 when absent
};

}  // namespace slowlab
