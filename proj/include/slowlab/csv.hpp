#pragma once

#include <string>
#include <vector>

#include "slowlab/trajectory.hpp"

namespace slowlab {

/// Shortest round-trippable decimal (17 significant digits).
std::string format_double(double v);

/// Header `s,t,theta_0..,phi_0..,dist_manifold,loss,tr_hess`, one row per
/// point, LF endings. Missing projections serialize as nan.
void emit_csv(const TrajectoryRecord& rec, int dim, const std::string& path);

/// Inverse of emit_csv; bit-exact round trip.
TrajectoryRecord parse_csv(const std::string& path, int dim);

/// Generic numeric table with the same formatting contract.
void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

}  // namespace slowlab
