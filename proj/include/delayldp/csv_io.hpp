#pragma once

// CSV with header `t,v0,...,v{d-1}`, one row per node.

#include <filesystem>
#include <iosfwd>

#include "delayldp/core.hpp"

namespace delayldp {

void write_csv(std::ostream& out, const Trajectory& traj);
void write_csv(std::ostream& out, const Control& ctrl);

/// Reads a path on [-tau, T]; the grid is recovered from the time column.
[[nodiscard]] Trajectory read_trajectory_csv(const std::filesystem::path& path);
/// Reads a control with one row per step t_0..t_{N-1} of `grid`.
[[nodiscard]] Control read_control_csv(const std::filesystem::path& path, const TimeGrid& grid);
/// Reads samples of phi at arbitrary increasing times covering [-tau, 0] and
/// resamples them linearly onto the history nodes of `grid`.
[[nodiscard]] InitialSegment read_initial_segment_csv(const std::filesystem::path& path, const TimeGrid& grid);

}  // namespace delayldp
