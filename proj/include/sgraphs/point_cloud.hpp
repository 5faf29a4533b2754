#pragma once

#include <string>
#include <vector>

#include "sgraphs/geometry.hpp"

namespace sgraphs {

using PointCloud = std::vector<Vec3>;

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// ASCII xyz file: one "x y z" triple per line; blank lines and '#' comments
/// are skipped on read.
PointCloud read_xyz(const std::string& path);
void write_xyz(const std::string& path, const PointCloud& cloud);

struct TrajectoryEntry {
  double timestamp = 0.0;
  Pose pose;
};

using Trajectory = std::vector<TrajectoryEntry>;

/// TUM trajectory format: "timestamp tx ty tz qx qy qz qw" per line.
Trajectory read_tum(const std::string& path);
void write_tum(const std::string& path, const Trajectory& trajectory);

}  // namespace sgraphs
