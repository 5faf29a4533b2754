#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgraphs/point_cloud.hpp"

namespace sgraphs {

struct Rect {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Vec2 center() const {
    return Vec2(0.5 * (x_min + x_max), 0.5 * (y_min + y_max));
  }
  bool contains(const Vec2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

/// A door is an opening cut into every wall run on its line; `run_axis` is
/// the direction the wall (and the opening) extends along.
struct Door {
  Vec2 center{0.0, 0.0};
  double width = 1.0;
  Axis run_axis = Axis::X;
};

struct FloorSpec {
  int floor_id = 0;
  double z_base = 0.0;
  std::vector<Rect> rooms;
  std::vector<Rect> corridors;
  std::vector<Door> doors;
};

struct World {
  std::vector<FloorSpec> floors;
  double wall_height = 2.5;
  double wall_thickness = 0.1;
};

struct Aabb {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{0.0, 0.0, 0.0};

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// Wall pieces (with door openings cut out) plus floor and ceiling slabs.
std::vector<Aabb> world_solids(const World& world);

/// Surface samples of every solid face at the given spacing, for map-accuracy
/// evaluation.
PointCloud sample_world_surfaces(const World& world, double spacing);

bool point_in_solid(const std::vector<Aabb>& solids, const Vec3& p);

World world_from_json_file(const std::string& path);
void world_to_json_file(const std::string& path, const World& world);

struct SimConfig {
  int h_rays = 360;
  int v_rays = 16;
  double v_fov_deg = 15.0;  // elevations span [-v_fov, +v_fov]
  double max_range = 30.0;
  double range_sigma = 0.01;  // truncated at 3 sigma
  double step = 0.2;
  double dt = 0.1;
  double sigma_t = 0.01;
  double sigma_rot_deg = 0.2;
  std::uint64_t seed = 0;
  int odom_bias_frame = -1;  // frame index receiving a one-off bias
  Vec3 odom_bias{0.0, 0.0, 0.0};
};

struct ScanFrame {
  double timestamp = 0.0;
  Pose ground_truth;
  Pose odometry;
  PointCloud cloud;  // sensor frame
};

/// Raycast one scan from the pose; rays at h_rays azimuths times v_rays
/// elevations, range noise from the given stream seed, misses omitted.
PointCloud raycast_scan(const World& world, const Pose& pose,
                        const SimConfig& cfg, std::uint64_t scan_seed);

/// Interpolate waypoints at cfg.step, raycast a scan per pose and integrate
/// odometry with per-step truncated-Gaussian noise. A |dz| > 1 between
/// consecutive waypoints is a floor teleport (no interpolation).
std::vector<ScanFrame> simulate_trajectory(const World& world,
                                           const std::vector<Vec3>& waypoints,
                                           const SimConfig& cfg);

void write_dataset(const std::vector<ScanFrame>& frames, const World& world,
                   const std::string& dir);

struct Dataset {
  World world;
  bool has_world = false;
  Trajectory ground_truth;
  Trajectory odometry;
  std::vector<std::string> scan_paths;  // sorted; one per odometry entry
};

Dataset read_dataset(const std::string& dir);

std::vector<Vec3> read_waypoints(const std::string& path);

}  // namespace sgraphs
