#include "sgraphs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "sgraphs/error.hpp"

namespace fs = std::filesystem;

namespace sgraphs {

namespace {

struct WallRun {
  double cross = 0.0;   // fixed coordinate (the wall line)
  double run0 = 0.0;    // interval along the run axis
  double run1 = 0.0;
  Axis run_axis = Axis::X;
};

std::vector<Rect> floor_rects(const FloorSpec& floor) {
  std::vector<Rect> rects = floor.rooms;
  rects.insert(rects.end(), floor.corridors.begin(), floor.corridors.end());
  return rects;
}

void append_wall_boxes(const FloorSpec& floor, const World& world,
                       std::vector<Aabb>& out) {
  const double t2 = 0.5 * world.wall_thickness;
  std::vector<WallRun> runs;
  for (const Rect& r : floor_rects(floor)) {
    runs.push_back({r.x_min, r.y_min, r.y_max, Axis::Y});
    runs.push_back({r.x_max, r.y_min, r.y_max, Axis::Y});
    runs.push_back({r.y_min, r.x_min, r.x_max, Axis::X});
    runs.push_back({r.y_max, r.x_min, r.x_max, Axis::X});
  }

  for (const WallRun& run : runs) {
    // Extend the run by half a thickness so corners seal, then cut door
    // openings that sit on this wall line.
    std::vector<std::pair<double, double>> pieces{{run.run0 - t2, run.run1 + t2}};
    for (const Door& door : floor.doors) {
      if (door.run_axis != run.run_axis) continue;
      const double door_cross =
          door.run_axis == Axis::X ? door.center.y() : door.center.x();
      const double door_at =
          door.run_axis == Axis::X ? door.center.x() : door.center.y();
      if (std::abs(door_cross - run.cross) > world.wall_thickness) continue;
      const double a = door_at - 0.5 * door.width;
      const double b = door_at + 0.5 * door.width;
      std::vector<std::pair<double, double>> next;
      for (const auto& [p0, p1] : pieces) {
        if (b <= p0 || a >= p1) {
          next.emplace_back(p0, p1);
          continue;
        }
        if (a > p0) next.emplace_back(p0, a);
        if (b < p1) next.emplace_back(b, p1);
      }
      pieces = std::move(next);
    }
    for (const auto& [p0, p1] : pieces) {
      if (p1 - p0 < 1e-6) continue;
      Aabb box;
      if (run.run_axis == Axis::Y) {
        box.lo = Vec3(run.cross - t2, p0, floor.z_base);
        box.hi = Vec3(run.cross + t2, p1, floor.z_base + world.wall_height);
      } else {
        box.lo = Vec3(p0, run.cross - t2, floor.z_base);
        box.hi = Vec3(p1, run.cross + t2, floor.z_base + world.wall_height);
      }
      out.push_back(box);
    }
  }
}

Rect floor_bounds(const FloorSpec& floor) {
  Rect b{1e18, 1e18, -1e18, -1e18};
  for (const Rect& r : floor_rects(floor)) {
    b.x_min = std::min(b.x_min, r.x_min);
    b.y_min = std::min(b.y_min, r.y_min);
    b.x_max = std::max(b.x_max, r.x_max);
    b.y_max = std::max(b.y_max, r.y_max);
  }
  return b;
}

}  // namespace

std::vector<Aabb> world_solids(const World& world) {
  std::vector<Aabb> out;
  const double slab = 0.1;
  for (const FloorSpec& floor : world.floors) {
    append_wall_boxes(floor, world, out);
    const Rect b = floor_bounds(floor);
    const double t2 = 0.5 * world.wall_thickness;
    out.push_back(Aabb{Vec3(b.x_min - t2, b.y_min - t2, floor.z_base - slab),
                       Vec3(b.x_max + t2, b.y_max + t2, floor.z_base)});
    out.push_back(
        Aabb{Vec3(b.x_min - t2, b.y_min - t2, floor.z_base + world.wall_height),
             Vec3(b.x_max + t2, b.y_max + t2,
                  floor.z_base + world.wall_height + slab)});
  }
  return out;
}

bool point_in_solid(const std::vector<Aabb>& solids, const Vec3& p) {
  for (const Aabb& box : solids) {
    if (box.contains(p)) return true;
  }
  return false;
}

PointCloud sample_world_surfaces(const World& world, double spacing) {
  PointCloud out;
  auto sample_face = [&](const Vec3& lo, const Vec3& hi, int fixed_axis,
                         double fixed_value) {
    const int u = (fixed_axis + 1) % 3;
    const int v = (fixed_axis + 2) % 3;
    const int nu = std::max(1, static_cast<int>(std::ceil((hi[u] - lo[u]) / spacing)));
    const int nv = std::max(1, static_cast<int>(std::ceil((hi[v] - lo[v]) / spacing)));
    for (int i = 0; i <= nu; ++i) {
      for (int j = 0; j <= nv; ++j) {
        Vec3 p;
        p[fixed_axis] = fixed_value;
        p[u] = lo[u] + (hi[u] - lo[u]) * i / nu;
        p[v] = lo[v] + (hi[v] - lo[v]) * j / nv;
        out.push_back(p);
      }
    }
  };
  for (const Aabb& box : world_solids(world)) {
    for (int axis = 0; axis < 3; ++axis) {
      sample_face(box.lo, box.hi, axis, box.lo[axis]);
      sample_face(box.lo, box.hi, axis, box.hi[axis]);
    }
  }
  return out;
}

namespace {

// Slab-method ray/AABB intersection; returns entry distance or -1.
double ray_box(const Vec3& origin, const Vec3& dir, const Aabb& box) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dir[i]) < 1e-12) {
      if (origin[i] < box.lo[i] || origin[i] > box.hi[i]) return -1.0;
      continue;
    }
    double ta = (box.lo[i] - origin[i]) / dir[i];
    double tb = (box.hi[i] - origin[i]) / dir[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0;
  }
  return t0 > 1e-9 ? t0 : -1.0;
}

double truncated_gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  std::normal_distribution<double> dist(0.0, sigma);
  return std::clamp(dist(rng), -3.0 * sigma, 3.0 * sigma);
}

}  // namespace

PointCloud raycast_scan(const World& world, const Pose& pose,
                        const SimConfig& cfg, std::uint64_t scan_seed) {
  const std::vector<Aabb> solids = world_solids(world);
  if (point_in_solid(solids, pose.translation)) {
    throw Error(ErrorCode::PoseInWall, "scan pose is inside a wall");
  }
  std::mt19937_64 rng(scan_seed);
  PointCloud cloud;
  const double fov = cfg.v_fov_deg * M_PI / 180.0;
  for (int vi = 0; vi < cfg.v_rays; ++vi) {
    const double elevation =
        cfg.v_rays == 1 ? 0.0 : -fov + 2.0 * fov * vi / (cfg.v_rays - 1);
    for (int hi = 0; hi < cfg.h_rays; ++hi) {
      const double azimuth = 2.0 * M_PI * hi / cfg.h_rays;
      const Vec3 dir_local(std::cos(elevation) * std::cos(azimuth),
                           std::cos(elevation) * std::sin(azimuth),
                           std::sin(elevation));
      const Vec3 dir_world = pose.rotation * dir_local;
      double nearest = cfg.max_range + 1.0;
      for (const Aabb& box : solids) {
        const double t = ray_box(pose.translation, dir_world, box);
        if (t > 0.0 && t < nearest) nearest = t;
      }
      // The noise stream advances per hit only, keeping clouds identical for
      // identical hit patterns.
      if (nearest > cfg.max_range) continue;
      const double range = nearest + truncated_gaussian(rng, cfg.range_sigma);
      cloud.push_back(dir_local * range);
    }
  }
  return cloud;
}

std::vector<ScanFrame> simulate_trajectory(const World& world,
                                           const std::vector<Vec3>& waypoints,
                                           const SimConfig& cfg) {
  if (waypoints.empty()) return {};
  const std::vector<Aabb> solids = world_solids(world);
  for (const Vec3& w : waypoints) {
    if (point_in_solid(solids, w)) {
      throw Error(ErrorCode::WaypointInWall, "waypoint inside a wall");
    }
  }

  std::vector<Pose> poses;
  double yaw = 0.0;
  if (waypoints.size() > 1) {
    const Vec3 d = waypoints[1] - waypoints[0];
    if (d.head<2>().norm() > 1e-12) yaw = std::atan2(d.y(), d.x());
  }
  poses.push_back(Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())),
                       waypoints[0]));
  for (std::size_t w = 0; w + 1 < waypoints.size(); ++w) {
    const Vec3 a = waypoints[w];
    const Vec3 b = waypoints[w + 1];
    const Vec3 d = b - a;
    if (std::abs(d.z()) > 1.0) {
      // Floor teleport: jump without intermediate poses, keep heading.
      poses.push_back(Pose(poses.back().rotation, b));
      continue;
    }
    if (d.head<2>().norm() > 1e-12) yaw = std::atan2(d.y(), d.x());
    const int n = std::max(1, static_cast<int>(std::ceil(d.norm() / cfg.step)));
    for (int i = 1; i <= n; ++i) {
      const Vec3 p = a + d * (static_cast<double>(i) / n);
      poses.push_back(
          Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())), p));
    }
  }

  std::vector<ScanFrame> frames(poses.size());
  const double sigma_rot = cfg.sigma_rot_deg * M_PI / 180.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ScanFrame& frame = frames[i];
    frame.timestamp = cfg.dt * static_cast<double>(i);
    frame.ground_truth = poses[i];
    frame.cloud = raycast_scan(world, poses[i], cfg, cfg.seed + i);
    if (i == 0) {
      frame.odometry = poses[0];
      continue;
    }
    Pose increment = pose_between(poses[i - 1], poses[i]);
    std::mt19937_64 rng((cfg.seed + i) ^ 0x6f64ULL);
    if (cfg.sigma_t > 0.0 || sigma_rot > 0.0) {
      Vec3 dt(truncated_gaussian(rng, cfg.sigma_t),
              truncated_gaussian(rng, cfg.sigma_t),
              truncated_gaussian(rng, cfg.sigma_t));
      Vec3 drot(truncated_gaussian(rng, sigma_rot),
                truncated_gaussian(rng, sigma_rot),
                truncated_gaussian(rng, sigma_rot));
      increment = pose_compose(increment, Pose(so3_exp(drot), dt));
    }
    if (static_cast<int>(i) == cfg.odom_bias_frame) {
      increment.translation += cfg.odom_bias;
    }
    frame.odometry = pose_compose(frames[i - 1].odometry, increment);
  }
  return frames;
}

namespace {

using nlohmann::json;

json rect_to_json(const Rect& r) {
  return json::array({r.x_min, r.y_min, r.x_max, r.y_max});
}

Rect rect_from_json(const json& j) {
  return Rect{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>()};
}

}  // namespace

World world_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadDataset, "invalid world json: " + std::string(e.what()));
  }
  World world;
  world.wall_height = doc.value("wall_height", 2.5);
  world.wall_thickness = doc.value("wall_thickness", 0.1);
  for (const json& jf : doc.at("floors")) {
    FloorSpec floor;
    floor.floor_id = jf.at("id").get<int>();
    floor.z_base = jf.at("z").get<double>();
    for (const json& r : jf.value("rooms", json::array())) {
      floor.rooms.push_back(rect_from_json(r));
    }
    for (const json& r : jf.value("corridors", json::array())) {
      floor.corridors.push_back(rect_from_json(r));
    }
    for (const json& d : jf.value("doors", json::array())) {
      Door door;
      door.center = Vec2(d.at("center")[0].get<double>(),
                         d.at("center")[1].get<double>());
      door.width = d.at("width").get<double>();
      door.run_axis = d.at("axis").get<std::string>() == "x" ? Axis::X : Axis::Y;
      floor.doors.push_back(door);
    }
    world.floors.push_back(std::move(floor));
  }
  return world;
}

void world_to_json_file(const std::string& path, const World& world) {
  json doc;
  doc["wall_height"] = world.wall_height;
  doc["wall_thickness"] = world.wall_thickness;
  doc["floors"] = json::array();
  for (const FloorSpec& floor : world.floors) {
    json jf{{"id", floor.floor_id}, {"z", floor.z_base}};
    jf["rooms"] = json::array();
    for (const Rect& r : floor.rooms) jf["rooms"].push_back(rect_to_json(r));
    jf["corridors"] = json::array();
    for (const Rect& r : floor.corridors) {
      jf["corridors"].push_back(rect_to_json(r));
    }
    jf["doors"] = json::array();
    for (const Door& d : floor.doors) {
      jf["doors"].push_back(json{{"center", {d.center.x(), d.center.y()}},
                                 {"width", d.width},
                                 {"axis", d.run_axis == Axis::X ? "x" : "y"}});
    }
    doc["floors"].push_back(std::move(jf));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

void write_dataset(const std::vector<ScanFrame>& frames, const World& world,
                   const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "scans", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir);

  world_to_json_file((fs::path(dir) / "world.json").string(), world);

  Trajectory gt, odom;
  for (const ScanFrame& f : frames) {
    gt.push_back({f.timestamp, f.ground_truth});
    odom.push_back({f.timestamp, f.odometry});
  }
  write_tum((fs::path(dir) / "gt.tum").string(), gt);
  write_tum((fs::path(dir) / "odom.tum").string(), odom);

  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "scan_%06zu.xyz", i);
    write_xyz((fs::path(dir) / "scans" / name).string(), frames[i].cloud);
  }
}

Dataset read_dataset(const std::string& dir) {
  Dataset out;
  const fs::path root(dir);
  if (!fs::exists(root / "odom.tum") || !fs::exists(root / "scans")) {
    throw Error(ErrorCode::BadDataset,
                dir + " is missing odom.tum or the scans directory");
  }
  out.odometry = read_tum((root / "odom.tum").string());
  if (fs::exists(root / "gt.tum")) {
    out.ground_truth = read_tum((root / "gt.tum").string());
  }
  if (fs::exists(root / "world.json")) {
    out.world = world_from_json_file((root / "world.json").string());
    out.has_world = true;
  }
  for (const auto& entry : fs::directory_iterator(root / "scans")) {
    if (entry.path().extension() == ".xyz") {
      out.scan_paths.push_back(entry.path().string());
    }
  }
  std::sort(out.scan_paths.begin(), out.scan_paths.end());
  if (out.scan_paths.size() != out.odometry.size()) {
    throw Error(ErrorCode::BadDataset,
                "scan count does not match odometry entries");
  }
  return out;
}

std::vector<Vec3> read_waypoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<Vec3> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Vec3 w;
    if (ss >> w.x() >> w.y() >> w.z()) out.push_back(w);
  }
  return out;
}

}  // namespace sgraphs
