#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "sgraphs/pipeline.hpp"

namespace sgraphs {

namespace {

struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<bool(const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

template <typename T>
Binding numeric(const std::string& key, T* ptr) {
  return Binding{
      key,
      [ptr] {
        if constexpr (std::is_same_v<T, double>) {
          return format_double(*ptr);
        } else {
          return std::to_string(*ptr);
        }
      },
      [ptr](const std::string& text) {
        std::istringstream ss(text);
        T value;
        if (!(ss >> value)) return false;
        *ptr = value;
        return true;
      }};
}

Binding boolean(const std::string& key, bool* ptr) {
  return Binding{key, [ptr] { return std::string(*ptr ? "true" : "false"); },
                 [ptr](const std::string& text) {
                   if (text == "true" || text == "1") {
                     *ptr = true;
                   } else if (text == "false" || text == "0") {
                     *ptr = false;
                   } else {
                     return false;
                   }
                   return true;
                 }};
}

Binding string_opt(const std::string& key, std::string* ptr,
                   std::vector<std::string> allowed) {
  return Binding{key, [ptr] { return *ptr; },
                 [ptr, allowed = std::move(allowed)](const std::string& text) {
                   for (const auto& a : allowed) {
                     if (text == a) {
                       *ptr = text;
                       return true;
                     }
                   }
                   return false;
                 }};
}

std::vector<Binding> bindings(PipelineConfig& c) {
  std::vector<Binding> b;
  b.push_back(numeric("perception.range_min", &c.perception.range_min));
  b.push_back(numeric("perception.range_max", &c.perception.range_max));
  b.push_back(numeric("perception.voxel", &c.perception.voxel));
  b.push_back(numeric("perception.ransac_iterations", &c.perception.ransac_iterations));
  b.push_back(numeric("perception.ransac_threshold", &c.perception.ransac_threshold));
  b.push_back(numeric("perception.min_inliers", &c.perception.min_inliers));
  b.push_back(numeric("perception.max_planes", &c.perception.max_planes));
  b.push_back(numeric("perception.plane_match_tol", &c.perception.plane_match_tol));
  b.push_back(numeric("perception.pose_plane_info_per_inlier",
                      &c.perception.pose_plane_info_per_inlier));
  b.push_back(numeric("perception.pose_plane_info_cap",
                      &c.perception.pose_plane_info_cap));
  b.push_back(numeric("perception.max_points_per_observation",
                      &c.perception.max_points_per_observation));

  b.push_back(numeric("freespace.resolution", &c.freespace.resolution));
  b.push_back(numeric("freespace.z_low", &c.freespace.z_low));
  b.push_back(numeric("freespace.z_high", &c.freespace.z_high));
  b.push_back(numeric("freespace.margin", &c.freespace.margin));
  b.push_back(numeric("freespace.stride", &c.freespace.stride));
  b.push_back(numeric("freespace.min_clearance", &c.freespace.min_clearance));
  b.push_back(numeric("freespace.disconnect_clearance",
                      &c.freespace.disconnect_clearance));
  b.push_back(numeric("freespace.min_cluster_size", &c.freespace.min_cluster_size));

  b.push_back(numeric("scene.keyframe_window", &c.scene.keyframe_window));
  b.push_back(numeric("scene.min_close_points", &c.scene.min_close_points));
  b.push_back(numeric("scene.vertex_point_tol", &c.scene.vertex_point_tol));
  b.push_back(numeric("scene.min_side", &c.scene.min_side));
  b.push_back(numeric("scene.max_side", &c.scene.max_side));
  b.push_back(numeric("scene.opposed_max_angle_deg", &c.scene.opposed_max_angle_deg));
  b.push_back(numeric("scene.room_match_tol", &c.scene.room_match_tol));
  b.push_back(numeric("scene.room_pair_info", &c.scene.room_pair_info));
  b.push_back(numeric("scene.room_prior_info_scale", &c.scene.room_prior_info_scale));
  b.push_back(numeric("scene.floor_room_info", &c.scene.floor_room_info));
  b.push_back(numeric("scene.floor_reanchor_dist", &c.scene.floor_reanchor_dist));
  b.push_back(numeric("scene.floor_height_tol", &c.scene.floor_height_tol));

  b.push_back(numeric("loop.min_index_gap", &c.loop.min_index_gap));
  b.push_back(numeric("loop.search_radius", &c.loop.search_radius));
  b.push_back(numeric("loop.max_candidates", &c.loop.max_candidates));
  b.push_back(numeric("loop.icp_max_iterations", &c.loop.icp_max_iterations));
  b.push_back(numeric("loop.correspondence_cutoff", &c.loop.correspondence_cutoff));
  b.push_back(numeric("loop.min_correspondences", &c.loop.min_correspondences));
  b.push_back(numeric("loop.fitness_accept", &c.loop.fitness_accept));
  b.push_back(numeric("loop.normal_knn", &c.loop.normal_knn));

  b.push_back(numeric("optimizer.max_iterations", &c.optimizer.max_iterations));
  b.push_back(numeric("optimizer.initial_lambda", &c.optimizer.initial_lambda));
  b.push_back(numeric("optimizer.lambda_max", &c.optimizer.lambda_max));
  b.push_back(numeric("optimizer.relative_decrease_tol",
                      &c.optimizer.relative_decrease_tol));
  b.push_back(numeric("optimizer.huber_delta", &c.optimizer.huber_delta));

  b.push_back(numeric("keyframe.translation", &c.keyframe_translation));
  b.push_back(numeric("keyframe.rotation_deg", &c.keyframe_rotation_deg));
  b.push_back(numeric("optimize_every", &c.optimize_every));
  b.push_back(numeric("seed", &c.seed));
  b.push_back(boolean("single_thread", &c.single_thread));
  b.push_back(string_opt("odom.source", &c.odom_source, {"dataset", "icp"}));
  b.push_back(numeric("sensor_height", &c.sensor_height));
  b.push_back(numeric("odom.sigma_t", &c.odom_sigma_t));
  b.push_back(numeric("odom.sigma_rot_deg", &c.odom_sigma_rot_deg));
  b.push_back(numeric("info_cap", &c.info_cap));
  b.push_back(numeric("anchor_info", &c.anchor_info));
  b.push_back(numeric("gt_sample_spacing", &c.gt_sample_spacing));
  return b;
}

}  // namespace

void load_config_file(const std::string& path, PipelineConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  auto table = bindings(config);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError,
                  path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const Binding& binding : table) {
      if (binding.key != key) continue;
      found = true;
      if (!binding.set(value)) {
        throw Error(ErrorCode::ConfigError,
                    path + ":" + std::to_string(line_no) + ": bad value '" +
                        value + "' for " + key);
      }
      break;
    }
    if (!found) {
      throw Error(ErrorCode::ConfigError,
                  path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
}

void save_config_file(const std::string& path, const PipelineConfig& config) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  auto table = bindings(const_cast<PipelineConfig&>(config));
  for (const Binding& binding : table) {
    out << binding.key << " = " << binding.get() << '\n';
  }
}

std::map<std::string, std::string> config_entries(const PipelineConfig& config) {
  std::map<std::string, std::string> out;
  auto table = bindings(const_cast<PipelineConfig&>(config));
  for (const Binding& binding : table) out[binding.key] = binding.get();
  return out;
}

}  // namespace sgraphs
