#pragma once

#include <map>
#include <string>

#include "sgraphs/evaluation.hpp"
#include "sgraphs/factor_graph.hpp"
#include "sgraphs/freespace.hpp"
#include "sgraphs/loop_closure.hpp"
#include "sgraphs/perception.hpp"
#include "sgraphs/scene_layers.hpp"
#include "sgraphs/simulator.hpp"

namespace sgraphs {

struct PipelineConfig {
  PerceptionConfig perception;
  FreespaceConfig freespace;
  SceneConfig scene;
  LoopConfig loop;
  OptimizerConfig optimizer;

  double keyframe_translation = 0.5;
  double keyframe_rotation_deg = 15.0;
  int optimize_every = 1;
  std::uint64_t seed = 0;
  bool single_thread = false;
  std::string odom_source = "dataset";  // dataset | icp
  double sensor_height = 0.5;          // sensor z above the floor surface

  // Information model for odometry factors, per simulator step.
  double odom_sigma_t = 0.01;
  double odom_sigma_rot_deg = 0.2;
  double info_cap = 1e8;
  double anchor_info = 1e6;
  double gt_sample_spacing = 0.05;
};

/// Flat "key = value" config file; '#' starts a comment. Unknown keys are a
/// ConfigError.
void load_config_file(const std::string& path, PipelineConfig& config);
void save_config_file(const std::string& path, const PipelineConfig& config);
std::map<std::string, std::string> config_entries(const PipelineConfig& config);

struct RunReport {
  double ate_rmse = -1.0;       // -1 when no ground truth is available
  double odom_ate_rmse = -1.0;
  double map_rmse = -1.0;       // -1 when no world model is available
  int keyframes = 0;
  int planes = 0;
  int rooms_finite = 0;
  int rooms_infinite = 0;
  int floors = 0;
  int loop_factors = 0;
  double wall_clock_s = 0.0;
  std::map<std::string, double> stage_seconds;
};

struct ClusterSnapshot {
  int floor_id = 0;
  Vec2 centroid{0.0, 0.0};
  int vertex_count = 0;
};

struct RunState {
  FactorGraph graph;
  PlaneBook planes;
  RoomBook rooms;
  FloorBook floors;
  KeyframeClouds keyframe_clouds;
  std::vector<VariableId> keyframe_order;
  std::vector<ClusterSnapshot> cluster_snapshots;  // latest per floor
  RunReport report;
  PipelineConfig config;
  bool has_world = false;
  World world;
};

/// Full pipeline over a dataset directory: prefilter, odometry, keyframing,
/// plane segmentation and mapping, free-space clustering, room and floor
/// layers, loop closure and joint optimization.
RunState run_slam(const std::string& dataset_dir, const PipelineConfig& config);

/// Writes est.tum, map.xyz, sgraph.json, report.json and timing.json.
/// Everything except timing.json is byte-deterministic for a fixed run.
void export_outputs(const RunState& state, const std::string& out_dir);

/// The deduplicated estimated map at the current keyframe estimates.
PointCloud build_map_cloud(const RunState& state, double voxel);

Trajectory keyframe_trajectory(const RunState& state);

}  // namespace sgraphs
