#include "sgraphs/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "sgraphs/graph_io.hpp"

namespace fs = std::filesystem;

namespace sgraphs {

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink, const char* name)
      : sink_(sink), name_(name), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto end = std::chrono::steady_clock::now();
    sink_[name_] += std::chrono::duration<double>(end - start_).count();
  }

 private:
  std::map<std::string, double>& sink_;
  const char* name_;
  std::chrono::steady_clock::time_point start_;
};

Mat6 odometry_information(int steps, const PipelineConfig& cfg) {
  const double sigma_t2 = cfg.odom_sigma_t * cfg.odom_sigma_t * steps;
  const double sigma_r = cfg.odom_sigma_rot_deg * M_PI / 180.0;
  const double sigma_r2 = sigma_r * sigma_r * steps;
  const double info_t = sigma_t2 > 0.0 ? std::min(cfg.info_cap, 1.0 / sigma_t2)
                                       : cfg.info_cap;
  const double info_r = sigma_r2 > 0.0 ? std::min(cfg.info_cap, 1.0 / sigma_r2)
                                       : cfg.info_cap;
  Mat6 info = Mat6::Identity();
  info.topLeftCorner<3, 3>() *= info_r;
  info.bottomRightCorner<3, 3>() *= info_t;
  return info;
}

double rotation_angle(const Pose& p) { return so3_log(p.rotation).norm(); }

struct PipelineState {
  RunState run;
  std::map<VariableId, int> keyframe_floor;
  std::map<int, std::vector<VariableId>> floor_keyframes;
};

void process_keyframe(PipelineState& state, const PipelineConfig& config,
                      VariableId kf_id, int kf_index,
                      const PointCloud& filtered) {
  RunState& run = state.run;
  auto& timing = run.report.stage_seconds;

  // Floor assignment precedes everything that tags entities with a floor id.
  int floor_id;
  {
    StageTimer timer(timing, "floor");
    floor_id = detect_floor_change(run.graph.keyframe(kf_id).pose, run.floors,
                                   config.scene);
  }
  state.keyframe_floor[kf_id] = floor_id;
  state.floor_keyframes[floor_id].push_back(kf_id);
  run.keyframe_clouds[kf_id] = filtered;

  {
    StageTimer timer(timing, "plane_segmentation");
    const std::vector<SegmentedPlane> segments = segment_planes(
        filtered, config.perception, config.seed + static_cast<std::uint64_t>(kf_index));
    for (const SegmentedPlane& segment : segments) {
      associate_and_map_plane(run.graph, run.planes, kf_id, kf_index, floor_id,
                              segment, filtered, config.perception);
    }
  }

  // Free-space clustering on the current floor's map snapshot.
  std::vector<Cluster> clusters;
  FreeSpaceGraph fs_graph;
  {
    StageTimer timer(timing, "freespace");
    double floor_z_base = 0.0;
    for (const FloorRecord& f : run.floors) {
      if (f.floor_id == floor_id) floor_z_base = f.ref_z - config.sensor_height;
    }
    FreespaceConfig fs_cfg = config.freespace;
    fs_cfg.z_low = floor_z_base + config.freespace.z_low;
    fs_cfg.z_high = floor_z_base + config.freespace.z_high;

    std::vector<KeyframeFootprint> footprints;
    for (VariableId id : state.floor_keyframes[floor_id]) {
      const Pose& pose = run.graph.keyframe(id).pose;
      KeyframeFootprint fp;
      fp.position = pose.translation.head<2>();
      const PointCloud& cloud = run.keyframe_clouds[id];
      fp.points.reserve(cloud.size());
      for (const Vec3& p : cloud) {
        const Vec3 q = pose.apply(p);
        if (q.z() >= fs_cfg.z_low && q.z() <= fs_cfg.z_high) fp.points.push_back(q);
      }
      footprints.push_back(std::move(fp));
    }
    const OccupancyGrid grid = rasterize_map(footprints, fs_cfg);
    const EsdfGrid esdf = compute_esdf(grid);
    fs_graph = build_free_space_graph(esdf, fs_cfg);
    clusters = split_clusters(fs_graph, fs_cfg);
  }

  {
    StageTimer timer(timing, "rooms");
    const std::vector<RoomCandidate> candidates =
        detect_rooms(run.graph, clusters, fs_graph, run.planes, kf_index,
                     floor_id, config.scene);
    for (const RoomCandidate& candidate : candidates) {
      associate_room(run.graph, run.rooms, run.planes, candidate, config.scene);
    }
  }

  {
    StageTimer timer(timing, "floor");
    try {
      update_floor(run.graph, run.floors, floor_id, config.scene);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientWalls) throw;
    }
  }

  {
    StageTimer timer(timing, "loop_closure");
    const std::optional<FactorId> loop =
        try_close_loop(run.graph, run.keyframe_clouds, kf_id,
                       odometry_information(1, config), config.loop,
                       !config.single_thread);
    (void)loop;
  }

  {
    StageTimer timer(timing, "optimize");
    if (config.optimize_every > 0 && (kf_index + 1) % config.optimize_every == 0) {
      run.graph.optimize(config.optimizer);
    }
  }

  // Keep the latest clustering per floor for the scene-graph export.
  std::vector<ClusterSnapshot> snapshots;
  for (const ClusterSnapshot& snap : run.cluster_snapshots) {
    if (snap.floor_id != floor_id) snapshots.push_back(snap);
  }
  for (const Cluster& cluster : clusters) {
    snapshots.push_back(ClusterSnapshot{
        floor_id, cluster.centroid, static_cast<int>(cluster.vertex_ids.size())});
  }
  run.cluster_snapshots = std::move(snapshots);
}

}  // namespace

Trajectory keyframe_trajectory(const RunState& state) {
  Trajectory out;
  for (VariableId id : state.keyframe_order) {
    const KeyframeVar& kf = state.graph.keyframe(id);
    out.push_back({kf.timestamp, kf.pose});
  }
  return out;
}

PointCloud build_map_cloud(const RunState& state, double voxel) {
  struct Accum {
    Vec3 sum{0.0, 0.0, 0.0};
    int count = 0;
  };
  std::unordered_map<std::int64_t, int> slot;
  std::vector<Accum> voxels;
  auto key_of = [&](const Vec3& p) {
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() / voxel));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() / voxel));
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() / voxel));
    return (ix & 0x1fffff) | ((iy & 0x1fffff) << 21) | ((iz & 0x1fffff) << 42);
  };
  for (VariableId id : state.keyframe_order) {
    const Pose& pose = state.graph.keyframe(id).pose;
    const auto it = state.keyframe_clouds.find(id);
    if (it == state.keyframe_clouds.end()) continue;
    for (const Vec3& p : it->second) {
      const Vec3 q = pose.apply(p);
      auto [slot_it, inserted] = slot.try_emplace(key_of(q), static_cast<int>(voxels.size()));
      if (inserted) voxels.emplace_back();
      Accum& acc = voxels[slot_it->second];
      acc.sum += q;
      ++acc.count;
    }
  }
  PointCloud out;
  out.reserve(voxels.size());
  for (const Accum& acc : voxels) out.push_back(acc.sum / acc.count);
  return out;
}

RunState run_slam(const std::string& dataset_dir, const PipelineConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  if (config.odom_source != "dataset" && config.odom_source != "icp") {
    throw Error(ErrorCode::ConfigError,
                "odom.source must be dataset or icp, got " + config.odom_source);
  }
  const Dataset dataset = read_dataset(dataset_dir);

  PipelineState state;
  RunState& run = state.run;
  run.has_world = dataset.has_world;
  if (dataset.has_world) run.world = dataset.world;

  Pose icp_odom;           // integrated ICP odometry
  Pose icp_last_increment;
  PointCloud prev_filtered;
  std::vector<Pose> odom_used(dataset.odometry.size());

  Pose odom_at_last_kf;
  int last_kf_frame = -1;
  int kf_index = -1;
  VariableId last_kf_id;
  std::vector<int> keyframe_frames;

  for (std::size_t i = 0; i < dataset.scan_paths.size(); ++i) {
    PointCloud filtered;
    {
      StageTimer timer(run.report.stage_seconds, "prefilter");
      filtered = prefilter(read_xyz(dataset.scan_paths[i]), config.perception);
    }

    Pose odom_i;
    if (config.odom_source == "dataset") {
      odom_i = dataset.odometry[i].pose;
    } else {
      StageTimer timer(run.report.stage_seconds, "icp_odometry");
      if (i == 0) {
        icp_odom = dataset.odometry[0].pose;
      } else {
        Pose increment = icp_last_increment;
        try {
          increment =
              scan_match(filtered, prev_filtered, icp_last_increment, config.loop)
                  .pose;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientOverlap) throw;
        }
        icp_last_increment = increment;
        icp_odom = pose_compose(icp_odom, increment);
      }
      odom_i = icp_odom;
    }
    odom_used[i] = odom_i;

    bool make_keyframe = last_kf_frame < 0;
    if (!make_keyframe) {
      const Pose delta = pose_between(odom_at_last_kf, odom_i);
      make_keyframe =
          delta.translation.norm() >= config.keyframe_translation ||
          rotation_angle(delta) >= config.keyframe_rotation_deg * M_PI / 180.0;
    }
    if (!make_keyframe) {
      prev_filtered = std::move(filtered);
      continue;
    }

    ++kf_index;
    KeyframeVar kf;
    kf.timestamp = dataset.odometry[i].timestamp;
    if (kf_index == 0) {
      kf.pose = odom_i;
    } else {
      kf.pose = pose_compose(run.graph.keyframe(last_kf_id).pose,
                             pose_between(odom_at_last_kf, odom_i));
    }
    const VariableId kf_id = run.graph.add_variable(kf);
    run.keyframe_order.push_back(kf_id);
    keyframe_frames.push_back(static_cast<int>(i));

    if (kf_index == 0) {
      PoseAnchorFactor anchor;
      anchor.keyframe = kf_id;
      anchor.prior = kf.pose;
      anchor.information = config.anchor_info * Mat6::Identity();
      run.graph.add_factor(anchor);
    } else {
      OdometryFactor odom_factor;
      odom_factor.keyframe_a = last_kf_id;
      odom_factor.keyframe_b = kf_id;
      odom_factor.measurement = pose_between(odom_at_last_kf, odom_i);
      odom_factor.information =
          odometry_information(static_cast<int>(i) - last_kf_frame, config);
      run.graph.add_factor(odom_factor);
    }

    process_keyframe(state, config, kf_id, kf_index, filtered);

    odom_at_last_kf = odom_i;
    last_kf_frame = static_cast<int>(i);
    last_kf_id = kf_id;
    prev_filtered = std::move(filtered);
  }

  {
    StageTimer timer(run.report.stage_seconds, "optimize");
    if (!run.keyframe_order.empty()) run.graph.optimize(config.optimizer);
  }

  // Report.
  RunReport& report = run.report;
  report.keyframes = static_cast<int>(run.keyframe_order.size());
  report.planes = static_cast<int>(run.graph.variable_count(VarKind::Plane));
  report.floors = static_cast<int>(run.graph.variable_count(VarKind::Floor));
  for (const auto& [id, v] : run.graph.variables()) {
    if (id.kind != VarKind::Room) continue;
    if (std::get<RoomVar>(v).infinite) {
      ++report.rooms_infinite;
    } else {
      ++report.rooms_finite;
    }
  }
  for (const auto& [fid, f] : run.graph.factors()) {
    if (std::holds_alternative<LoopFactor>(f)) ++report.loop_factors;
  }

  if (!dataset.ground_truth.empty() && !run.keyframe_order.empty()) {
    StageTimer timer(run.report.stage_seconds, "evaluation");
    report.ate_rmse =
        compute_ate(keyframe_trajectory(run), dataset.ground_truth).rmse;
    Trajectory odom_at_keyframes;
    for (int frame : keyframe_frames) {
      odom_at_keyframes.push_back(
          {dataset.odometry[frame].timestamp, odom_used[frame]});
    }
    report.odom_ate_rmse =
        compute_ate(odom_at_keyframes, dataset.ground_truth).rmse;
  }
  if (run.has_world && !run.keyframe_order.empty()) {
    StageTimer timer(run.report.stage_seconds, "evaluation");
    const PointCloud est_map = build_map_cloud(run, config.perception.voxel);
    const PointCloud gt_map =
        sample_world_surfaces(run.world, config.gt_sample_spacing);
    report.map_rmse = compute_map_rmse(est_map, gt_map);
  }

  const auto t_end = std::chrono::steady_clock::now();
  report.wall_clock_s = std::chrono::duration<double>(t_end - t_start).count();
  run.config = config;
  return state.run;
}

void export_outputs(const RunState& state, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw Error(ErrorCode::IoError, "cannot create " + out_dir);
  }

  write_tum((fs::path(out_dir) / "est.tum").string(), keyframe_trajectory(state));
  write_xyz((fs::path(out_dir) / "map.xyz").string(),
            build_map_cloud(state, state.config.perception.voxel));

  nlohmann::json doc = graph_to_json(state.graph);
  doc["rooms_layer"] = nlohmann::json::array();
  for (const MappedRoom& room : state.rooms) {
    nlohmann::json jr{{"room", room.id.index}};
    jr["planes"] = nlohmann::json::array();
    for (VariableId side : room.side_planes) {
      if (side.valid()) jr["planes"].push_back(side.index);
    }
    doc["rooms_layer"].push_back(std::move(jr));
  }
  doc["floors_layer"] = nlohmann::json::array();
  for (const FloorRecord& floor : state.floors) {
    if (!floor.var.valid()) continue;
    nlohmann::json jf{{"floor", floor.var.index},
                      {"floor_id", floor.floor_id},
                      {"ref_z", floor.ref_z}};
    jf["rooms"] = nlohmann::json::array();
    for (const auto& [room_id, factor_id] : floor.room_edges) {
      jf["rooms"].push_back(room_id.index);
    }
    doc["floors_layer"].push_back(std::move(jf));
  }
  doc["free_space_clusters"] = nlohmann::json::array();
  for (const ClusterSnapshot& snap : state.cluster_snapshots) {
    doc["free_space_clusters"].push_back(
        nlohmann::json{{"floor_id", snap.floor_id},
                       {"centroid", {snap.centroid.x(), snap.centroid.y()}},
                       {"vertices", snap.vertex_count}});
  }
  {
    std::ofstream out(fs::path(out_dir) / "sgraph.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write sgraph.json");
    out << doc.dump(2) << '\n';
  }

  const RunReport& report = state.report;
  nlohmann::json jr;
  jr["ate_rmse"] = report.ate_rmse;
  jr["odom_ate_rmse"] = report.odom_ate_rmse;
  jr["map_rmse"] = report.map_rmse;
  jr["counts"] = {{"keyframes", report.keyframes},
                  {"planes", report.planes},
                  {"rooms_finite", report.rooms_finite},
                  {"rooms_infinite", report.rooms_infinite},
                  {"floors", report.floors},
                  {"loop_factors", report.loop_factors}};
  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write report.json");
    out << jr.dump(2) << '\n';
  }

  // Timing lives outside report.json so the deterministic outputs stay
  // byte-identical across runs.
  nlohmann::json jt;
  jt["wall_clock_s"] = report.wall_clock_s;
  for (const auto& [stage, seconds] : report.stage_seconds) {
    jt["stages"][stage] = seconds;
  }
  {
    std::ofstream out(fs::path(out_dir) / "timing.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write timing.json");
    out << jt.dump(2) << '\n';
  }
}

}  // namespace sgraphs
