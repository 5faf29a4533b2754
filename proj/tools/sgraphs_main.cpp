#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "sgraphs/pipeline.hpp"

namespace {

int cmd_run(const std::string& dataset_dir, const std::string& config_path,
            const std::string& out_dir, const std::string& odom,
            std::uint64_t seed, bool seed_set, bool single_thread) {
  sgraphs::PipelineConfig config;
  if (!config_path.empty()) sgraphs::load_config_file(config_path, config);
  if (!odom.empty()) config.odom_source = odom;
  if (seed_set) config.seed = seed;
  if (single_thread) config.single_thread = true;

  const sgraphs::RunState state = sgraphs::run_slam(dataset_dir, config);
  sgraphs::export_outputs(state, out_dir);

  const sgraphs::RunReport& r = state.report;
  std::printf("keyframes %d planes %d rooms %d+%d floors %d loops %d\n",
              r.keyframes, r.planes, r.rooms_finite, r.rooms_infinite, r.floors,
              r.loop_factors);
  if (r.ate_rmse >= 0.0) {
    std::printf("ate_rmse %.6f odom_ate_rmse %.6f\n", r.ate_rmse, r.odom_ate_rmse);
  }
  if (r.map_rmse >= 0.0) std::printf("map_rmse %.6f\n", r.map_rmse);
  std::printf("wall_clock %.2fs\n", r.wall_clock_s);
  return 0;
}

int cmd_simulate(const std::string& world_path, const std::string& waypoints_path,
                 const std::string& out_dir, std::uint64_t seed, double sigma_t,
                 double sigma_rot_deg, double range_sigma, int bias_frame,
                 const std::vector<double>& bias) {
  const sgraphs::World world = sgraphs::world_from_json_file(world_path);
  const std::vector<sgraphs::Vec3> waypoints =
      sgraphs::read_waypoints(waypoints_path);

  sgraphs::SimConfig cfg;
  cfg.seed = seed;
  cfg.sigma_t = sigma_t;
  cfg.sigma_rot_deg = sigma_rot_deg;
  cfg.range_sigma = range_sigma;
  cfg.odom_bias_frame = bias_frame;
  if (bias.size() == 3) cfg.odom_bias = sgraphs::Vec3(bias[0], bias[1], bias[2]);

  const auto frames = sgraphs::simulate_trajectory(world, waypoints, cfg);
  sgraphs::write_dataset(frames, world, out_dir);
  std::printf("wrote %zu frames to %s\n", frames.size(), out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& ref_path) {
  const sgraphs::Trajectory est = sgraphs::read_tum(est_path);
  const sgraphs::Trajectory ref = sgraphs::read_tum(ref_path);
  const sgraphs::AteResult result = sgraphs::compute_ate(est, ref);
  std::printf("ate_rmse %.6f over %d pairs\n", result.rmse, result.matched_pairs);
  return 0;
}

int cmd_eval_map(const std::string& est_path, const std::string& world_path,
                 double spacing) {
  const sgraphs::PointCloud est = sgraphs::read_xyz(est_path);
  const sgraphs::World world = sgraphs::world_from_json_file(world_path);
  const double rmse = sgraphs::compute_map_rmse(
      est, sgraphs::sample_world_surfaces(world, spacing));
  std::printf("map_rmse %.6f\n", rmse);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"S-Graphs+ pipeline: five-layer situational graph SLAM on "
               "simulated LiDAR datasets"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the SLAM pipeline on a dataset");
  std::string dataset_dir, config_path, out_dir = "out", odom;
  std::uint64_t seed = 0;
  bool single_thread = false;
  run->add_option("dataset", dataset_dir, "dataset directory")->required();
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--odom", odom, "odometry source")
      ->check(CLI::IsMember({"dataset", "icp"}));
  auto* seed_opt = run->add_option("--seed", seed, "pipeline RNG seed");
  run->add_flag("--single-thread", single_thread, "force sequential execution");

  auto* simulate = app.add_subcommand("simulate", "generate a dataset");
  std::string world_path, waypoints_path, sim_out = "dataset";
  std::uint64_t sim_seed = 0;
  double sigma_t = 0.01, sigma_rot = 0.2, range_sigma = 0.01;
  int bias_frame = -1;
  std::vector<double> bias;
  simulate->add_option("world", world_path, "world json file")->required();
  simulate->add_option("--waypoints", waypoints_path, "waypoint file (x y z per line)")
      ->required();
  simulate->add_option("--out", sim_out, "dataset output directory");
  simulate->add_option("--seed", sim_seed, "dataset RNG seed");
  simulate->add_option("--sigma-t", sigma_t, "odometry translation noise per step");
  simulate->add_option("--sigma-rot", sigma_rot, "odometry rotation noise per step, degrees");
  simulate->add_option("--range-sigma", range_sigma, "LiDAR range noise");
  simulate->add_option("--bias-frame", bias_frame, "frame index for a one-off odometry bias");
  simulate->add_option("--bias", bias, "bias vector x y z")->expected(3);

  auto* eval = app.add_subcommand("eval", "absolute trajectory error between two TUM files");
  std::string est_path, ref_path;
  eval->add_option("--est", est_path, "estimated trajectory")->required();
  eval->add_option("--ref", ref_path, "reference trajectory")->required();

  auto* eval_map = app.add_subcommand("eval-map", "map RMSE of an xyz cloud against a world");
  std::string map_path, map_world;
  double spacing = 0.05;
  eval_map->add_option("--est", map_path, "estimated map (xyz)")->required();
  eval_map->add_option("--world", map_world, "world json file")->required();
  eval_map->add_option("--spacing", spacing, "surface sampling spacing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
  }

  try {
    if (run->parsed()) {
      return cmd_run(dataset_dir, config_path, out_dir, odom, seed,
                     seed_opt->count() > 0, single_thread);
    }
    if (simulate->parsed()) {
      return cmd_simulate(world_path, waypoints_path, sim_out, sim_seed, sigma_t,
                          sigma_rot, range_sigma, bias_frame, bias);
    }
    if (eval->parsed()) return cmd_eval(est_path, ref_path);
    if (eval_map->parsed()) return cmd_eval_map(map_path, map_world, spacing);
  } catch (const sgraphs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
