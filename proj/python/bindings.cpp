#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sgraphs/pipeline.hpp"

namespace py = pybind11;
using namespace sgraphs;

namespace {

std::array<double, 3> to_array(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 from_array(const std::array<double, 3>& a) { return Vec3(a[0], a[1], a[2]); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Five-layer situational graph SLAM core";

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def_static("identity", &Pose::identity)
      .def_static("from_translation",
                  [](double x, double y, double z) {
                    return Pose::from_translation(Vec3(x, y, z));
                  })
      .def_static("from_yaw", &Pose::from_yaw)
      .def_property_readonly("translation",
                             [](const Pose& p) { return to_array(p.translation); })
      .def_property_readonly("quaternion",
                             [](const Pose& p) {
                               return std::array<double, 4>{
                                   p.rotation.w(), p.rotation.x(),
                                   p.rotation.y(), p.rotation.z()};
                             })
      .def("apply",
           [](const Pose& p, const std::array<double, 3>& v) {
             return to_array(p.apply(from_array(v)));
           })
      .def("inverse", &Pose::inverse)
      .def("__mul__",
           [](const Pose& a, const Pose& b) { return pose_compose(a, b); })
      .def("__repr__", [](const Pose& p) {
        return "Pose(t=[" + format_double(p.translation.x()) + ", " +
               format_double(p.translation.y()) + ", " +
               format_double(p.translation.z()) + "])";
      });

  m.def("pose_compose", &pose_compose);
  m.def("pose_between", &pose_between);

  py::enum_<Frame>(m, "Frame")
      .value("MAP", Frame::Map)
      .value("SENSOR", Frame::Sensor);

  py::class_<PlaneCoeffs>(m, "PlaneCoeffs")
      .def(py::init([](const std::array<double, 3>& n, double d, Frame f) {
             return PlaneCoeffs(from_array(n), d, f);
           }),
           py::arg("normal"), py::arg("d"), py::arg("frame") = Frame::Sensor)
      .def_property_readonly("normal",
                             [](const PlaneCoeffs& p) { return to_array(p.normal); })
      .def_readonly("d", &PlaneCoeffs::d)
      .def_readonly("frame", &PlaneCoeffs::frame)
      .def("closest_point",
           [](const PlaneCoeffs& p) { return to_array(p.closest_point()); });

  m.def("plane_canonicalize", &plane_canonicalize);
  m.def("plane_to_map", &plane_to_map);
  m.def("plane_to_local", &plane_to_local);

  py::enum_<PlaneCategory>(m, "PlaneCategory")
      .value("X_VERTICAL", PlaneCategory::XVertical)
      .value("Y_VERTICAL", PlaneCategory::YVertical)
      .value("HORIZONTAL", PlaneCategory::Horizontal);

  m.def("classify_plane", &classify_plane);

  m.def(
      "prefilter",
      [](const std::vector<std::array<double, 3>>& points, double voxel) {
        PerceptionConfig cfg;
        cfg.voxel = voxel;
        PointCloud cloud;
        for (const auto& p : points) cloud.push_back(from_array(p));
        std::vector<std::array<double, 3>> out;
        for (const Vec3& p : prefilter(cloud, cfg)) out.push_back(to_array(p));
        return out;
      },
      py::arg("points"), py::arg("voxel") = 0.1);

  m.def(
      "compute_ate",
      [](const std::string& est_path, const std::string& ref_path) {
        const AteResult r = compute_ate(read_tum(est_path), read_tum(ref_path));
        return py::make_tuple(r.rmse, r.matched_pairs);
      },
      py::arg("est_tum"), py::arg("ref_tum"),
      "ATE RMSE between two TUM trajectory files");

  m.def(
      "simulate",
      [](const std::string& world_path, const std::string& waypoints_path,
         const std::string& out_dir, std::uint64_t seed, double sigma_t,
         double sigma_rot_deg, double range_sigma) {
        SimConfig cfg;
        cfg.seed = seed;
        cfg.sigma_t = sigma_t;
        cfg.sigma_rot_deg = sigma_rot_deg;
        cfg.range_sigma = range_sigma;
        const World world = world_from_json_file(world_path);
        const auto frames =
            simulate_trajectory(world, read_waypoints(waypoints_path), cfg);
        write_dataset(frames, world, out_dir);
        return frames.size();
      },
      py::arg("world"), py::arg("waypoints"), py::arg("out"), py::arg("seed") = 0,
      py::arg("sigma_t") = 0.01, py::arg("sigma_rot_deg") = 0.2,
      py::arg("range_sigma") = 0.01,
      "Generate a dataset and return the number of frames");

  m.def(
      "run_slam",
      [](const std::string& dataset_dir, const std::string& out_dir,
         const std::string& config_path, const std::string& odom,
         std::uint64_t seed, bool single_thread) {
        PipelineConfig config;
        if (!config_path.empty()) load_config_file(config_path, config);
        if (!odom.empty()) config.odom_source = odom;
        config.seed = seed;
        config.single_thread = single_thread;
        const RunState state = run_slam(dataset_dir, config);
        if (!out_dir.empty()) export_outputs(state, out_dir);
        const RunReport& r = state.report;
        py::dict out;
        out["ate_rmse"] = r.ate_rmse;
        out["odom_ate_rmse"] = r.odom_ate_rmse;
        out["map_rmse"] = r.map_rmse;
        out["keyframes"] = r.keyframes;
        out["planes"] = r.planes;
        out["rooms_finite"] = r.rooms_finite;
        out["rooms_infinite"] = r.rooms_infinite;
        out["floors"] = r.floors;
        out["loop_factors"] = r.loop_factors;
        out["wall_clock_s"] = r.wall_clock_s;
        return out;
      },
      py::arg("dataset"), py::arg("out") = "", py::arg("config") = "",
      py::arg("odom") = "", py::arg("seed") = 0, py::arg("single_thread") = false,
      "Run the full pipeline; returns the run report as a dict");
}
