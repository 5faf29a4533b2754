#include "sgraphs/point_cloud.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sgraphs/error.hpp"

namespace sgraphs {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

PointCloud read_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Vec3 p;
    if (ss >> p.x() >> p.y() >> p.z()) cloud.push_back(p);
  }
  return cloud;
}

void write_xyz(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (const Vec3& p : cloud) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
        << format_double(p.z()) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Trajectory read_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  Trajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectoryEntry e;
    double qx, qy, qz, qw;
    if (ss >> e.timestamp >> e.pose.translation.x() >> e.pose.translation.y() >>
        e.pose.translation.z() >> qx >> qy >> qz >> qw) {
      e.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
      traj.push_back(e);
    }
  }
  return traj;
}

void write_tum(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (const TrajectoryEntry& e : trajectory) {
    const auto& q = e.pose.rotation;
    const auto& t = e.pose.translation;
    out << format_double(e.timestamp) << ' ' << format_double(t.x()) << ' '
        << format_double(t.y()) << ' ' << format_double(t.z()) << ' '
        << format_double(q.x()) << ' ' << format_double(q.y()) << ' '
        << format_double(q.z()) << ' ' << format_double(q.w()) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace sgraphs
