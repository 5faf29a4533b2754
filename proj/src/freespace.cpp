#include "sgraphs/freespace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "sgraphs/error.hpp"

namespace sgraphs {

namespace {

template <typename F>
void bresenham(int x0, int y0, int x1, int y1, F&& visit) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int x = x0, y = y0;
  while (true) {
    visit(x, y);
    if (x == x1 && y == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

OccupancyGrid rasterize_map(const std::vector<KeyframeFootprint>& scans,
                            const FreespaceConfig& cfg) {
  if (scans.empty()) throw Error(ErrorCode::EmptyInput, "no keyframe scans");
  std::size_t total_points = 0;
  for (const auto& s : scans) total_points += s.points.size();
  if (total_points == 0) throw Error(ErrorCode::EmptyInput, "no map points");

  Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Vec2 hi = -lo;
  auto grow = [&](const Vec2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& s : scans) {
    grow(s.position);
    for (const Vec3& p : s.points) {
      if (p.z() < cfg.z_low || p.z() > cfg.z_high) continue;
      grow(p.head<2>());
    }
  }
  if (!(lo.x() <= hi.x())) throw Error(ErrorCode::EmptyInput, "no band points");

  OccupancyGrid grid;
  grid.resolution = cfg.resolution;
  grid.origin = lo - Vec2(cfg.margin, cfg.margin);
  grid.width = static_cast<int>(
      std::ceil((hi.x() - lo.x() + 2.0 * cfg.margin) / cfg.resolution)) + 1;
  grid.height = static_cast<int>(
      std::ceil((hi.y() - lo.y() + 2.0 * cfg.margin) / cfg.resolution)) + 1;
  grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height,
                    CellState::Unknown);

  for (const auto& s : scans) {
    for (const Vec3& p : s.points) {
      if (p.z() < cfg.z_low || p.z() > cfg.z_high) continue;
      const auto [ix, iy] = grid.cell_of(p.head<2>());
      if (grid.in_bounds(ix, iy)) grid.set(ix, iy, CellState::Occupied);
    }
  }
  for (const auto& s : scans) {
    const auto [kx, ky] = grid.cell_of(s.position);
    for (const Vec3& p : s.points) {
      if (p.z() < cfg.z_low || p.z() > cfg.z_high) continue;
      const auto [px, py] = grid.cell_of(p.head<2>());
      bresenham(kx, ky, px, py, [&](int x, int y) {
        if (x == px && y == py) return;  // endpoint stays occupied
        if (grid.in_bounds(x, y) && grid.at(x, y) != CellState::Occupied) {
          grid.set(x, y, CellState::Free);
        }
      });
    }
  }
  return grid;
}

namespace {

// 1D squared distance transform (Felzenszwalb-Huttenlocher). All inputs are
// integer-valued doubles, so the output values are exact.
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

EsdfGrid compute_esdf(const OccupancyGrid& grid) {
  EsdfGrid out;
  out.origin = grid.origin;
  out.resolution = grid.resolution;
  out.width = grid.width;
  out.height = grid.height;
  out.distance.assign(grid.cells.size(), 0.0);

  const double inf = 1e18;
  std::vector<double> sq(grid.cells.size());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    sq[i] = grid.cells[i] == CellState::Free ? inf : 0.0;
  }

  std::vector<double> col(grid.height), cold(grid.height);
  for (int x = 0; x < grid.width; ++x) {
    for (int y = 0; y < grid.height; ++y) col[y] = sq[y * grid.width + x];
    edt_1d(col, cold);
    for (int y = 0; y < grid.height; ++y) sq[y * grid.width + x] = cold[y];
  }
  std::vector<double> row(grid.width), rowd(grid.width);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) row[x] = sq[y * grid.width + x];
    edt_1d(row, rowd);
    for (int x = 0; x < grid.width; ++x) {
      out.distance[y * grid.width + x] = grid.resolution * std::sqrt(rowd[x]);
    }
  }
  return out;
}

std::vector<std::vector<int>> FreeSpaceGraph::adjacency() const {
  std::vector<std::vector<int>> adj(vertices.size());
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

FreeSpaceGraph build_free_space_graph(const EsdfGrid& esdf,
                                      const FreespaceConfig& cfg) {
  FreeSpaceGraph graph;
  std::map<std::pair<int, int>, int> vertex_at;
  for (int iy = 0; iy < esdf.height; iy += cfg.stride) {
    for (int ix = 0; ix < esdf.width; ix += cfg.stride) {
      const double clearance = esdf.at(ix, iy);
      if (clearance <= 0.0 || clearance < cfg.min_clearance) continue;
      vertex_at[{ix, iy}] = static_cast<int>(graph.vertices.size());
      graph.vertices.push_back(
          FreeSpaceVertex{esdf.cell_center(ix, iy), clearance, ix, iy});
    }
  }

  auto segment_free = [&](int x0, int y0, int x1, int y1) {
    bool ok = true;
    bresenham(x0, y0, x1, y1, [&](int x, int y) {
      if (esdf.at(x, y) <= 0.0) ok = false;
    });
    return ok;
  };

  const int s = cfg.stride;
  const std::pair<int, int> offsets[] = {{s, 0}, {0, s}, {s, s}, {s, -s}};
  for (const auto& [cell, vid] : vertex_at) {
    for (const auto& [dx, dy] : offsets) {
      const auto it = vertex_at.find({cell.first + dx, cell.second + dy});
      if (it == vertex_at.end()) continue;
      if (segment_free(cell.first, cell.second, cell.first + dx,
                       cell.second + dy)) {
        graph.edges.emplace_back(vid, it->second);
      }
    }
  }
  return graph;
}

std::vector<Cluster> split_clusters(const FreeSpaceGraph& graph,
                                    const FreespaceConfig& cfg) {
  const int n = static_cast<int>(graph.vertices.size());
  std::vector<bool> kept(n);
  for (int i = 0; i < n; ++i) {
    kept[i] = graph.vertices[i].clearance >= cfg.disconnect_clearance;
  }
  const auto adj = graph.adjacency();

  std::vector<int> label(n, -1);
  std::vector<Cluster> clusters;
  for (int start = 0; start < n; ++start) {
    if (!kept[start] || label[start] >= 0) continue;
    Cluster cluster;
    std::vector<int> stack{start};
    label[start] = static_cast<int>(clusters.size());
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      cluster.vertex_ids.push_back(v);
      for (int w : adj[v]) {
        if (kept[w] && label[w] < 0) {
          label[w] = label[start];
          stack.push_back(w);
        }
      }
    }
    std::sort(cluster.vertex_ids.begin(), cluster.vertex_ids.end());
    if (static_cast<int>(cluster.vertex_ids.size()) >= cfg.min_cluster_size) {
      Vec2 sum(0.0, 0.0);
      for (int v : cluster.vertex_ids) sum += graph.vertices[v].position;
      cluster.centroid = sum / static_cast<double>(cluster.vertex_ids.size());
      clusters.push_back(std::move(cluster));
    }
  }
  return clusters;
}

void write_occupancy_pgm(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "P2\n" << grid.width << ' ' << grid.height << "\n255\n";
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) {
      const CellState s = grid.at(x, y);
      out << (s == CellState::Free ? 255 : s == CellState::Occupied ? 0 : 128);
      out << (x + 1 == grid.width ? '\n' : ' ');
    }
  }
}

void write_esdf_pgm(const std::string& path, const EsdfGrid& grid) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  double max_d = 1e-9;
  for (double d : grid.distance) max_d = std::max(max_d, d);
  out << "P2\n" << grid.width << ' ' << grid.height << "\n255\n";
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) {
      out << static_cast<int>(255.0 * grid.at(x, y) / max_d);
      out << (x + 1 == grid.width ? '\n' : ' ');
    }
  }
}

}  // namespace sgraphs
