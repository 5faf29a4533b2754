#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgraphs/point_cloud.hpp"

namespace sgraphs {

struct FreespaceConfig {
  double resolution = 0.1;
  double z_low = 0.3;
  double z_high = 1.8;
  double margin = 0.5;  // grid padding around the content bounds
  int stride = 3;
  double min_clearance = 0.25;
  double disconnect_clearance = 0.6;
  int min_cluster_size = 10;
};

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct OccupancyGrid {
  Vec2 origin{0.0, 0.0};  // world position of the corner of cell (0, 0)
  double resolution = 0.1;
  int width = 0;
  int height = 0;
  std::vector<CellState> cells;

  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width && iy < height;
  }
  CellState at(int ix, int iy) const { return cells[iy * width + ix]; }
  void set(int ix, int iy, CellState s) { cells[iy * width + ix] = s; }
  Vec2 cell_center(int ix, int iy) const {
    return origin + Vec2((ix + 0.5) * resolution, (iy + 0.5) * resolution);
  }
  std::pair<int, int> cell_of(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x() - origin.x()) / resolution)),
            static_cast<int>(std::floor((p.y() - origin.y()) / resolution))};
  }
};

struct EsdfGrid {
  Vec2 origin{0.0, 0.0};
  double resolution = 0.1;
  int width = 0;
  int height = 0;
  std::vector<double> distance;  // meters to the nearest occupied/unknown cell

  double at(int ix, int iy) const { return distance[iy * width + ix]; }
  Vec2 cell_center(int ix, int iy) const {
    return origin + Vec2((ix + 0.5) * resolution, (iy + 0.5) * resolution);
  }
};

/// One keyframe's contribution to the map rasterization: its 2D position and
/// its map-frame points.
struct KeyframeFootprint {
  Vec2 position{0.0, 0.0};
  PointCloud points;
};

/// Project points inside [z_low, z_high] to occupied cells and clear the
/// Bresenham segment from each keyframe to each of its band points.
OccupancyGrid rasterize_map(const std::vector<KeyframeFootprint>& scans,
                            const FreespaceConfig& cfg);

/// Exact Euclidean distance transform; unknown cells count as occupied.
EsdfGrid compute_esdf(const OccupancyGrid& grid);

struct FreeSpaceVertex {
  Vec2 position{0.0, 0.0};
  double clearance = 0.0;
  int ix = 0;
  int iy = 0;
};

struct FreeSpaceGraph {
  std::vector<FreeSpaceVertex> vertices;
  std::vector<std::pair<int, int>> edges;

  std::vector<std::vector<int>> adjacency() const;
};

/// Vertices on a subsampled lattice of free cells with clearance above
/// cfg.min_clearance; edges between lattice neighbors whose connecting
/// segment stays in free cells.
FreeSpaceGraph build_free_space_graph(const EsdfGrid& esdf,
                                      const FreespaceConfig& cfg);

struct Cluster {
  std::vector<int> vertex_ids;
  Vec2 centroid{0.0, 0.0};
};

/// Drop vertices with clearance below cfg.disconnect_clearance and return the
/// connected components with at least cfg.min_cluster_size vertices.
std::vector<Cluster> split_clusters(const FreeSpaceGraph& graph,
                                    const FreespaceConfig& cfg);

// Debug dumps; not load-bearing.
void write_occupancy_pgm(const std::string& path, const OccupancyGrid& grid);
void write_esdf_pgm(const std::string& path, const EsdfGrid& grid);

}  // namespace sgraphs
