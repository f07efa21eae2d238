#pragma once

// Deformable terrain: a 2.5D grid of layered soil columns plus the dynamic
// soil particles produced by excavation.
//
// Column (ix, iy) is centered at origin + (ix, iy) * resolution. Each column
// stacks SoilCells upward from a common bedrock level; every cell is full
// except possibly the topmost one. Cell mass is derived, never stored:
//   mass = density * compaction * fill * resolution^2 * cell_height.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "excasim/errors.hpp"
#include "excasim/rng.hpp"
#include "excasim/soil.hpp"

namespace excasim::terrain {

using MaterialId = std::uint16_t;

struct TerrainParams {
  double resolution = 0.25;   // m per column, horizontal
  double cell_height = 0.1;   // m per layer
  double compaction_min = 0.8;
  double compaction_max = 1.2;
  double compaction_gain = 1.0;  // k_c
  double particle_radius_min = 0.02;
  double particle_radius_max = 0.05;
  double rest_speed = 0.05;  // m/s
  int settle_ticks = 10;
  double ground_friction = 0.5;  // horizontal velocity retained per contact step
};

struct SoilCell {
  MaterialId material = 0;
  double compaction = 1.0;
  double fill = 0.0;
};

struct SoilParticle {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double mass = 0.0;
  double radius = 0.0;
  MaterialId material = 0;
  int rest_ticks = 0;
};

struct CellIndex {
  int ix = 0;
  int iy = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct CutRequest {
  CellIndex cell;
  double depth = 0.0;  // m below the current column surface
};

// Mass removed per material (indexed by MaterialId).
struct RemovedSoil {
  std::vector<double> by_material;
  double shortfall = 0.0;  // m of requested cut that lay below bedrock

  double total() const {
    double s = 0.0;
    for (double m : by_material) s += m;
    return s;
  }
  void add(MaterialId id, double mass) {
    if (by_material.size() <= id) by_material.resize(id + 1u, 0.0);
    by_material[id] += mass;
  }
  void merge(const RemovedSoil& o) {
    for (std::size_t i = 0; i < o.by_material.size(); ++i) add(static_cast<MaterialId>(i), o.by_material[i]);
    shortfall += o.shortfall;
  }
};

struct ExcavationResult {
  double removed_mass = 0.0;
  double shortfall = 0.0;
  std::vector<SoilParticle> spawned;
};

class TerrainGrid {
 public:
  TerrainGrid() = default;

  TerrainGrid(int nx, int ny, Eigen::Vector2d origin, double bedrock, std::vector<soil::SoilMaterial> materials,
              TerrainParams params = {})
      : params_(params),
        nx_(nx),
        ny_(ny),
        origin_(origin),
        bedrock_(bedrock),
        materials_(std::move(materials)),
        columns_(static_cast<std::size_t>(std::max(nx, 0)) * static_cast<std::size_t>(std::max(ny, 0))),
        heights_(columns_.size(), bedrock) {
    if (nx < 0 || ny < 0) throw ConfigError("terrain grid dimensions must be non-negative");
    if (!(params_.resolution > 0.0) || !(params_.cell_height > 0.0)) {
      throw ConfigError("terrain resolution and cell height must be > 0");
    }
    if (!(params_.compaction_min > 0.0 && params_.compaction_min <= 1.0 && params_.compaction_max >= 1.0)) {
      throw ConfigError("terrain compaction bounds must satisfy 0 < min <= 1 <= max");
    }
    for (const auto& m : materials_) m.validate();
  }

  // Uniform column of `material` from bedrock up to `height`, compaction 1.
  static TerrainGrid flat(int nx, int ny, double height, soil::SoilMaterial material, TerrainParams params = {},
                          Eigen::Vector2d origin = Eigen::Vector2d::Zero(), double bedrock = 0.0) {
    TerrainGrid g(nx, ny, origin, bedrock, {std::move(material)}, params);
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) g.fill_column(ix, iy, height, 0);
    }
    return g;
  }

  // Replaces column contents with `material` up to `height`.
  void fill_column(int ix, int iy, double height, MaterialId material, double compaction = 1.0) {
    check_index(ix, iy);
    if (material >= materials_.size()) throw ConfigError("unknown material id");
    auto& cells = columns_[flat_index(ix, iy)];
    cells.clear();
    double remaining = (height - bedrock_) / params_.cell_height;
    while (remaining > 1e-12) {
      const double f = std::min(1.0, remaining);
      cells.push_back({material, compaction, f});
      remaining -= f;
    }
    refresh_height(ix, iy);
  }

  MaterialId add_material(soil::SoilMaterial m) {
    m.validate();
    for (std::size_t i = 0; i < materials_.size(); ++i) {
      if (materials_[i].name == m.name) {
        materials_[i] = std::move(m);
        return static_cast<MaterialId>(i);
      }
    }
    materials_.push_back(std::move(m));
    return static_cast<MaterialId>(materials_.size() - 1);
  }

  const std::vector<soil::SoilMaterial>& materials() const { return materials_; }
  const soil::SoilMaterial& material(MaterialId id) const { return materials_.at(id); }

  const TerrainParams& params() const { return params_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double resolution() const { return params_.resolution; }
  double cell_height() const { return params_.cell_height; }
  double bedrock() const { return bedrock_; }
  const Eigen::Vector2d& origin() const { return origin_; }
  double cell_volume() const { return params_.resolution * params_.resolution * params_.cell_height; }

  Eigen::Vector2d column_center(int ix, int iy) const {
    return origin_ + params_.resolution * Eigen::Vector2d(ix, iy);
  }

  // World-space extent covered by the columns (half a cell beyond the outer centers).
  double x_min() const { return origin_.x() - 0.5 * params_.resolution; }
  double y_min() const { return origin_.y() - 0.5 * params_.resolution; }
  double x_max() const { return origin_.x() + (nx_ - 0.5) * params_.resolution; }
  double y_max() const { return origin_.y() + (ny_ - 0.5) * params_.resolution; }

  bool contains(double x, double y) const {
    return nx_ > 0 && ny_ > 0 && x >= x_min() && x <= x_max() && y >= y_min() && y <= y_max();
  }

  bool valid_index(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }

  // Column whose footprint contains (x, y), clamped onto the grid.
  CellIndex cell_at(double x, double y) const {
    const int ix = static_cast<int>(std::floor((x - origin_.x()) / params_.resolution + 0.5));
    const int iy = static_cast<int>(std::floor((y - origin_.y()) / params_.resolution + 0.5));
    return {std::clamp(ix, 0, std::max(nx_ - 1, 0)), std::clamp(iy, 0, std::max(ny_ - 1, 0))};
  }

  std::span<const SoilCell> column(int ix, int iy) const {
    check_index(ix, iy);
    return columns_[flat_index(ix, iy)];
  }

  double column_height(int ix, int iy) const {
    check_index(ix, iy);
    return heights_[flat_index(ix, iy)];
  }

  // Bilinear interpolation of the column heights around (x, y).
  double surface_height(double x, double y) const {
    if (!contains(x, y)) {
      throw OutOfBoundsError("surface query outside terrain at (" + std::to_string(x) + ", " + std::to_string(y) +
                             ")");
    }
    return interpolate(x, y);
  }

  // Same as surface_height() but clamps queries to the nearest edge of the grid.
  double surface_height_clamped(double x, double y) const {
    if (nx_ == 0 || ny_ == 0) return bedrock_;
    return interpolate(std::clamp(x, x_min(), x_max()), std::clamp(y, y_min(), y_max()));
  }

  // Material of the topmost non-empty cell; falls back to material 0 on bare bedrock.
  MaterialId top_material(int ix, int iy) const {
    const auto cells = column(ix, iy);
    return cells.empty() ? MaterialId{0} : cells.back().material;
  }

  double cell_mass(const SoilCell& c) const {
    return materials_[c.material].density * c.compaction * c.fill * cell_volume();
  }

  double column_mass(int ix, int iy) const {
    double m = 0.0;
    for (const auto& c : column(ix, iy)) m += cell_mass(c);
    return m;
  }

  double total_mass() const {
    double m = 0.0;
    for (int iy = 0; iy < ny_; ++iy) {
      for (int ix = 0; ix < nx_; ++ix) m += column_mass(ix, iy);
    }
    return m;
  }

  std::vector<double> heights() const { return heights_; }

  // Lowers column (ix, iy) to `z`, never below bedrock. Compaction of the
  // remaining cells is untouched.
  RemovedSoil cut_column_to(int ix, int iy, double z) {
    check_index(ix, iy);
    RemovedSoil removed;
    if (z < bedrock_) {
      removed.shortfall = bedrock_ - z;
      z = bedrock_;
    }
    auto& cells = columns_[flat_index(ix, iy)];
    const double h = params_.cell_height;
    while (!cells.empty()) {
      SoilCell& top = cells.back();
      const double base = bedrock_ + static_cast<double>(cells.size() - 1) * h;
      const double top_z = base + top.fill * h;
      if (z >= top_z) break;
      const double new_fill = std::max(0.0, (z - base) / h);
      const double before = cell_mass(top);
      top.fill = new_fill;
      removed.add(top.material, before - cell_mass(top));
      if (new_fill > 0.0) break;
      cells.pop_back();
    }
    refresh_height(ix, iy);
    return removed;
  }

  RemovedSoil remove(std::span<const CutRequest> cuts) {
    RemovedSoil total;
    for (const auto& c : cuts) {
      if (!(c.depth >= 0.0)) throw std::invalid_argument("cut depth must be >= 0");
      if (c.depth == 0.0) {
        check_index(c.cell.ix, c.cell.iy);
        continue;
      }
      total.merge(cut_column_to(c.cell.ix, c.cell.iy, column_height(c.cell.ix, c.cell.iy) - c.depth));
    }
    return total;
  }

  // Turns `mass` of `material` into particles whose masses sum to `mass`.
  // Radii are drawn uniformly; mass follows radius at loose (swollen) density,
  // and the last particle carries the remainder.
  std::vector<SoilParticle> make_particles(double mass, MaterialId material, const Eigen::Vector3d& at,
                                           CounterRng& rng) const {
    std::vector<SoilParticle> out;
    if (!(mass > 0.0)) return out;
    const auto& mat = materials_.at(material);
    const double loose_density = mat.density / mat.swell_factor;
    const double half = 0.5 * params_.resolution;
    double remaining = mass;
    while (remaining > 0.0) {
      SoilParticle p;
      p.material = material;
      p.radius = rng.uniform(params_.particle_radius_min, params_.particle_radius_max);
      const double m = loose_density * 4.0 / 3.0 * std::numbers::pi * p.radius * p.radius * p.radius;
      if (m < remaining) {
        p.mass = m;
        remaining -= m;
      } else {
        p.mass = remaining;
        p.radius = std::cbrt(3.0 * remaining / (4.0 * std::numbers::pi * loose_density));
        remaining = 0.0;
      }
      p.position = at + Eigen::Vector3d(rng.uniform(-half, half), rng.uniform(-half, half),
                                        p.radius + rng.uniform(0.0, half));
      out.push_back(p);
    }
    return out;
  }

  // Particles for every material in `soil`, spawned around `at`.
  std::vector<SoilParticle> make_particles(const RemovedSoil& soil, const Eigen::Vector3d& at, CounterRng& rng) const {
    std::vector<SoilParticle> out;
    for (std::size_t i = 0; i < soil.by_material.size(); ++i) {
      auto ps = make_particles(soil.by_material[i], static_cast<MaterialId>(i), at, rng);
      out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
  }

  // Removes soil and converts it to particles above each cut column.
  ExcavationResult excavate(std::span<const CutRequest> cuts, CounterRng& rng) {
    ExcavationResult result;
    for (const auto& c : cuts) {
      RemovedSoil r = remove(std::span<const CutRequest>(&c, 1));
      result.removed_mass += r.total();
      result.shortfall += r.shortfall;
      const Eigen::Vector2d xy = column_center(c.cell.ix, c.cell.iy);
      auto ps = make_particles(r, {xy.x(), xy.y(), column_height(c.cell.ix, c.cell.iy)}, rng);
      result.spawned.insert(result.spawned.end(), ps.begin(), ps.end());
    }
    return result;
  }

  // Adds `mass` to the top of column (ix, iy) at loose compaction. A partial
  // top cell absorbs the deposit first, keeping its own material, and its
  // compaction becomes the volume-weighted mean; then new cells of
  // `material` are stacked. Cells below the top always stay full.
  void deposit_mass(int ix, int iy, double mass, MaterialId material) {
    check_index(ix, iy);
    if (!(mass > 0.0)) return;
    auto& cells = columns_[flat_index(ix, iy)];
    const double c_loose = params_.compaction_min;
    const double v = cell_volume();
    double remaining = mass;
    while (remaining > 0.0) {
      if (cells.empty() || cells.back().fill >= 1.0) cells.push_back({material, c_loose, 0.0});
      SoilCell& top = cells.back();
      const double rho = materials_[top.material].density;
      const double room = 1.0 - top.fill;
      const double room_mass = rho * c_loose * room * v;
      double add_fill;
      if (remaining < room_mass) {
        add_fill = remaining / (rho * c_loose * v);
        remaining = 0.0;
      } else {
        add_fill = room;
        remaining -= room_mass;
      }
      const double new_fill = top.fill + add_fill;
      top.compaction = (top.compaction * top.fill + c_loose * add_fill) / new_fill;
      top.fill = add_fill == room ? 1.0 : new_fill;
    }
    refresh_height(ix, iy);
  }

  // Settles particles into the columns beneath them.
  void deposit(std::span<const SoilParticle> particles) {
    for (const auto& p : particles) {
      const CellIndex c = cell_at(p.position.x(), p.position.y());
      deposit_mass(c.ix, c.iy, p.mass, p.material);
    }
  }

  // Compacts the top cell of each listed column: compaction rises by
  // k_c * pressure / E (capped), fill shrinks so cell mass is unchanged.
  void compact(std::span<const CellIndex> cells, double pressure) {
    if (!(pressure >= 0.0)) throw std::invalid_argument("compaction pressure must be >= 0");
    if (pressure == 0.0) return;
    for (const auto& idx : cells) {
      check_index(idx.ix, idx.iy);
      auto& col = columns_[flat_index(idx.ix, idx.iy)];
      if (col.empty()) continue;
      SoilCell& top = col.back();
      const double e = materials_[top.material].young_modulus;
      const double next = std::min(params_.compaction_max,
                                   top.compaction + params_.compaction_gain * pressure / e);
      if (next <= top.compaction) continue;
      top.fill = top.fill * top.compaction / next;
      top.compaction = next;
      refresh_height(idx.ix, idx.iy);
    }
  }

 private:
  std::size_t flat_index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(ix);
  }

  void check_index(int ix, int iy) const {
    if (!valid_index(ix, iy)) {
      throw OutOfBoundsError("terrain cell (" + std::to_string(ix) + ", " + std::to_string(iy) + ") out of range");
    }
  }

  void refresh_height(int ix, int iy) {
    double h = bedrock_;
    for (const auto& c : columns_[flat_index(ix, iy)]) h += c.fill * params_.cell_height;
    heights_[flat_index(ix, iy)] = h;
  }

  double interpolate(double x, double y) const {
    const double fx = std::clamp((x - origin_.x()) / params_.resolution, 0.0, nx_ - 1.0);
    const double fy = std::clamp((y - origin_.y()) / params_.resolution, 0.0, ny_ - 1.0);
    const int i0 = std::min(static_cast<int>(fx), std::max(nx_ - 2, 0));
    const int j0 = std::min(static_cast<int>(fy), std::max(ny_ - 2, 0));
    const int i1 = std::min(i0 + 1, nx_ - 1);
    const int j1 = std::min(j0 + 1, ny_ - 1);
    const double tx = fx - i0, ty = fy - j0;
    const double h00 = heights_[flat_index(i0, j0)], h10 = heights_[flat_index(i1, j0)];
    const double h01 = heights_[flat_index(i0, j1)], h11 = heights_[flat_index(i1, j1)];
    // Exact at column centers: each weight collapses to 0 or 1.
    if (tx == 0.0 && ty == 0.0) return h00;
    return (1.0 - ty) * ((1.0 - tx) * h00 + tx * h10) + ty * ((1.0 - tx) * h01 + tx * h11);
  }

  TerrainParams params_;
  int nx_ = 0;
  int ny_ = 0;
  Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
  double bedrock_ = 0.0;
  std::vector<soil::SoilMaterial> materials_;
  std::vector<std::vector<SoilCell>> columns_;
  std::vector<double> heights_;
};

inline double total_mass(const TerrainGrid& grid, std::span<const SoilParticle> particles) {
  double m = grid.total_mass();
  for (const auto& p : particles) m += p.mass;
  return m;
}

// Explicit Euler step of free particles against the heightfield. Particles
// resting for `settle_ticks` consecutive steps are deposited and removed.
// Returns the mass deposited this step.
inline double step_particles(std::vector<SoilParticle>& particles, TerrainGrid& grid, double dt, double gravity) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  const auto& prm = grid.params();
  double deposited = 0.0;
  std::vector<SoilParticle> settled;
  std::size_t keep = 0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    SoilParticle p = particles[i];
    p.position += p.velocity * dt;
    p.velocity.z() -= gravity * dt;
    if (grid.nx() > 0 && grid.ny() > 0) {
      p.position.x() = std::clamp(p.position.x(), grid.x_min(), grid.x_max());
      p.position.y() = std::clamp(p.position.y(), grid.y_min(), grid.y_max());
    }
    const double ground = grid.surface_height_clamped(p.position.x(), p.position.y());
    // The tolerance keeps a particle placed at ground + radius in contact
    // despite rounding in the subtraction.
    if (p.position.z() - p.radius <= ground + 1e-9) {
      p.position.z() = ground + p.radius;
      p.velocity.z() = std::max(0.0, p.velocity.z());
      p.velocity.x() *= prm.ground_friction;
      p.velocity.y() *= prm.ground_friction;
      p.rest_ticks = p.velocity.norm() < prm.rest_speed ? p.rest_ticks + 1 : 0;
    } else {
      p.rest_ticks = 0;
    }
    if (p.rest_ticks >= prm.settle_ticks) {
      settled.push_back(p);
      deposited += p.mass;
    } else {
      particles[keep++] = p;
    }
  }
  particles.resize(keep);
  grid.deposit(settled);
  return deposited;
}

// ESRI ASCII grid. Rows run north (max y) to south; heights with 6 decimals.
struct DemGrid {
  int ncols = 0;
  int nrows = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 0.0;
  double nodata = -9999.0;
  std::vector<double> values;  // row-major, north row first

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * ncols + col]; }
};

inline std::string format_dem(const TerrainGrid& grid) {
  std::string out;
  char buf[64];
  auto line = [&](const char* key, const char* fmt, auto v) {
    std::snprintf(buf, sizeof buf, fmt, v);
    out += key;
    out += ' ';
    out += buf;
    out += '\n';
  };
  line("ncols", "%d", grid.nx());
  line("nrows", "%d", grid.ny());
  line("xllcorner", "%.6f", grid.x_min());
  line("yllcorner", "%.6f", grid.y_min());
  line("cellsize", "%.6f", grid.resolution());
  line("NODATA_value", "%d", -9999);
  for (int iy = grid.ny() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      std::snprintf(buf, sizeof buf, "%.6f", grid.column_height(ix, iy));
      if (ix > 0) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline void export_dem(const TerrainGrid& grid, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open DEM output '" + path + "'");
  f << format_dem(grid);
  if (!f.good()) throw IoError("failed writing DEM '" + path + "'");
}

inline DemGrid parse_dem(std::istream& in) {
  DemGrid dem;
  auto header = [&](const char* expected, auto& value) {
    std::string key;
    if (!(in >> key >> value) || key != expected) {
      throw IoError(std::string("malformed DEM header, expected '") + expected + "'");
    }
  };
  header("ncols", dem.ncols);
  header("nrows", dem.nrows);
  header("xllcorner", dem.xllcorner);
  header("yllcorner", dem.yllcorner);
  header("cellsize", dem.cellsize);
  header("NODATA_value", dem.nodata);
  const auto n = static_cast<std::size_t>(dem.ncols) * static_cast<std::size_t>(dem.nrows);
  dem.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> dem.values[i])) throw IoError("DEM body truncated");
  }
  return dem;
}

inline DemGrid read_dem(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open DEM '" + path + "'");
  return parse_dem(f);
}

}  // namespace excasim::terrain
