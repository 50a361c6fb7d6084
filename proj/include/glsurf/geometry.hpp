#pragma once

// Corner domains bounded by straight segments and circular arcs, the
// arc-length parametrization of the boundary, the boundary layer with its
// corner cells, boundary coordinates (s, t) and the cut-off chi.

#include "glsurf/types.hpp"

#include <optional>
#include <vector>

namespace glsurf {

/// Boundary piece from a to b. curvature = 0 is a segment; otherwise a minor
/// circular arc of signed curvature (positive = turning left, i.e. convex
/// when the boundary runs counterclockwise).
struct Edge {
  Vec2d a, b;
  double curvature = 0.0;

  double length() const;
  /// Heading angle of the tangent at arc-length u from a.
  double heading(double u) const;
  Vec2d point(double u) const;
  Vec2d tangent(double u) const;
  /// Arc-length parameter of the nearest point on the edge, clamped to [0, length].
  double project(const Vec2d& p) const;
  Vec2d center() const;
};

class CurvilinearPolygon {
 public:
  CurvilinearPolygon() = default;
  /// Edge j runs from vertices[j] to vertices[j + 1] with curvature curvatures[j]
  /// (all zero when omitted). Throws GeometryError on invalid input.
  explicit CurvilinearPolygon(std::vector<Vec2d> vertices, std::vector<double> curvatures = {});

  const std::vector<Vec2d>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool contains(const Vec2d& p) const;
  double area() const;
  Vec2d centroid() const;
  /// Axis-aligned bounding box (min corner, max corner).
  std::pair<Vec2d, Vec2d> bounding_box() const;

  static CurvilinearPolygon unit_square();
  /// L-shaped hexomino (0,0),(2,0),(2,1),(1,1),(1,2),(0,2), scaled by `scale`.
  static CurvilinearPolygon l_shape(double scale = 1.0);
  /// Unit square whose top-right corner is replaced by a tangent arc of radius r.
  static CurvilinearPolygon rounded_square(double r);

 private:
  std::vector<Vec2d> vertices_;
  std::vector<Edge> edges_;
  double area_ = 0.0;
  Vec2d centroid_ = Vec2d::Zero();
};

struct Corner {
  int vertex = 0;
  double sigma = 0.0;
  /// Interior angle in (0, 2 pi), never pi.
  double angle = 0.0;
};

/// Maximal run of the boundary between two consecutive corners, [sigma_begin, sigma_end)
/// with sigma_end possibly beyond total_length (wrap-around).
struct SmoothPiece {
  double sigma_begin = 0.0;
  double sigma_end = 0.0;
  int first_edge = 0;
  int edge_count = 0;

  double length() const { return sigma_end - sigma_begin; }
};

struct BoundaryParam {
  double total_length = 0.0;
  std::vector<Edge> edges;
  /// Arc-length at the start of each edge.
  std::vector<double> edge_start;
  std::vector<Corner> corners;
  std::vector<SmoothPiece> pieces;
  double max_curvature = 0.0;

  double wrap(double sigma) const;
  int edge_at(double sigma) const;
  Vec2d point(double sigma) const;
  Vec2d tangent(double sigma) const;
  /// Inward unit normal (left of the tangent for counterclockwise boundaries).
  Vec2d normal(double sigma) const;
  /// Right limit at corners and junctions.
  double curvature(double sigma) const;
  /// Periodic distance in arc-length to the nearest corner; its index in *which.
  double corner_distance(double sigma, int* which = nullptr) const;
  /// Index of the smooth piece containing sigma.
  int piece_at(double sigma) const;
};

BoundaryParam build_boundary_param(const CurvilinearPolygon& domain);

struct NearestPoint {
  double distance = 0.0;
  double sigma = 0.0;
  int edge = 0;
  /// The foot is a vertex where the tangent jumps (a corner).
  bool at_corner = false;
};

NearestPoint nearest_boundary_point(const BoundaryParam& param, const Vec2d& p);

/// Signed Euclidean distance to the boundary, positive inside.
double dist_to_boundary(const CurvilinearPolygon& domain, const Vec2d& p);

struct LayerSpec {
  double epsilon = 0.1;
  double c0 = 2.0;
  double c1 = 2.0;

  LayerSpec() = default;
  LayerSpec(double epsilon_, double c0_ = 2.0, double c1_ = 2.0);

  double log_eps() const;
  /// c0 eps |log eps|
  double tau_layer() const { return c0 * epsilon * log_eps(); }
  /// c1 eps |log eps|, tangential half-width of a corner cell.
  double cell_half_width() const { return c1 * epsilon * log_eps(); }
};

/// Checks that the layer chart is a diffeomorphism on the cut region: convex
/// corners need c1 >= c0 / tan(angle / 2), arcs need tau_layer * curvature < 1,
/// every smooth piece must be longer than two cell half-widths.
void validate_layer(const BoundaryParam& param, const LayerSpec& spec);

struct BoundaryCoords {
  double s = 0.0;  // sigma / eps
  double t = 0.0;  // tau / eps
  double sigma = 0.0;
  double tau = 0.0;
  int piece = 0;
};

/// (s, t) of a point of the cut layer; empty elsewhere.
std::optional<BoundaryCoords> boundary_coords(const BoundaryParam& param, const Vec2d& p,
                                              const LayerSpec& spec);

/// Nearest-point chart without the layer restriction: empty when the foot is a corner.
std::optional<BoundaryCoords> nearest_chart(const BoundaryParam& param, const Vec2d& p,
                                            double epsilon);

/// Cell-centred grid on a bounding box: x_i = xmin + (i + 1/2) hx.
struct Grid2D {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;
  int nx = 2, ny = 2;
  /// 1 where the node lies inside the domain.
  Array2i inside;

  double hx() const { return (xmax - xmin) / nx; }
  double hy() const { return (ymax - ymin) / ny; }
  double x(int i) const { return xmin + (i + 0.5) * hx(); }
  double y(int j) const { return ymin + (j + 0.5) * hy(); }
  Vec2d node(int i, int j) const { return {x(i), y(j)}; }
  double cell_area() const { return hx() * hy(); }

  bool same_shape(const Grid2D& o) const {
    return nx == o.nx && ny == o.ny && xmin == o.xmin && ymin == o.ymin && xmax == o.xmax &&
           ymax == o.ymax;
  }
};

/// nx x ny grid on the bounding box of the domain, interior mask filled.
Grid2D make_grid(const CurvilinearPolygon& domain, int nx, int ny);

enum class Region : int { Outside = 0, Bulk = 1, Cut = 2, Corner = 3 };

struct RegionMask {
  Grid2D grid;
  Array2i region;
  /// Corner index for Region::Corner nodes, -1 elsewhere.
  Array2i corner;

  double area_layer = 0.0;
  double area_cut = 0.0;
  std::vector<double> corner_areas;
  double corner_area_total = 0.0;
  /// Sum of corner-cell areas / (N eps^2 |log eps|^2).
  double corner_area_constant = 0.0;
  /// |boundary| - 2 N c1 eps |log eps|
  double cut_perimeter = 0.0;

  Region at(int i, int j) const { return Region(region(i, j)); }
};

/// Throws ResolutionError for fewer than 8 cells across tau_layer and
/// GeometryError when layers from distinct pieces overlap.
RegionMask classify_regions(const CurvilinearPolygon& domain, const BoundaryParam& param,
                            const Grid2D& grid, const LayerSpec& spec);

/// Integer-coded CSV: i, j, x, y, region, corner.
void write_mask_csv(const RegionMask& mask, const std::string& path);

/// chi(s): 0 within c1|log eps| of a corner, 1 beyond 2 c1|log eps|, smoothstep between.
double cutoff_chi(const BoundaryParam& param, const LayerSpec& spec, double s);
/// d chi / ds
double cutoff_chi_derivative(const BoundaryParam& param, const LayerSpec& spec, double s);

}  // namespace glsurf
