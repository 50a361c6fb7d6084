#include "glsurf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace glsurf {

namespace {

double cross(const Vec2d& u, const Vec2d& v) { return u.x() * v.y() - u.y() * v.x(); }

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a <= -kPi) a += 2 * kPi;
  return a;
}

// Segment intersection including touching and collinear overlap.
bool segments_intersect(const Vec2d& p1, const Vec2d& p2, const Vec2d& q1, const Vec2d& q2) {
  const double scale = std::max({(p2 - p1).norm(), (q2 - q1).norm(), 1e-300});
  const double tol = 1e-12 * scale * scale;
  auto orient = [&](const Vec2d& a, const Vec2d& b, const Vec2d& c) {
    const double v = cross(b - a, c - a);
    return v > tol ? 1 : (v < -tol ? -1 : 0);
  };
  auto on_segment = [](const Vec2d& a, const Vec2d& b, const Vec2d& c) {
    return std::min(a.x(), b.x()) - 1e-14 <= c.x() && c.x() <= std::max(a.x(), b.x()) + 1e-14 &&
           std::min(a.y(), b.y()) - 1e-14 <= c.y() && c.y() <= std::max(a.y(), b.y()) + 1e-14;
  };
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

// 5-point Gauss-Legendre on [0, 1].
constexpr double kGx[5] = {0.5, 0.5 - 0.2692346550528416, 0.5 + 0.2692346550528416,
                           0.5 - 0.4530899229693320, 0.5 + 0.4530899229693320};
constexpr double kGw[5] = {0.2844444444444444, 0.2393143352496832, 0.2393143352496832,
                           0.1184634425280945, 0.1184634425280945};

}  // namespace

// ---------------------------------------------------------------------------
// Edge

double Edge::length() const {
  const double chord = (b - a).norm();
  if (curvature == 0.0) return chord;
  const double half = std::min(1.0, 0.5 * std::abs(curvature) * chord);
  return 2.0 * std::asin(half) / std::abs(curvature);
}

double Edge::heading(double u) const {
  const Vec2d c = b - a;
  return std::atan2(c.y(), c.x()) + curvature * (u - 0.5 * length());
}

Vec2d Edge::point(double u) const {
  if (curvature == 0.0) return a + (u / length()) * (b - a);
  const double phi0 = heading(0.0);
  const double phi = phi0 + curvature * u;
  return a + Vec2d(std::sin(phi) - std::sin(phi0), std::cos(phi0) - std::cos(phi)) / curvature;
}

Vec2d Edge::tangent(double u) const {
  const double phi = heading(u);
  return {std::cos(phi), std::sin(phi)};
}

Vec2d Edge::center() const {
  const double phi0 = heading(0.0);
  return a + Vec2d(-std::sin(phi0), std::cos(phi0)) / curvature;
}

double Edge::project(const Vec2d& p) const {
  const double len = length();
  if (curvature == 0.0) {
    const Vec2d d = b - a;
    return std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0) * len;
  }
  const Vec2d rel = p - center();
  const double r = rel.norm();
  if (r == 0.0) return 0.0;
  // point = center + (sin phi, -cos phi) / curvature
  const double sgn = curvature > 0 ? 1.0 : -1.0;
  const Vec2d d = sgn * rel / r;
  const double phi = std::atan2(d.x(), -d.y());
  const double u = 0.5 * len + wrap_angle(phi - heading(0.5 * len)) / curvature;
  if (u >= 0.0 && u <= len) return u;
  return (p - a).squaredNorm() <= (p - b).squaredNorm() ? 0.0 : len;
}

// ---------------------------------------------------------------------------
// CurvilinearPolygon

CurvilinearPolygon::CurvilinearPolygon(std::vector<Vec2d> vertices, std::vector<double> curvatures)
    : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) throw GeometryError("CurvilinearPolygon: need at least three vertices");
  if (curvatures.empty()) curvatures.assign(n, 0.0);
  if (curvatures.size() != n) throw GeometryError("CurvilinearPolygon: one curvature per edge");

  for (std::size_t j = 0; j < n; ++j) {
    Edge e{vertices_[j], vertices_[(j + 1) % n], curvatures[j]};
    if (!e.a.allFinite() || !std::isfinite(e.curvature))
      throw GeometryError("CurvilinearPolygon: non-finite input");
    const double chord = (e.b - e.a).norm();
    if (chord <= 0.0) throw GeometryError("CurvilinearPolygon: repeated vertex");
    if (0.5 * std::abs(e.curvature) * chord > 1.0 + 1e-12)
      throw GeometryError("CurvilinearPolygon: arc radius smaller than half the chord");
    edges_.push_back(e);
  }

  // Polyline sampling for the self-intersection test.
  std::vector<Vec2d> poly;
  for (const Edge& e : edges_) {
    const int pieces = e.curvature == 0.0 ? 1 : 32;
    for (int k = 0; k < pieces; ++k) poly.push_back(e.point(e.length() * k / pieces));
  }
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % m], poly[j], poly[(j + 1) % m]))
        throw GeometryError("CurvilinearPolygon: self-intersecting boundary");
    }
  }

  // Area and centroid by Green's theorem along each edge.
  double a2 = 0.0, mx = 0.0, my = 0.0;
  for (const Edge& e : edges_) {
    const double len = e.length();
    const int panels = e.curvature == 0.0 ? 1 : 64;
    for (int p = 0; p < panels; ++p) {
      for (int k = 0; k < 5; ++k) {
        const double u = (p + kGx[k]) * len / panels;
        const double w = kGw[k] * len / panels;
        const Vec2d r = e.point(u), d = e.tangent(u);
        a2 += w * cross(r, d);
        mx += w * r.x() * r.x() * d.y();
        my -= w * r.y() * r.y() * d.x();
      }
    }
  }
  area_ = 0.5 * a2;
  if (area_ <= 0.0) throw GeometryError("CurvilinearPolygon: boundary must run counterclockwise");
  centroid_ = Vec2d(0.5 * mx, 0.5 * my) / area_;

  bool has_corner = false;
  for (std::size_t j = 0; j < n; ++j) {
    const Edge& in = edges_[(j + n - 1) % n];
    const Edge& out = edges_[j];
    const Vec2d t_in = in.tangent(in.length()), t_out = out.tangent(0.0);
    if (std::abs(std::atan2(cross(t_in, t_out), t_in.dot(t_out))) > 1e-9) has_corner = true;
  }
  if (!has_corner) throw GeometryError("CurvilinearPolygon: the boundary has no corner");
}

bool CurvilinearPolygon::contains(const Vec2d& p) const {
  bool inside = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2d& vi = vertices_[i];
    const Vec2d& vj = vertices_[j];
    if ((vi.y() > p.y()) != (vj.y() > p.y()) &&
        p.x() < (vj.x() - vi.x()) * (p.y() - vi.y()) / (vj.y() - vi.y()) + vi.x())
      inside = !inside;
  }
  // Circular segments between chord and arc flip membership.
  for (const Edge& e : edges_) {
    if (e.curvature == 0.0) continue;
    const double r = 1.0 / std::abs(e.curvature);
    if ((p - e.center()).norm() >= r) continue;
    const Vec2d c = e.b - e.a;
    const Vec2d mid = e.point(0.5 * e.length());
    if (cross(c, p - e.a) * cross(c, mid - e.a) > 0) inside = !inside;
  }
  return inside;
}

double CurvilinearPolygon::area() const { return area_; }

Vec2d CurvilinearPolygon::centroid() const { return centroid_; }

std::pair<Vec2d, Vec2d> CurvilinearPolygon::bounding_box() const {
  Vec2d lo = vertices_[0], hi = vertices_[0];
  for (const Edge& e : edges_) {
    const int samples = e.curvature == 0.0 ? 1 : 256;
    for (int k = 0; k <= samples; ++k) {
      const Vec2d q = e.point(e.length() * k / samples);
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
  }
  return {lo, hi};
}

CurvilinearPolygon CurvilinearPolygon::unit_square() {
  return CurvilinearPolygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
}

CurvilinearPolygon CurvilinearPolygon::l_shape(double scale) {
  if (!(scale > 0)) throw GeometryError("l_shape: scale must be positive");
  std::vector<Vec2d> v = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  for (Vec2d& p : v) p *= scale;
  return CurvilinearPolygon(std::move(v));
}

CurvilinearPolygon CurvilinearPolygon::rounded_square(double r) {
  if (!(r > 0 && r < 1)) throw GeometryError("rounded_square: radius must lie in (0, 1)");
  return CurvilinearPolygon({{0, 0}, {1, 0}, {1, 1 - r}, {1 - r, 1}, {0, 1}},
                            {0.0, 0.0, 1.0 / r, 0.0, 0.0});
}

// ---------------------------------------------------------------------------
// BoundaryParam

BoundaryParam build_boundary_param(const CurvilinearPolygon& domain) {
  BoundaryParam bp;
  bp.edges = domain.edges();
  const int n = int(bp.edges.size());
  if (n < 3) throw GeometryError("build_boundary_param: invalid domain");
  double sigma = 0.0;
  for (const Edge& e : bp.edges) {
    bp.edge_start.push_back(sigma);
    sigma += e.length();
    bp.max_curvature = std::max(bp.max_curvature, std::abs(e.curvature));
  }
  bp.total_length = sigma;

  for (int j = 0; j < n; ++j) {
    const Edge& in = bp.edges[(j + n - 1) % n];
    const Edge& out = bp.edges[j];
    const Vec2d t_in = in.tangent(in.length()), t_out = out.tangent(0.0);
    const double turn = std::atan2(cross(t_in, t_out), t_in.dot(t_out));
    if (std::abs(turn) > 1e-9) bp.corners.push_back({j, bp.edge_start[j], kPi - turn});
  }

  const int nc = int(bp.corners.size());
  for (int k = 0; k < nc; ++k) {
    const Corner& c0 = bp.corners[k];
    const Corner& c1 = bp.corners[(k + 1) % nc];
    SmoothPiece piece;
    piece.first_edge = c0.vertex;
    piece.edge_count = ((c1.vertex - c0.vertex) % n + n) % n;
    if (piece.edge_count == 0) piece.edge_count = n;
    piece.sigma_begin = c0.sigma;
    piece.sigma_end = c1.sigma > c0.sigma ? c1.sigma : c1.sigma + bp.total_length;
    bp.pieces.push_back(piece);
  }
  return bp;
}

double BoundaryParam::wrap(double sigma) const {
  double s = std::fmod(sigma, total_length);
  if (s < 0) s += total_length;
  if (s >= total_length) s -= total_length;
  return s;
}

int BoundaryParam::edge_at(double sigma) const {
  const double s = wrap(sigma);
  const auto it = std::upper_bound(edge_start.begin(), edge_start.end(), s);
  return std::max(0, int(it - edge_start.begin()) - 1);
}

Vec2d BoundaryParam::point(double sigma) const {
  const double s = wrap(sigma);
  const int e = edge_at(s);
  return edges[e].point(s - edge_start[e]);
}

Vec2d BoundaryParam::tangent(double sigma) const {
  const double s = wrap(sigma);
  const int e = edge_at(s);
  return edges[e].tangent(s - edge_start[e]);
}

Vec2d BoundaryParam::normal(double sigma) const {
  const Vec2d t = tangent(sigma);
  return {-t.y(), t.x()};
}

double BoundaryParam::curvature(double sigma) const { return edges[edge_at(sigma)].curvature; }

double BoundaryParam::corner_distance(double sigma, int* which) const {
  const double s = wrap(sigma);
  double best = std::numeric_limits<double>::infinity();
  int best_k = -1;
  for (std::size_t k = 0; k < corners.size(); ++k) {
    double d = std::abs(s - corners[k].sigma);
    d = std::min(d, total_length - d);
    if (d < best) best = d, best_k = int(k);
  }
  if (which) *which = best_k;
  return best;
}

int BoundaryParam::piece_at(double sigma) const {
  const double s = wrap(sigma);
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const SmoothPiece& p = pieces[k];
    if ((s >= p.sigma_begin && s < p.sigma_end) || (s + total_length >= p.sigma_begin && s + total_length < p.sigma_end))
      return int(k);
  }
  return 0;
}

NearestPoint nearest_boundary_point(const BoundaryParam& param, const Vec2d& p) {
  NearestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  double best_u = 0.0;
  for (std::size_t e = 0; e < param.edges.size(); ++e) {
    const Edge& edge = param.edges[e];
    const double u = edge.project(p);
    const double d = (edge.point(u) - p).norm();
    if (d < best.distance) {
      best.distance = d;
      best.edge = int(e);
      best_u = u;
    }
  }
  const Edge& edge = param.edges[best.edge];
  const double len = edge.length();
  best.sigma = param.wrap(param.edge_start[best.edge] + best_u);
  const double tiny = 1e-12 * param.total_length;
  if (best_u <= tiny || best_u >= len - tiny) {
    const double sigma_vertex = best_u <= tiny ? param.edge_start[best.edge]
                                               : param.wrap(param.edge_start[best.edge] + len);
    for (const Corner& c : param.corners) {
      double d = std::abs(c.sigma - sigma_vertex);
      d = std::min(d, param.total_length - d);
      if (d <= tiny) best.at_corner = true;
    }
  }
  return best;
}

double dist_to_boundary(const CurvilinearPolygon& domain, const Vec2d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Edge& e : domain.edges()) best = std::min(best, (e.point(e.project(p)) - p).norm());
  return domain.contains(p) ? best : -best;
}

// ---------------------------------------------------------------------------
// Layer

LayerSpec::LayerSpec(double epsilon_, double c0_, double c1_) : epsilon(epsilon_), c0(c0_), c1(c1_) {
  if (!(epsilon > 0 && epsilon < 1)) throw ParameterError("LayerSpec: epsilon must lie in (0, 1)");
  if (!(c0 > 0) || !(c1 > 0)) throw ParameterError("LayerSpec: c0 and c1 must be positive");
}

double LayerSpec::log_eps() const { return std::abs(std::log(epsilon)); }

void validate_layer(const BoundaryParam& param, const LayerSpec& spec) {
  for (const Corner& c : param.corners) {
    if (c.angle < kPi && spec.c1 < spec.c0 / std::tan(0.5 * c.angle) - 1e-12) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "validate_layer: c1 = %g below c0 / tan(angle / 2) = %g at a corner of angle %g",
                    spec.c1, spec.c0 / std::tan(0.5 * c.angle), c.angle);
      throw GeometryError(buf);
    }
  }
  if (spec.tau_layer() * param.max_curvature >= 1.0)
    throw GeometryError("validate_layer: layer deeper than the smallest radius of curvature");
  for (const SmoothPiece& p : param.pieces) {
    if (p.length() <= 2.0 * spec.cell_half_width())
      throw GeometryError("validate_layer: corner cells overlap (smooth piece shorter than two cells)");
  }
}

std::optional<BoundaryCoords> nearest_chart(const BoundaryParam& param, const Vec2d& p,
                                            double epsilon) {
  const NearestPoint np = nearest_boundary_point(param, p);
  if (np.at_corner) return std::nullopt;
  BoundaryCoords bc;
  bc.sigma = np.sigma;
  bc.tau = np.distance;
  bc.s = np.sigma / epsilon;
  bc.t = np.distance / epsilon;
  bc.piece = param.piece_at(np.sigma);
  return bc;
}

std::optional<BoundaryCoords> boundary_coords(const BoundaryParam& param, const Vec2d& p,
                                              const LayerSpec& spec) {
  const NearestPoint np = nearest_boundary_point(param, p);
  if (np.at_corner || np.distance > spec.tau_layer()) return std::nullopt;
  if (param.corner_distance(np.sigma) <= spec.cell_half_width()) return std::nullopt;
  BoundaryCoords bc;
  bc.sigma = np.sigma;
  bc.tau = np.distance;
  bc.s = np.sigma / spec.epsilon;
  bc.t = np.distance / spec.epsilon;
  bc.piece = param.piece_at(np.sigma);
  return bc;
}

// ---------------------------------------------------------------------------
// Grid and mask

Grid2D make_grid(const CurvilinearPolygon& domain, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ParameterError("make_grid: need at least 2 x 2 cells");
  const auto [lo, hi] = domain.bounding_box();
  Grid2D g;
  g.xmin = lo.x();
  g.ymin = lo.y();
  g.xmax = hi.x();
  g.ymax = hi.y();
  g.nx = nx;
  g.ny = ny;
  g.inside.setZero(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) g.inside(i, j) = domain.contains(g.node(i, j)) ? 1 : 0;
  return g;
}

RegionMask classify_regions(const CurvilinearPolygon& domain, const BoundaryParam& param,
                            const Grid2D& grid, const LayerSpec& spec) {
  validate_layer(param, spec);
  const double tau = spec.tau_layer();
  const double cut = spec.cell_half_width();
  if (tau < 8.0 * std::max(grid.hx(), grid.hy()))
    throw ResolutionError("classify_regions: fewer than 8 grid cells across the boundary layer");

  RegionMask mask;
  mask.grid = grid;
  mask.region.setConstant(grid.nx, grid.ny, int(Region::Outside));
  mask.corner.setConstant(grid.nx, grid.ny, -1);
  const int nc = int(param.corners.size());
  mask.corner_areas.assign(nc, 0.0);
  const double da = grid.cell_area();

  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2d p = grid.node(i, j);
      if (!domain.contains(p)) continue;
      const NearestPoint np = nearest_boundary_point(param, p);
      if (np.distance > tau) {
        mask.region(i, j) = int(Region::Bulk);
        continue;
      }
      mask.area_layer += da;
      int which = -1;
      const double dc = param.corner_distance(np.sigma, &which);
      if (np.at_corner || dc <= cut) {
        mask.region(i, j) = int(Region::Corner);
        mask.corner(i, j) = which;
        mask.corner_areas[which] += da;
        continue;
      }
      // Away from the corner cells only the own piece may be within reach.
      const SmoothPiece& own = param.pieces[param.piece_at(np.sigma)];
      for (std::size_t e = 0; e < param.edges.size(); ++e) {
        const int rel = (int(e) - own.first_edge + int(param.edges.size())) % int(param.edges.size());
        if (rel < own.edge_count) continue;
        const Edge& edge = param.edges[e];
        if ((edge.point(edge.project(p)) - p).norm() <= tau)
          throw GeometryError("classify_regions: boundary layers of distinct pieces overlap");
      }
      mask.region(i, j) = int(Region::Cut);
      mask.area_cut += da;
    }
  }
  for (double a : mask.corner_areas) mask.corner_area_total += a;
  const double scale = spec.epsilon * spec.epsilon * spec.log_eps() * spec.log_eps();
  mask.corner_area_constant = nc > 0 ? mask.corner_area_total / (nc * scale) : 0.0;
  mask.cut_perimeter = param.total_length - 2.0 * nc * cut;
  return mask;
}

void write_mask_csv(const RegionMask& mask, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_mask_csv: cannot open " + path);
  out << "i,j,x,y,region,corner\n";
  char buf[128];
  for (int j = 0; j < mask.grid.ny; ++j) {
    for (int i = 0; i < mask.grid.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%d,%d\n", i, j, mask.grid.x(i), mask.grid.y(j),
                    mask.region(i, j), mask.corner(i, j));
      out << buf;
    }
  }
}

// ---------------------------------------------------------------------------
// Cut-off

namespace {

// Signed rescaled offset from the nearest corner, periodic.
double corner_offset_s(const BoundaryParam& param, const LayerSpec& spec, double s) {
  const double sigma = param.wrap(s * spec.epsilon);
  double best = std::numeric_limits<double>::infinity();
  for (const Corner& c : param.corners) {
    double d = sigma - c.sigma;
    if (d > 0.5 * param.total_length) d -= param.total_length;
    if (d <= -0.5 * param.total_length) d += param.total_length;
    if (std::abs(d) < std::abs(best)) best = d;
  }
  return best / spec.epsilon;
}

}  // namespace

double cutoff_chi(const BoundaryParam& param, const LayerSpec& spec, double s) {
  const double width = spec.c1 * spec.log_eps();
  const double d = std::abs(corner_offset_s(param, spec, s));
  if (d <= width) return 0.0;
  if (d >= 2.0 * width) return 1.0;
  const double x = (d - width) / width;
  return x * x * (3.0 - 2.0 * x);
}

double cutoff_chi_derivative(const BoundaryParam& param, const LayerSpec& spec, double s) {
  const double width = spec.c1 * spec.log_eps();
  const double off = corner_offset_s(param, spec, s);
  const double d = std::abs(off);
  if (d <= width || d >= 2.0 * width) return 0.0;
  const double x = (d - width) / width;
  return (off > 0 ? 1.0 : -1.0) * 6.0 * x * (1.0 - x) / width;
}

}  // namespace glsurf
