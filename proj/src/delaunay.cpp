#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "qapnet/affinity.hpp"
#include "qapnet/error.hpp"

namespace qapnet {
namespace {

double orient(const Point& a, const Point& b, const Point& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Positive when d lies strictly inside the circumcircle of the CCW triangle abc.
double in_circle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_noise(std::uint64_t key) {
  return static_cast<double>(splitmix(key) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

struct Tri {
  std::size_t a, b, c;
};

// Returns triangles over the input indices, or nullopt when the result is
// degenerate (lost vertices or zero-area triangles).
std::optional<std::vector<Triangle>> bowyer_watson(const PointSet& pts) {
  const std::size_t n = pts.size();
  double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
  for (const auto& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);

  PointSet all = pts;
  all.push_back({cx - 100.0 * span, cy - 100.0 * span});
  all.push_back({cx + 100.0 * span, cy - 100.0 * span});
  all.push_back({cx, cy + 100.0 * span});
  std::vector<Tri> tris{{n, n + 1, n + 2}};

  for (std::size_t p = 0; p < n; ++p) {
    std::vector<Tri> keep;
    std::map<std::pair<std::size_t, std::size_t>, int> boundary;
    for (const auto& t : tris) {
      if (in_circle(all[t.a], all[t.b], all[t.c], all[p]) > 0.0) {
        for (auto [u, v] : {std::pair{t.a, t.b}, std::pair{t.b, t.c}, std::pair{t.c, t.a}}) {
          ++boundary[{std::min(u, v), std::max(u, v)}];
        }
      } else {
        keep.push_back(t);
      }
    }
    // Directed boundary edges: recover orientation from the removed triangles.
    for (const auto& t : tris) {
      if (in_circle(all[t.a], all[t.b], all[t.c], all[p]) <= 0.0) continue;
      for (auto [u, v] : {std::pair{t.a, t.b}, std::pair{t.b, t.c}, std::pair{t.c, t.a}}) {
        if (boundary[{std::min(u, v), std::max(u, v)}] != 1) continue;
        keep.push_back({u, v, p});
      }
    }
    tris = std::move(keep);
  }

  std::vector<Triangle> out;
  std::vector<bool> seen(n, false);
  const double area_eps = 1e-14 * span * span;
  for (const auto& t : tris) {
    if (t.a >= n || t.b >= n || t.c >= n) continue;
    if (std::abs(orient(pts[t.a], pts[t.b], pts[t.c])) <= area_eps) return std::nullopt;
    Triangle tri{t.a, t.b, t.c};
    std::sort(tri.begin(), tri.end());
    out.push_back(tri);
    seen[t.a] = seen[t.b] = seen[t.c] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) return std::nullopt;
  std::sort(out.begin(), out.end());
  return out;
}

void check_points(const PointSet& points, std::size_t min_count) {
  if (points.size() < min_count) {
    throw InvalidArgument("graph construction needs at least " + std::to_string(min_count) + " points");
  }
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidArgument("graph construction: non-finite point");
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Graph graph_from_edges(const PointSet& points, std::set<Edge> edges) {
  Graph g;
  g.points = points;
  g.edges.assign(edges.begin(), edges.end());
  g.edge_feature.reserve(g.edges.size());
  for (auto [i, j] : g.edges) g.edge_feature.push_back(distance(points[i], points[j]));
  return g;
}

}  // namespace

Graph delaunay(const PointSet& points) {
  check_points(points, 3);

  // All-collinear inputs have no triangulation.
  std::size_t far = 1;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (distance(points[0], points[i]) > distance(points[0], points[far])) far = i;
  const double d = distance(points[0], points[far]);
  bool collinear = true;
  for (const auto& p : points) {
    if (std::abs(orient(points[0], points[far], p)) > 1e-12 * d * d) {
      collinear = false;
      break;
    }
  }
  if (collinear) throw InvalidArgument("delaunay: all points are collinear");

  auto tris = bowyer_watson(points);
  if (!tris) {
    PointSet jittered = points;
    const double scale = 1e-9 * std::max(d, 1e-12);
    for (std::size_t i = 0; i < jittered.size(); ++i) {
      jittered[i].x += scale * unit_noise(2 * i);
      jittered[i].y += scale * unit_noise(2 * i + 1);
    }
    tris = bowyer_watson(jittered);
    if (!tris) throw InvalidArgument("delaunay: degenerate point configuration");
  }

  std::set<Edge> edges;
  for (const auto& t : *tris) {
    edges.insert({t[0], t[1]});
    edges.insert({t[1], t[2]});
    edges.insert({t[0], t[2]});
  }
  Graph g = graph_from_edges(points, std::move(edges));
  g.triangles = std::move(*tris);
  return g;
}

Graph fully_connected(const PointSet& points) {
  check_points(points, 2);
  std::set<Edge> edges;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) edges.insert({i, j});
  return graph_from_edges(points, std::move(edges));
}

}  // namespace qapnet
