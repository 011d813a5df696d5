#pragma once

// 3D convex hull by incremental construction with conflict lists (quickhull
// style). Points within a small tolerance of a facet plane count as on the hull
// and are not added as vertices, so coplanar facets come out triangulated.

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/error.hpp"
#include "herdscale/pca.hpp"
#include "herdscale/point_cloud.hpp"

namespace herdscale {

struct HullSummary {
  double volume = 0.0;
  double surface_area = 0.0;
  std::size_t vertex_count = 0;
  std::size_t face_count = 0;
};

/// Triangulated hull; faces are counter-clockwise seen from outside.
struct HullMesh {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::array<int, 3>> faces;
  double tolerance = 0.0;

  Eigen::Vector3d interior_point() const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    std::vector<char> used(points.size(), 0);
    std::size_t n = 0;
    for (const auto& f : faces) {
      for (int v : f) {
        if (!used[static_cast<std::size_t>(v)]) {
          used[static_cast<std::size_t>(v)] = 1;
          c += points[static_cast<std::size_t>(v)];
          ++n;
        }
      }
    }
    return n ? Eigen::Vector3d(c / static_cast<double>(n)) : c;
  }

  HullSummary summary() const {
    HullSummary s;
    const Eigen::Vector3d c = interior_point();
    std::vector<char> used(points.size(), 0);
    for (const auto& f : faces) {
      const auto& a = points[static_cast<std::size_t>(f[0])];
      const auto& b = points[static_cast<std::size_t>(f[1])];
      const auto& d = points[static_cast<std::size_t>(f[2])];
      s.surface_area += 0.5 * (b - a).cross(d - a).norm();
      s.volume += (a - c).dot((b - c).cross(d - c)) / 6.0;
      for (int v : f) used[static_cast<std::size_t>(v)] = 1;
    }
    for (char u : used) s.vertex_count += static_cast<std::size_t>(u);
    s.face_count = faces.size();
    return s;
  }
};

namespace detail {

class IncrementalHull {
 public:
  explicit IncrementalHull(const PointCloud& cloud) {
    pts_.reserve(cloud.size());
    for (const auto& p : cloud) pts_.push_back(to_vec(p));
    const double diag = bounding_box(cloud).diagonal();
    eps_ = 1e-10 * std::max(diag, 1e-300);
  }

  HullMesh build() {
    seed_simplex();
    while (!pending_.empty()) {
      const int f = pending_.back();
      pending_.pop_back();
      if (!faces_[static_cast<std::size_t>(f)].alive || faces_[static_cast<std::size_t>(f)].outside.empty()) continue;
      add_point_from(f);
    }
    HullMesh mesh;
    mesh.points = pts_;
    mesh.tolerance = eps_;
    for (const auto& face : faces_) {
      if (face.alive) mesh.faces.push_back(face.v);
    }
    return mesh;
  }

 private:
  struct Face {
    std::array<int, 3> v{};
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    double offset = 0.0;
    bool alive = true;
    std::vector<int> outside;
  };

  double distance(const Face& f, int p) const { return f.normal.dot(pts_[static_cast<std::size_t>(p)]) + f.offset; }

  std::uint64_t edge_key(int a, int b) const {
    return static_cast<std::uint64_t>(a) * pts_.size() + static_cast<std::uint64_t>(b);
  }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const auto& pa = pts_[static_cast<std::size_t>(a)];
    Eigen::Vector3d n = (pts_[static_cast<std::size_t>(b)] - pa).cross(pts_[static_cast<std::size_t>(c)] - pa);
    const double len = n.norm();
    f.normal = len > 0 ? Eigen::Vector3d(n / len) : n;
    f.offset = -f.normal.dot(pa);
    const int id = static_cast<int>(faces_.size());
    faces_.push_back(std::move(f));
    edges_[edge_key(a, b)] = id;
    edges_[edge_key(b, c)] = id;
    edges_[edge_key(c, a)] = id;
    return id;
  }

  void seed_simplex() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw Error(ErrorCode::TooFewPoints, "convex hull needs at least 4 points");
    int i0 = 0;
    for (int i = 1; i < n; ++i) {
      if (pts_[static_cast<std::size_t>(i)].x() < pts_[static_cast<std::size_t>(i0)].x()) i0 = i;
    }
    auto farthest = [&](auto&& score) {
      int best = -1;
      double best_s = -1.0;
      for (int i = 0; i < n; ++i) {
        const double s = score(pts_[static_cast<std::size_t>(i)]);
        if (s > best_s) {
          best_s = s;
          best = i;
        }
      }
      return std::pair{best, best_s};
    };
    const auto& p0 = pts_[static_cast<std::size_t>(i0)];
    auto [i1, d1] = farthest([&](const Eigen::Vector3d& p) { return (p - p0).norm(); });
    if (d1 <= eps_) throw Error(ErrorCode::CoplanarCloud, "all points coincide");
    const Eigen::Vector3d dir = (pts_[static_cast<std::size_t>(i1)] - p0).normalized();
    auto [i2, d2] = farthest([&](const Eigen::Vector3d& p) { return (p - p0).cross(dir).norm(); });
    if (d2 <= eps_) throw Error(ErrorCode::CoplanarCloud, "all points collinear");
    const Eigen::Vector3d plane_n =
        (pts_[static_cast<std::size_t>(i1)] - p0).cross(pts_[static_cast<std::size_t>(i2)] - p0).normalized();
    auto [i3, d3] = farthest([&](const Eigen::Vector3d& p) { return std::abs(plane_n.dot(p - p0)); });
    if (d3 <= eps_) throw Error(ErrorCode::CoplanarCloud, "hull volume is zero");

    // orient so the fourth vertex lies below the base face
    int a = i0, b = i1, c = i2;
    if (plane_n.dot(pts_[static_cast<std::size_t>(i3)] - p0) > 0) std::swap(b, c);
    const int tet[4][3] = {{a, b, c}, {a, i3, b}, {b, i3, c}, {c, i3, a}};
    std::vector<int> ids;
    for (const auto& t : tet) ids.push_back(make_face(t[0], t[1], t[2]));

    for (int p = 0; p < n; ++p) {
      if (p == i0 || p == i1 || p == i2 || p == i3) continue;
      assign(p, ids);
    }
    for (int id : ids) pending_.push_back(id);
  }

  void assign(int p, const std::vector<int>& candidates) {
    for (int id : candidates) {
      auto& f = faces_[static_cast<std::size_t>(id)];
      if (distance(f, p) > eps_) {
        f.outside.push_back(p);
        return;
      }
    }
  }

  void add_point_from(int start) {
    const auto& sf = faces_[static_cast<std::size_t>(start)];
    int eye = sf.outside.front();
    double best = distance(sf, eye);
    for (int p : sf.outside) {
      const double d = distance(sf, p);
      if (d > best) {
        best = d;
        eye = p;
      }
    }

    std::vector<int> visible{start};
    std::vector<char> mark(faces_.size(), 0);  // 1 = visible, 2 = not visible
    mark[static_cast<std::size_t>(start)] = 1;
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t q = 0; q < visible.size(); ++q) {
      const auto v = faces_[static_cast<std::size_t>(visible[q])].v;
      for (int e = 0; e < 3; ++e) {
        const int a = v[static_cast<std::size_t>(e)];
        const int b = v[static_cast<std::size_t>((e + 1) % 3)];
        const int nb = edges_.at(edge_key(b, a));
        auto& m = mark[static_cast<std::size_t>(nb)];
        if (m == 0) {
          m = distance(faces_[static_cast<std::size_t>(nb)], eye) > eps_ ? 1 : 2;
          if (m == 1) visible.push_back(nb);
        }
        if (m == 2) horizon.emplace_back(a, b);
      }
    }

    std::vector<int> orphans;
    for (int id : visible) {
      auto& f = faces_[static_cast<std::size_t>(id)];
      f.alive = false;
      for (int p : f.outside) {
        if (p != eye) orphans.push_back(p);
      }
      f.outside.clear();
      f.outside.shrink_to_fit();
      for (int e = 0; e < 3; ++e) {
        const auto key = edge_key(f.v[static_cast<std::size_t>(e)], f.v[static_cast<std::size_t>((e + 1) % 3)]);
        auto it = edges_.find(key);
        if (it != edges_.end() && it->second == id) edges_.erase(it);
      }
    }
    std::vector<int> created;
    created.reserve(horizon.size());
    for (auto [a, b] : horizon) created.push_back(make_face(a, b, eye));
    for (int p : orphans) assign(p, created);
    for (int id : created) pending_.push_back(id);
  }

  std::vector<Eigen::Vector3d> pts_;
  std::vector<Face> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::vector<int> pending_;
  double eps_ = 0.0;
};

}  // namespace detail

inline HullMesh convex_hull_mesh(const PointCloud& cloud) {
  return detail::IncrementalHull(cloud).build();
}

/// Hull volume (tetrahedra from an interior point) and facet area sum.
inline HullSummary convex_hull(const PointCloud& cloud) {
  auto summary = convex_hull_mesh(cloud).summary();
  if (!(summary.volume > 0.0)) throw Error(ErrorCode::CoplanarCloud, "hull volume is zero");
  return summary;
}

}  // namespace herdscale
