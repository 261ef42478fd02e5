#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace cir {

/// Uniform-grid nearest-neighbor index over a fixed 3D point set. Distances
/// are summed as dx*dx + dy*dy + dz*dz in that order, so results are
/// bit-identical to a plain exhaustive scan.
template <typename Scalar>
class PointGrid {
 public:
  using Point = Eigen::Matrix<Scalar, 3, 1>;

  struct Hit {
    Eigen::Index index = -1;
    Scalar squared_distance = std::numeric_limits<Scalar>::infinity();
  };

  template <typename Derived>
  explicit PointGrid(const Eigen::MatrixBase<Derived>& points) : points_(points.template cast<Scalar>()) {
    const Eigen::Index n = points_.rows();
    if (n == 0) return;
    lo_ = points_.colwise().minCoeff().transpose();
    const Point hi = points_.colwise().maxCoeff().transpose();
    const Point extent = hi - lo_;
    const Scalar longest = std::max<Scalar>(extent.maxCoeff(), Scalar(1e-12));
    // About two points per occupied cell for roughly volumetric data.
    Scalar box_volume = 1;
    for (int a = 0; a < 3; ++a) box_volume *= std::max(extent[a], longest * Scalar(1e-3));
    cell_ = std::cbrt(Scalar(2) * box_volume / static_cast<Scalar>(n));
    cell_ = std::max(cell_, longest / Scalar(256));
    for (int a = 0; a < 3; ++a) {
      dims_[a] = std::max(1, static_cast<int>(std::floor(extent[a] / cell_)) + 1);
    }
    starts_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
    std::vector<std::size_t> cell_of(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      cell_of[i] = flat(cell_coords(points_.row(i).transpose()));
      ++starts_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < starts_.size(); ++c) starts_[c] += starts_[c - 1];
    items_.resize(n);
    std::vector<std::size_t> fill(starts_.begin(), starts_.end() - 1);
    for (Eigen::Index i = 0; i < n; ++i) items_[fill[cell_of[i]]++] = i;
  }

  Eigen::Index size() const { return points_.rows(); }

  /// Nearest point; ties resolve to the lowest index.
  Hit nearest(const Point& q) const {
    Hit best;
    visit_shells(q, [&](Eigen::Index i, Scalar d2) {
      if (d2 < best.squared_distance || (d2 == best.squared_distance && i < best.index)) best = {i, d2};
    }, [&]() { return best.squared_distance; });
    return best;
  }

  /// All points whose squared distance is within `slack` of the minimum, ascending by index.
  std::vector<Eigen::Index> nearest_ties(const Point& q, Scalar slack) const {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    std::vector<std::pair<Eigen::Index, Scalar>> cand;
    visit_shells(q, [&](Eigen::Index i, Scalar d2) {
      if (d2 <= best + slack) cand.emplace_back(i, d2);
      best = std::min(best, d2);
    }, [&]() { return best + slack; });
    std::vector<Eigen::Index> out;
    for (const auto& [i, d2] : cand) {
      if (d2 <= best + slack) out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::array<int, 3> cell_coords(const Point& p) const {
    std::array<int, 3> c;
    for (int a = 0; a < 3; ++a) {
      const Scalar u = std::floor((p[a] - lo_[a]) / cell_);
      c[a] = static_cast<int>(std::clamp<Scalar>(u, 0, static_cast<Scalar>(dims_[a] - 1)));
    }
    return c;
  }

  std::size_t flat(const std::array<int, 3>& c) const {
    return static_cast<std::size_t>(c[0]) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(c[1]) + static_cast<std::size_t>(dims_[1]) * c[2]);
  }

  // Visits cells in growing Chebyshev shells around the query cell until no
  // unvisited cell can hold a point closer than `bound()`.
  template <typename Visit, typename Bound>
  void visit_shells(const Point& q, Visit&& visit, Bound&& bound) const {
    if (points_.rows() == 0) return;
    const auto c = cell_coords(q);
    const int max_r = std::max({dims_[0], dims_[1], dims_[2]});
    for (int r = 0; r <= max_r; ++r) {
      for (int dz = -r; dz <= r; ++dz) {
        const int z = c[2] + dz;
        if (z < 0 || z >= dims_[2]) continue;
        for (int dy = -r; dy <= r; ++dy) {
          const int y = c[1] + dy;
          if (y < 0 || y >= dims_[1]) continue;
          const bool edge_yz = std::abs(dz) == r || std::abs(dy) == r;
          for (int dx = -r; dx <= r; dx += (edge_yz || r == 0) ? 1 : 2 * r) {
            const int x = c[0] + dx;
            if (x < 0 || x >= dims_[0]) continue;
            const std::size_t cell = flat({x, y, z});
            for (std::size_t s = starts_[cell]; s < starts_[cell + 1]; ++s) {
              const Eigen::Index i = items_[s];
              const Scalar dx = points_(i, 0) - q[0], dy = points_(i, 1) - q[1], dz = points_(i, 2) - q[2];
              visit(i, dx * dx + dy * dy + dz * dz);
            }
          }
        }
      }
      const Scalar reach = static_cast<Scalar>(r) * cell_;
      if (bound() < reach * reach) return;
    }
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, 3> points_;
  Point lo_ = Point::Zero();
  Scalar cell_ = 1;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> starts_;
  std::vector<Eigen::Index> items_;
};

}  // namespace cir
