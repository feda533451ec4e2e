#include "mot3d/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mot3d/errors.hpp"

namespace mot3d {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct DualSolution {
  std::vector<double> u;       // row potentials, 1-based
  std::vector<double> v;       // column potentials, 1-based
  std::vector<std::size_t> p;  // p[j] = row matched to column j, 1-based, 0 = none
};

// O(n^3) shortest augmenting path with potentials on a square matrix.
DualSolution solve_square(const Eigen::MatrixXd& a) {
  const std::size_t n = static_cast<std::size_t>(a.rows());
  DualSolution s{std::vector<double>(n + 1, 0.0), std::vector<double>(n + 1, 0.0),
                 std::vector<std::size_t>(n + 1, 0)};
  std::vector<std::size_t> way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    s.p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = s.p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           s.u[i0] - s.v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          s.u[s.p[j]] += delta;
          s.v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (s.p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      s.p[j0] = s.p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return s;
}

// Rewrites an optimal matching into the lexicographically smallest optimal matching.
//
// With optimal potentials fixed, a perfect matching is optimal iff every edge is tight
// (reduced cost ~ 0). Rows are fixed in order; row i is moved to the lowest tight column j
// for which an alternating path over unfixed rows frees j while rematching column col[i].
class TightGraphRefiner {
 public:
  TightGraphRefiner(const Eigen::MatrixXd& a, const DualSolution& dual, double tol)
      : n_(static_cast<std::size_t>(a.rows())), tight_(n_ * n_, 0), col_of_(n_), row_of_(n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double reduced = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                               dual.u[i + 1] - dual.v[j + 1];
        tight_[i * n_ + j] = reduced <= tol ? 1 : 0;
      }
    }
    for (std::size_t j = 1; j <= n_; ++j) {
      col_of_[dual.p[j] - 1] = j - 1;
      row_of_[j - 1] = dual.p[j] - 1;
    }
  }

  std::vector<std::size_t> run() {
    fixed_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < col_of_[i]; ++j) {
        if (!tight_[i * n_ + j]) continue;
        const std::size_t owner = row_of_[j];
        if (fixed_[owner]) continue;
        // Need owner to reach column col_of_[i] via alternating tight edges, avoiding row i.
        visited_.assign(n_, 0);
        visited_[j] = 1;  // j is reserved for row i
        fixed_[i] = 1;
        const std::size_t target = col_of_[i];
        const bool ok = augment(owner, target);
        fixed_[i] = 0;
        if (ok) {
          col_of_[i] = j;
          row_of_[j] = i;
          break;
        }
      }
      fixed_[i] = 1;
    }
    return col_of_;
  }

 private:
  // Re-matches `row` to some column so that `target` ends up covered; rows already fixed stay.
  bool augment(std::size_t row, std::size_t target) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (!tight_[row * n_ + j] || visited_[j] || j == col_of_[row]) continue;
      visited_[j] = 1;
      if (j == target) {
        col_of_[row] = j;
        row_of_[j] = row;
        return true;
      }
      const std::size_t next = row_of_[j];
      if (fixed_[next]) continue;
      if (augment(next, target)) {
        col_of_[row] = j;
        row_of_[j] = row;
        return true;
      }
    }
    return false;
  }

  std::size_t n_;
  std::vector<char> tight_;
  std::vector<std::size_t> col_of_;
  std::vector<std::size_t> row_of_;
  std::vector<char> fixed_;
  std::vector<char> visited_;
};

}  // namespace

AffinityMatrix build_affinity(std::span<const Box3D> trajectories, std::span<const Box3D> detections,
                              AffinityMode mode, DistanceMode distance_mode) {
  AffinityMatrix m;
  m.mode = mode;
  m.values.resize(static_cast<Eigen::Index>(trajectories.size()),
                  static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          mode == AffinityMode::IoU ? iou_3d(trajectories[i], detections[j])
                                    : -center_distance(trajectories[i], detections[j], distance_mode);
    }
  }
  return m;
}

std::vector<IndexPair> hungarian(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw InvalidArgument("hungarian: cost matrix has non-finite entries");
  const auto rows = static_cast<std::size_t>(cost.rows());
  const auto cols = static_cast<std::size_t>(cost.cols());
  if (rows == 0 || cols == 0) return {};

  const std::size_t n = std::max(rows, cols);
  const double lo = cost.minCoeff();
  const double hi = cost.maxCoeff();
  // Shift so all entries are >= 0; padding sits strictly above every real entry.
  Eigen::MatrixXd square = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n),
                                                     static_cast<Eigen::Index>(n), hi - lo + 1.0);
  square.topLeftCorner(cost.rows(), cost.cols()) = cost.array() - lo;

  const DualSolution dual = solve_square(square);
  const double tol = 1e-9 * std::max(1.0, square.cwiseAbs().maxCoeff());
  const std::vector<std::size_t> col_of = TightGraphRefiner(square, dual, tol).run();

  std::vector<IndexPair> out;
  out.reserve(std::min(rows, cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (col_of[i] < cols) out.emplace_back(i, col_of[i]);
  }
  return out;
}

double assignment_cost(const Eigen::MatrixXd& cost, std::span<const IndexPair> pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return total;
}

AssociationResult associate(const AffinityMatrix& affinity, double gate) {
  AssociationResult result;
  const std::size_t rows = affinity.rows();
  const std::size_t cols = affinity.cols();
  std::vector<char> row_used(rows, 0);
  std::vector<char> col_used(cols, 0);

  for (const auto& [r, c] : hungarian(-affinity.values)) {
    const double a = affinity.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    const bool pass = affinity.mode == AffinityMode::IoU ? a >= gate : -a <= gate;
    if (!pass) continue;
    result.matches.emplace_back(r, c);
    row_used[r] = 1;
    col_used[c] = 1;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (!row_used[r]) result.unmatched_trajectories.push_back(r);
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (!col_used[c]) result.unmatched_detections.push_back(c);
  }
  return result;
}

}  // namespace mot3d
