#include "fpdeconv/presmooth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "fpdeconv/curves.hpp"
#include "fpdeconv/errors.hpp"
#include "fpdeconv/parallel.hpp"
#include "fpdeconv/rng.hpp"

namespace fpd {

namespace {

inline double epanechnikov(double u) {
  const double a = std::abs(u);
  return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

/// One axis line: voxels sharing all other lattice coordinates, sorted by
/// position along the axis.
struct AxisLine {
  std::vector<double> x;    // mm
  std::vector<int> voxel;
};

std::vector<AxisLine> build_lines(const DynamicScan& scan, int axis) {
  std::unordered_map<long long, std::size_t> line_of;
  std::vector<AxisLine> lines;
  const auto& lat = scan.lattice;
  for (int i = 0; i < scan.n_voxels(); ++i) {
    if (!scan.mask[static_cast<std::size_t>(i)]) continue;
    const auto& p = lat.pos[static_cast<std::size_t>(i)];
    long long key = 0;
    for (int a = 0; a < lat.ndim; ++a) {
      if (a == axis) continue;
      key = key * 1000003LL + (p[static_cast<std::size_t>(a)] + 500000LL);
    }
    auto [it, fresh] = line_of.try_emplace(key, lines.size());
    if (fresh) lines.emplace_back();
    AxisLine& ln = lines[it->second];
    ln.x.push_back(p[static_cast<std::size_t>(axis)] *
                   lat.spacing_mm[static_cast<std::size_t>(axis)]);
    ln.voxel.push_back(i);
  }
  for (auto& ln : lines) {
    std::vector<std::size_t> order(ln.x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ln.x[a] < ln.x[b]; });
    AxisLine sorted;
    sorted.x.reserve(ln.x.size());
    sorted.voxel.reserve(ln.x.size());
    for (auto k : order) {
      sorted.x.push_back(ln.x[k]);
      sorted.voxel.push_back(ln.voxel[k]);
    }
    ln = std::move(sorted);
  }
  return lines;
}

/// Kernel window around x0 over sorted xs, enlarged until it holds at least
/// two distinct support points (or the whole line).
struct Window {
  std::size_t lo = 0, hi = 0;  // half-open index range
  std::vector<double> w;
  double s0 = 0, s1 = 0, s2 = 0;  // weighted moments of (x - x0)
  bool enlarged = false;
  bool degenerate = false;  // fewer than two distinct points on the line
};

Window make_window(const std::vector<double>& xs, double x0, double h) {
  Window win;
  const std::size_t n = xs.size();
  double span = xs.back() - xs.front();
  for (int pass = 0;; ++pass) {
    win.lo = static_cast<std::size_t>(
        std::lower_bound(xs.begin(), xs.end(), x0 - h) - xs.begin());
    win.hi = static_cast<std::size_t>(
        std::upper_bound(xs.begin(), xs.end(), x0 + h) - xs.begin());
    std::size_t distinct = 0;
    double last = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = win.lo; k < win.hi; ++k) {
      if (epanechnikov((xs[k] - x0) / h) <= 0.0) continue;
      if (xs[k] != last) {
        ++distinct;
        last = xs[k];
      }
    }
    if (distinct >= 2) break;
    if (h > 2.0 * span + 1.0 && win.hi - win.lo == n) {
      win.degenerate = true;
      break;
    }
    h *= 1.5;
    win.enlarged = true;
  }
  win.w.resize(win.hi - win.lo);
  for (std::size_t k = win.lo; k < win.hi; ++k) {
    const double d = xs[k] - x0;
    const double wk = epanechnikov(d / h);
    win.w[k - win.lo] = wk;
    win.s0 += wk;
    win.s1 += wk * d;
    win.s2 += wk * d * d;
  }
  return win;
}

/// Local-linear intercept given a precomputed window.
template <typename Getter>
double intercept(const Window& win, const std::vector<double>& xs, double x0,
                 Getter value) {
  double t0 = 0.0, t1 = 0.0;
  for (std::size_t k = win.lo; k < win.hi; ++k) {
    const double wk = win.w[k - win.lo];
    if (wk <= 0.0) continue;
    const double y = value(k);
    t0 += wk * y;
    t1 += wk * (xs[k] - x0) * y;
  }
  const double denom = win.s0 * win.s2 - win.s1 * win.s1;
  if (win.degenerate || denom <= 0.0)
    return win.s0 > 0.0 ? t0 / win.s0 : 0.0;
  return (win.s2 * t0 - win.s1 * t1) / denom;
}

}  // namespace

double BandwidthProfile::time_bandwidth(double t) const {
  const double u = t / t_scale;
  double v = poly[4];
  for (int k = 3; k >= 0; --k) v = v * u + poly[static_cast<std::size_t>(k)];
  return clamp_floor > 0.0 ? std::max(v, clamp_floor) : v;
}

double BandwidthProfile::effective_time_bandwidth(double t) const {
  return beta * time_bandwidth(t);
}

void BandwidthProfile::validate(double tau) const {
  if (!(beta > 0.0)) throw ValidationError("BandwidthProfile: beta must be > 0");
  if (!(h_space_mm >= 0.0))
    throw ValidationError("BandwidthProfile: negative spatial bandwidth");
  for (int k = 0; k < 1000; ++k) {
    const double t = tau * (k + 0.5) / 1000.0;
    if (!(effective_time_bandwidth(t) > 0.0))
      throw ValidationError("BandwidthProfile: bandwidth not positive at t=" +
                            std::to_string(t));
  }
}

BandwidthProfile fit_time_bandwidth_profile(const TimeGrid& grid, int n_b,
                                            int min_obs) {
  grid.validate();
  const int p = static_cast<int>(grid.frames());
  if (n_b < 5)
    throw ValidationError("fit_time_bandwidth_profile: need at least 5 anchors "
                          "for a quartic fit");
  if (n_b > p)
    throw ValidationError("fit_time_bandwidth_profile: more anchors than frames");
  if (min_obs < 2 || min_obs > p)
    throw ValidationError("fit_time_bandwidth_profile: bad min_obs");

  const auto& t = grid.frame_mid;
  BandwidthProfile prof;
  prof.t_scale = grid.tau();
  prof.anchors.reserve(static_cast<std::size_t>(n_b));

  std::vector<double> dist(static_cast<std::size_t>(p));
  for (int i = 0; i < n_b; ++i) {
    const int idx = static_cast<int>(
        std::lround(static_cast<double>(i) * (p - 1) / (n_b - 1)));
    const double ti = t[static_cast<std::size_t>(idx)];
    for (int j = 0; j < p; ++j)
      dist[static_cast<std::size_t>(j)] = std::abs(t[static_cast<std::size_t>(j)] - ti);
    std::nth_element(dist.begin(), dist.begin() + (min_obs - 1), dist.end());
    double h = dist[static_cast<std::size_t>(min_obs - 1)];
    // boundary correction near t=0: keep the radius away from zero so the
    // fitted polynomial stays positive at the left edge
    if (idx < min_obs)
      h = std::max(h, std::abs(t[static_cast<std::size_t>(min_obs - 1)] - ti));
    prof.anchors.emplace_back(ti, h);
  }

  Eigen::MatrixXd design(n_b, 5);
  Eigen::VectorXd rhs(n_b);
  for (int i = 0; i < n_b; ++i) {
    const double u = prof.anchors[static_cast<std::size_t>(i)].first / prof.t_scale;
    double up = 1.0;
    for (int k = 0; k < 5; ++k) {
      design(i, k) = up;
      up *= u;
    }
    rhs(i) = prof.anchors[static_cast<std::size_t>(i)].second;
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
  for (int k = 0; k < 5; ++k) prof.poly[static_cast<std::size_t>(k)] = coef(k);

  double poly_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 1000; ++k)
    poly_min = std::min(poly_min, prof.time_bandwidth(grid.tau() * k / 1000.0));
  if (poly_min <= 0.0) {
    double h_min = std::numeric_limits<double>::infinity();
    for (const auto& a : prof.anchors) h_min = std::min(h_min, a.second);
    prof.clamp_floor = 0.5 * h_min;
  }
  return prof;
}

namespace {

std::vector<int> sample_masked_voxels(const DynamicScan& scan, int n_cv,
                                      std::uint64_t seed) {
  std::vector<int> rows;
  for (int i = 0; i < scan.n_voxels(); ++i)
    if (scan.mask[static_cast<std::size_t>(i)]) rows.push_back(i);
  if (rows.empty()) throw ValidationError("cross-validation: empty mask");
  if (n_cv <= 0 || static_cast<std::size_t>(n_cv) >= rows.size()) return rows;
  Rng rng(seed, 0x5bc1);
  for (int k = 0; k < n_cv; ++k) {
    const std::size_t j =
        k + static_cast<std::size_t>(rng.below(rows.size() - static_cast<std::size_t>(k)));
    std::swap(rows[static_cast<std::size_t>(k)], rows[j]);
  }
  rows.resize(static_cast<std::size_t>(n_cv));
  return rows;
}

}  // namespace

double calibrate_beta_cv(const DynamicScan& scan, const BandwidthProfile& profile,
                         std::span<const double> beta_grid, int n_cv_voxels,
                         std::uint64_t seed) {
  if (beta_grid.empty())
    throw ValidationError("calibrate_beta_cv: empty beta grid");
  const auto rows = sample_masked_voxels(scan, n_cv_voxels, seed);
  const int p = static_cast<int>(scan.frames());
  if (p < 3) throw ValidationError("calibrate_beta_cv: too few frames");
  const auto& t = scan.grid.frame_mid;

  std::vector<double> betas(beta_grid.begin(), beta_grid.end());
  std::sort(betas.begin(), betas.end());

  double best_beta = betas.front();
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<double> xs(t.begin(), t.end());
  for (const double beta : betas) {
    if (!(beta > 0.0)) throw ValidationError("calibrate_beta_cv: beta <= 0");
    // windows depend only on the left-out frame, not the voxel
    double err = 0.0;
    for (int j = 0; j < p; ++j) {
      std::vector<double> xs_loo;
      std::vector<int> cols;
      xs_loo.reserve(static_cast<std::size_t>(p - 1));
      cols.reserve(static_cast<std::size_t>(p - 1));
      for (int k = 0; k < p; ++k)
        if (k != j) {
          xs_loo.push_back(t[static_cast<std::size_t>(k)]);
          cols.push_back(k);
        }
      const double x0 = t[static_cast<std::size_t>(j)];
      const Window win =
          make_window(xs_loo, x0, beta * profile.time_bandwidth(x0));
      for (const int row : rows) {
        const double pred = intercept(win, xs_loo, x0, [&](std::size_t k) {
          return scan.values(row, cols[k]);
        });
        const double d = pred - scan.values(row, j);
        err += d * d;
      }
    }
    if (err < best_err) {
      best_err = err;
      best_beta = beta;
    }
  }
  return best_beta;
}

namespace {

/// Dense lattice box index for neighbor queries.
struct BoxIndex {
  std::array<int, 3> lo{}, hi{};  // inclusive bounds
  std::array<int, 3> dim{};
  std::vector<int> cell;  // voxel row or -1

  explicit BoxIndex(const DynamicScan& scan) {
    const auto& lat = scan.lattice;
    lo = {INT32_MAX, INT32_MAX, INT32_MAX};
    hi = {INT32_MIN, INT32_MIN, INT32_MIN};
    for (int i = 0; i < scan.n_voxels(); ++i) {
      if (!scan.mask[static_cast<std::size_t>(i)]) continue;
      for (int a = 0; a < 3; ++a) {
        lo[static_cast<std::size_t>(a)] =
            std::min(lo[static_cast<std::size_t>(a)], lat.pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]);
        hi[static_cast<std::size_t>(a)] =
            std::max(hi[static_cast<std::size_t>(a)], lat.pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]);
      }
    }
    for (int a = 0; a < 3; ++a)
      dim[static_cast<std::size_t>(a)] =
          hi[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)] + 1;
    cell.assign(static_cast<std::size_t>(dim[0]) * dim[1] * dim[2], -1);
    for (int i = 0; i < scan.n_voxels(); ++i) {
      if (!scan.mask[static_cast<std::size_t>(i)]) continue;
      cell[flat(scan.lattice.pos[static_cast<std::size_t>(i)])] = i;
    }
  }

  std::size_t flat(const std::array<int, 3>& p) const {
    const std::size_t x = static_cast<std::size_t>(p[0] - lo[0]);
    const std::size_t y = static_cast<std::size_t>(p[1] - lo[1]);
    const std::size_t z = static_cast<std::size_t>(p[2] - lo[2]);
    return (z * static_cast<std::size_t>(dim[1]) + y) * static_cast<std::size_t>(dim[0]) + x;
  }

  int at(int x, int y, int z) const {
    if (x < lo[0] || x > hi[0] || y < lo[1] || y > hi[1] || z < lo[2] || z > hi[2])
      return -1;
    return cell[flat({x, y, z})];
  }
};

}  // namespace

double calibrate_hspace_cv(const DynamicScan& scan,
                           std::span<const double> h_grid_mm, int n_cv_voxels,
                           std::uint64_t seed) {
  if (h_grid_mm.empty())
    throw ValidationError("calibrate_hspace_cv: empty bandwidth grid");
  if (scan.lattice.ndim < 1)
    throw ValidationError("calibrate_hspace_cv: scan has no spatial structure");
  const auto rows = sample_masked_voxels(scan, n_cv_voxels, seed ^ 0x9e1du);
  const int nd = scan.lattice.ndim;
  const BoxIndex box(scan);
  const auto& sp = scan.lattice.spacing_mm;

  std::vector<double> hs(h_grid_mm.begin(), h_grid_mm.end());
  std::sort(hs.begin(), hs.end());

  double best_h = hs.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (const double h : hs) {
    if (!(h > 0.0)) throw ValidationError("calibrate_hspace_cv: h <= 0");
    double err = 0.0;
    for (const int i : rows) {
      const auto& pi = scan.lattice.pos[static_cast<std::size_t>(i)];
      double hh = h;
      for (int attempt = 0; attempt < 40; ++attempt) {
        // neighbors within the product-kernel box, excluding the voxel itself
        std::vector<int> nb;
        std::vector<double> w;
        std::array<int, 3> r{0, 0, 0};
        for (int a = 0; a < nd; ++a)
          r[static_cast<std::size_t>(a)] = static_cast<int>(
              std::floor(hh / sp[static_cast<std::size_t>(a)]));
        for (int dz = -r[2]; dz <= r[2]; ++dz)
          for (int dy = -r[1]; dy <= r[1]; ++dy)
            for (int dx = -r[0]; dx <= r[0]; ++dx) {
              if (dx == 0 && dy == 0 && dz == 0) continue;
              const int k = box.at(pi[0] + dx, pi[1] + dy, pi[2] + dz);
              if (k < 0) continue;
              double wk = epanechnikov(dx * sp[0] / hh);
              if (nd > 1) wk *= epanechnikov(dy * sp[1] / hh);
              if (nd > 2) wk *= epanechnikov(dz * sp[2] / hh);
              if (wk <= 0.0) continue;
              nb.push_back(k);
              w.push_back(wk);
            }
        if (static_cast<int>(nb.size()) < nd + 1) {
          hh *= 1.5;
          continue;
        }
        Eigen::MatrixXd design(static_cast<Eigen::Index>(nb.size()), nd + 1);
        for (std::size_t q = 0; q < nb.size(); ++q) {
          const auto& pk = scan.lattice.pos[static_cast<std::size_t>(nb[q])];
          design(static_cast<Eigen::Index>(q), 0) = 1.0;
          for (int a = 0; a < nd; ++a)
            design(static_cast<Eigen::Index>(q), a + 1) =
                (pk[static_cast<std::size_t>(a)] - pi[static_cast<std::size_t>(a)]) *
                sp[static_cast<std::size_t>(a)];
        }
        Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(nd + 1, nd + 1);
        Eigen::VectorXd atb_base = Eigen::VectorXd::Zero(nd + 1);
        // accumulate per frame below; normal matrix shared across frames
        for (std::size_t q = 0; q < nb.size(); ++q)
          ata.noalias() += w[q] * design.row(static_cast<Eigen::Index>(q)).transpose() *
                           design.row(static_cast<Eigen::Index>(q));
        Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
          hh *= 1.5;
          continue;
        }
        for (int j = 0; j < scan.frames(); ++j) {
          Eigen::VectorXd atb = atb_base;
          for (std::size_t q = 0; q < nb.size(); ++q)
            atb.noalias() += w[q] * scan.values(nb[q], j) *
                             design.row(static_cast<Eigen::Index>(q)).transpose();
          const double pred = ldlt.solve(atb)(0);
          const double d = pred - scan.values(i, j);
          err += d * d;
        }
        break;
      }
    }
    if (err < best_err) {
      best_err = err;
      best_h = h;
    }
  }
  return best_h;
}

namespace {

Eigen::MatrixXd spatial_pass(const DynamicScan& scan, const Eigen::MatrixXd& in,
                             int axis, double h, int threads,
                             std::atomic<long>& enlarged) {
  Eigen::MatrixXd out = in;
  const auto lines = build_lines(scan, axis);
  const int p = static_cast<int>(in.cols());
  parallel_for(lines.size(), threads, [&](std::size_t li) {
    const AxisLine& ln = lines[li];
    long local_enlarged = 0;
    for (std::size_t q = 0; q < ln.x.size(); ++q) {
      const Window win = make_window(ln.x, ln.x[q], h);
      if (win.enlarged) ++local_enlarged;
      for (int j = 0; j < p; ++j)
        out(ln.voxel[q], j) = intercept(win, ln.x, ln.x[q], [&](std::size_t k) {
          return in(ln.voxel[k], j);
        });
    }
    if (local_enlarged) enlarged.fetch_add(local_enlarged);
  }, 4);
  return out;
}

}  // namespace

SmoothedScan smooth_scan(const DynamicScan& scan, const BandwidthProfile& profile,
                         int threads) {
  scan.validate();
  profile.validate(scan.grid.tau());
  const int p = static_cast<int>(scan.frames());
  if (p < 2) throw ValidationError("smooth_scan: need at least 2 frames");

  std::atomic<long> enlarged{0};
  Eigen::MatrixXd work = scan.values;
  if (profile.h_space_mm > 0.0 && scan.lattice.ndim > 0)
    for (int axis = 0; axis < scan.lattice.ndim; ++axis)
      work = spatial_pass(scan, work, axis, profile.h_space_mm, threads, enlarged);

  // time pass: windows depend only on the target frame
  const auto& t = scan.grid.frame_mid;
  const std::vector<double> xs(t.begin(), t.end());
  std::vector<Window> wins;
  wins.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    wins.push_back(make_window(xs, xs[static_cast<std::size_t>(j)],
                               profile.effective_time_bandwidth(xs[static_cast<std::size_t>(j)])));
    if (wins.back().enlarged) enlarged.fetch_add(1);
  }
  Eigen::MatrixXd smoothed(scan.n_voxels(), p);
  parallel_for(static_cast<std::size_t>(scan.n_voxels()), threads, [&](std::size_t i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    if (!scan.mask[i]) {
      smoothed.row(row) = work.row(row);
      return;
    }
    for (int j = 0; j < p; ++j)
      smoothed(row, j) = intercept(wins[static_cast<std::size_t>(j)], xs,
                                   xs[static_cast<std::size_t>(j)],
                                   [&](std::size_t k) {
                                     return work(row, static_cast<int>(k));
                                   });
  });

  SmoothedScan result;
  result.c_hat = decay_correct(smoothed, scan.grid, scan.decay_lambda);
  result.profile = profile;
  result.grid = scan.grid;
  result.diag.enlarged_windows = enlarged.load();
  for (Eigen::Index i = 0; i < result.c_hat.rows(); ++i)
    if (scan.mask[static_cast<std::size_t>(i)])
      for (Eigen::Index j = 0; j < result.c_hat.cols(); ++j)
        if (!std::isfinite(result.c_hat(i, j)))
          throw NumericError("smooth_scan: non-finite smoothed value");
  return result;
}

SmoothedScan smooth_scan_product_kernel(const DynamicScan& scan,
                                        const BandwidthProfile& profile) {
  scan.validate();
  profile.validate(scan.grid.tau());
  const int nd = scan.lattice.ndim;
  const int p = static_cast<int>(scan.frames());
  const auto& t = scan.grid.frame_mid;
  const auto& sp = scan.lattice.spacing_mm;
  const BoxIndex box(scan);
  const bool spatial = profile.h_space_mm > 0.0 && nd > 0;
  const int nparam = (spatial ? nd : 0) + 2;

  Eigen::MatrixXd smoothed = scan.values;
  for (int i = 0; i < scan.n_voxels(); ++i) {
    if (!scan.mask[static_cast<std::size_t>(i)]) continue;
    const auto& pi = scan.lattice.pos[static_cast<std::size_t>(i)];
    for (int j = 0; j < p; ++j) {
      const double t0 = t[static_cast<std::size_t>(j)];
      double hs = spatial ? profile.h_space_mm : 0.0;
      double ht = profile.effective_time_bandwidth(t0);
      for (int attempt = 0;; ++attempt) {
        std::vector<int> nb_voxel;
        std::vector<double> nb_wx;
        if (spatial) {
          std::array<int, 3> r{0, 0, 0};
          for (int a = 0; a < nd; ++a)
            r[static_cast<std::size_t>(a)] =
                static_cast<int>(std::floor(hs / sp[static_cast<std::size_t>(a)]));
          for (int dz = -r[2]; dz <= r[2]; ++dz)
            for (int dy = -r[1]; dy <= r[1]; ++dy)
              for (int dx = -r[0]; dx <= r[0]; ++dx) {
                const int k = box.at(pi[0] + dx, pi[1] + dy, pi[2] + dz);
                if (k < 0) continue;
                double wk = epanechnikov(dx * sp[0] / hs);
                if (nd > 1) wk *= epanechnikov(dy * sp[1] / hs);
                if (nd > 2) wk *= epanechnikov(dz * sp[2] / hs);
                if (wk <= 0.0) continue;
                nb_voxel.push_back(k);
                nb_wx.push_back(wk);
              }
        } else {
          nb_voxel.push_back(i);
          nb_wx.push_back(1.0);
        }
        Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(nparam, nparam);
        Eigen::VectorXd atb = Eigen::VectorXd::Zero(nparam);
        Eigen::VectorXd row(nparam);
        for (std::size_t q = 0; q < nb_voxel.size(); ++q) {
          const auto& pk = scan.lattice.pos[static_cast<std::size_t>(nb_voxel[q])];
          for (int l = 0; l < p; ++l) {
            const double wt = epanechnikov((t[static_cast<std::size_t>(l)] - t0) / ht);
            if (wt <= 0.0) continue;
            const double w = nb_wx[q] * wt;
            row(0) = 1.0;
            int c = 1;
            if (spatial)
              for (int a = 0; a < nd; ++a)
                row(c++) = (pk[static_cast<std::size_t>(a)] - pi[static_cast<std::size_t>(a)]) *
                           sp[static_cast<std::size_t>(a)];
            row(c) = t[static_cast<std::size_t>(l)] - t0;
            ata.noalias() += w * row * row.transpose();
            atb.noalias() += w * scan.values(nb_voxel[q], l) * row;
          }
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
        const Eigen::VectorXd sol = ldlt.solve(atb);
        const double resid = (ata * sol - atb).norm();
        if (ldlt.info() == Eigen::Success && ata(0, 0) > 0.0 &&
            resid <= 1e-8 * (1.0 + atb.norm())) {
          smoothed(i, j) = sol(0);
          break;
        }
        if (attempt > 60) throw NumericError("smooth_scan_product_kernel: singular fit");
        hs *= 1.5;
        ht *= 1.5;
      }
    }
  }

  SmoothedScan result;
  result.c_hat = decay_correct(smoothed, scan.grid, scan.decay_lambda);
  result.profile = profile;
  result.grid = scan.grid;
  return result;
}

}  // namespace fpd
