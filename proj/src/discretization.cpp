// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/discretization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace nestedpt
{

Grid Grid::make(int nx, int nz, double h, int npml)
{
  if (nx < 1 || nz < 1)
  {
    throw ConfigError("grid needs at least one interior node per direction");
  }
  if (!(h > 0.0))
  {
    throw ConfigError("grid spacing must be positive");
  }
  if (npml < 0)
  {
    throw ConfigError("PML thickness must be non-negative");
  }
  return Grid{nx, nz, h, npml};
}

int default_npml(std::int64_t n_interior)
{
  const int lg = static_cast<int>(std::ceil(std::log2(std::max<double>(2.0, double(n_interior)))));
  return std::max(10, lg);
}

double default_pml_strength(double c_max) { return 1.5 * std::log(1e6) * c_max; }

double pml_ramp(double d, double delta, double C)
{
  if (d <= 0.0 || delta <= 0.0)
  {
    return 0.0;
  }
  const double r = d / delta;
  return C / delta * r * r;
}

double AxisProfile::sigma(double x) const
{
  if (x < left_edge)
  {
    return pml_ramp(left_edge - x, delta, C);
  }
  if (x > right_edge)
  {
    return pml_ramp(x - right_edge, delta, C);
  }
  return 0.0;
}

std::vector<double> make_pml_sigma(const Grid &grid, double C, Axis axis)
{
  const int last = axis == Axis::x ? grid.last_x() : grid.last_z();
  const double L = grid.length(axis), delta = grid.delta_pml();
  std::vector<double> s;
  s.reserve(std::size_t(last - grid.first() + 1));
  for (int p = grid.first(); p <= last; ++p)
  {
    const double x = p * grid.h;
    s.push_back(x < 0.0 ? pml_ramp(-x, delta, C) : pml_ramp(x - L, delta, C));
  }
  return s;
}

cplx make_alpha(double sigma, double omega) { return 1.0 / cplx(1.0, sigma / omega); }

// ---------------------------------------------------------------------------

VelocityModel::VelocityModel(Grid grid, std::vector<double> c, Sampler sampler)
  : grid_(grid), c_(std::move(c)), sampler_(std::move(sampler))
{
  if (std::int64_t(c_.size()) != grid_.extended_size())
  {
    throw ConfigError("velocity model has " + std::to_string(c_.size()) +
                      " values, extended grid needs " + std::to_string(grid_.extended_size()));
  }
  for (double v : c_)
  {
    if (!(v > 0.0) || !std::isfinite(v))
    {
      throw ConfigError("velocity model must be positive and finite everywhere");
    }
  }
}

VelocityModel VelocityModel::from_function(Grid grid, Sampler f)
{
  std::vector<double> c;
  c.reserve(std::size_t(grid.extended_size()));
  for (int q = grid.first(); q <= grid.last_z(); ++q)
  {
    for (int p = grid.first(); p <= grid.last_x(); ++p)
    {
      c.push_back(f(p * grid.h, q * grid.h));
    }
  }
  return VelocityModel(grid, std::move(c), std::move(f));
}

double VelocityModel::speed(int p, int q) const
{
  const int i = p - grid_.first(), j = q - grid_.first();
  return c_[std::size_t(j) * std::size_t(grid_.nxe()) + std::size_t(i)];
}

double VelocityModel::sample(double x, double z) const
{
  if (sampler_)
  {
    return sampler_(x, z);
  }
  // Bilinear interpolation, clamped to the extended node range.
  const double lo = grid_.first();
  const double px = std::clamp(x / grid_.h, lo, double(grid_.last_x()));
  const double qz = std::clamp(z / grid_.h, lo, double(grid_.last_z()));
  int p0 = std::min(int(std::floor(px)), grid_.last_x() - 1);
  int q0 = std::min(int(std::floor(qz)), grid_.last_z() - 1);
  p0 = std::max(p0, grid_.first());
  q0 = std::max(q0, grid_.first());
  const double s = std::clamp(px - p0, 0.0, 1.0), t = std::clamp(qz - q0, 0.0, 1.0);
  const int p1 = std::min(p0 + 1, grid_.last_x()), q1 = std::min(q0 + 1, grid_.last_z());
  return (1 - s) * (1 - t) * speed(p0, q0) + s * (1 - t) * speed(p1, q0) +
         (1 - s) * t * speed(p0, q1) + s * t * speed(p1, q1);
}

double VelocityModel::min_speed() const { return *std::min_element(c_.begin(), c_.end()); }
double VelocityModel::max_speed() const { return *std::max_element(c_.begin(), c_.end()); }

VelocityModel VelocityModel::with_npml(int npml) const
{
  const Grid g = Grid::make(grid_.nx, grid_.nz, grid_.h, npml);
  std::vector<double> c;
  c.reserve(std::size_t(g.extended_size()));
  for (int q = g.first(); q <= g.last_z(); ++q)
  {
    for (int p = g.first(); p <= g.last_x(); ++p)
    {
      c.push_back(speed(std::clamp(p, grid_.first(), grid_.last_x()),
                        std::clamp(q, grid_.first(), grid_.last_z())));
    }
  }
  return VelocityModel(g, std::move(c), sampler_);
}

// ---------------------------------------------------------------------------

Problem Problem::make(std::shared_ptr<const VelocityModel> model, double omega, Scheme scheme,
                      double pml_C)
{
  if (!model)
  {
    throw ConfigError("problem needs a velocity model");
  }
  if (!(omega > 0.0))
  {
    throw ConfigError("angular frequency must be positive");
  }
  Problem pb;
  pb.grid = model->grid();
  pb.model = std::move(model);
  pb.omega = omega;
  pb.scheme = scheme;
  pb.pml_C = pml_C > 0.0 ? pml_C : default_pml_strength(pb.model->max_speed());
  return pb;
}

Patch global_patch(const Problem &pb)
{
  const Grid &g = pb.grid;
  Patch pt;
  pt.x = AxisProfile{g.first(), g.last_x(), g.h, 0.0, g.length(Axis::x), g.delta_pml(), pb.pml_C};
  pt.z = AxisProfile{g.first(), g.last_z(), g.h, 0.0, g.length(Axis::z), g.delta_pml(), pb.pml_C};
  pt.depth_is_z = true;
  return pt;
}

SpMat assemble(const Problem &pb, const Patch &patch)
{
  return pb.scheme == Scheme::fd ? assemble_fd(pb, patch) : assemble_q1(pb, patch);
}

SpMat assemble_fd(const Problem &pb, const Patch &pt)
{
  const double h = pb.grid.h, ih2 = 1.0 / (h * h), w2 = pb.omega * pb.omega;
  const VelocityModel &model = *pb.model;
  auto ax = [&](double x) { return make_alpha(pt.x.sigma(x), pb.omega); };
  auto az = [&](double z) { return make_alpha(pt.z.sigma(z), pb.omega); };

  std::vector<Eigen::Triplet<cplx, int>> trip;
  trip.reserve(std::size_t(5 * pt.size()));
  for (int q = pt.z.first; q <= pt.z.last; ++q)
  {
    const cplx a0z = az(q * h), apz = az((q + 0.5) * h), amz = az((q - 0.5) * h);
    for (int p = pt.x.first; p <= pt.x.last; ++p)
    {
      const cplx a0x = ax(p * h), apx = ax((p + 0.5) * h), amx = ax((p - 0.5) * h);
      const int row = int(pt.index(p, q));
      // x and z parts are summed in a fixed order so that patches of either
      // orientation produce bit-identical coefficients.
      const cplx dx = a0x * (apx + amx) * ih2, dz = a0z * (apz + amz) * ih2;
      trip.emplace_back(row, row, (dx + dz) - w2 * model.slowness2(p, q));
      if (p > pt.x.first)
      {
        trip.emplace_back(row, int(pt.index(p - 1, q)), -a0x * amx * ih2);
      }
      if (p < pt.x.last)
      {
        trip.emplace_back(row, int(pt.index(p + 1, q)), -a0x * apx * ih2);
      }
      if (q > pt.z.first)
      {
        trip.emplace_back(row, int(pt.index(p, q - 1)), -a0z * amz * ih2);
      }
      if (q < pt.z.last)
      {
        trip.emplace_back(row, int(pt.index(p, q + 1)), -a0z * apz * ih2);
      }
    }
  }
  SpMat H(pt.size(), pt.size());
  H.setFromTriplets(trip.begin(), trip.end());
  H.makeCompressed();
  return H;
}

// --- Q1 ---------------------------------------------------------------------

namespace
{

using Mat4 = Eigen::Matrix<cplx, 4, 4>;

struct GaussRule
{
  std::vector<double> pts, wts;  // on [0, 1]
};

GaussRule gauss_rule(int n)
{
  switch (n)
  {
    case 1:
      return {{0.5}, {1.0}};
    case 2:
    {
      const double a = 0.5 / std::sqrt(3.0);
      return {{0.5 - a, 0.5 + a}, {0.5, 0.5}};
    }
    case 3:
    {
      const double a = 0.5 * std::sqrt(0.6);
      return {{0.5 - a, 0.5, 0.5 + a}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
    }
    default:
      throw ConfigError("Gauss rule with " + std::to_string(n) + " points is not available");
  }
}

// Bilinear shape functions on the unit square, nodes ordered
// (0,0), (1,0), (0,1), (1,1).
inline std::array<double, 4> shape(double s, double t)
{
  return {(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t};
}

class Q1Element
{
public:
  Q1Element(const Problem &pb, const Patch &pt) : pb_(pb), pt_(pt) {}

  Mat4 stiffness(int p, int q) const
  {
    const GaussRule g = gauss_rule(pb_.q1.stiffness_gauss);
    const double h = pb_.grid.h;
    Mat4 K = Mat4::Zero();
    for (std::size_t j = 0; j < g.pts.size(); ++j)
    {
      const double t = g.pts[j];
      const cplx az = make_alpha(pt_.z.sigma((q + t) * h), pb_.omega);
      for (std::size_t i = 0; i < g.pts.size(); ++i)
      {
        const double s = g.pts[i];
        const cplx ax = make_alpha(pt_.x.sigma((p + s) * h), pb_.omega);
        const cplx sx = ax / az, sz = az / ax;
        const double ds[4] = {-(1 - t), 1 - t, -t, t};
        const double dt[4] = {-(1 - s), -s, 1 - s, s};
        const double w = g.wts[i] * g.wts[j];
        for (int a = 0; a < 4; ++a)
        {
          for (int b = 0; b < 4; ++b)
          {
            K(a, b) += w * (sx * ds[a] * ds[b] + sz * dt[a] * dt[b]);
          }
        }
      }
    }
    return K;
  }

  bool discontinuous(int p, int q) const { return q1_element_discontinuous(pb_, p, q); }

  Mat4 mass(int p, int q) const
  {
    const Mat4 gauss = mass_gauss(p, q);
    if (!discontinuous(p, q))
    {
      return gauss;
    }
    return mass_adaptive(p, q, gauss.cwiseAbs().maxCoeff());
  }

private:
  // omega^2 m / (alpha_x alpha_z) at local coordinates (s, t), times h^2.
  cplx weight(int p, int q, double s, double t) const
  {
    const double h = pb_.grid.h;
    const double x = (p + s) * h, z = (q + t) * h;
    const double c = pb_.model->sample(x, z);
    const cplx a = make_alpha(pt_.x.sigma(x), pb_.omega) * make_alpha(pt_.z.sigma(z), pb_.omega);
    return pb_.omega * pb_.omega * h * h / (c * c) / a;
  }

  Mat4 point(int p, int q, double s, double t) const
  {
    const auto N = shape(s, t);
    const cplx w = weight(p, q, s, t);
    Mat4 F;
    for (int a = 0; a < 4; ++a)
    {
      for (int b = 0; b < 4; ++b)
      {
        F(a, b) = w * (N[a] * N[b]);
      }
    }
    return F;
  }

  Mat4 mass_gauss(int p, int q) const
  {
    const GaussRule g = gauss_rule(pb_.q1.mass_gauss);
    Mat4 M = Mat4::Zero();
    for (std::size_t j = 0; j < g.pts.size(); ++j)
    {
      for (std::size_t i = 0; i < g.pts.size(); ++i)
      {
        M += (g.wts[i] * g.wts[j]) * point(p, q, g.pts[i], g.pts[j]);
      }
    }
    return M;
  }

  // Adaptive tensor trapezoid with one Richardson step per cell, which is
  // the tensor Simpson rule on the cell's 3 x 3 samples. A cell is accepted
  // once the estimate over its four children moves by at most quad_tol
  // times the element scale.
  Mat4 mass_adaptive(int p, int q, double scale) const
  {
    const double tol = pb_.q1.quad_tol * std::max(scale, 1e-300);
    // Start from a 4x4 split so that small features are not skipped.
    constexpr int n0 = 4;
    constexpr int m = 2 * n0 + 1;
    std::vector<Mat4> F(std::size_t(m * m));
    for (int j = 0; j < m; ++j)
    {
      for (int i = 0; i < m; ++i)
      {
        F[std::size_t(j * m + i)] = point(p, q, double(i) / (m - 1), double(j) / (m - 1));
      }
    }
    Mat4 total = Mat4::Zero();
    for (int j = 0; j < n0; ++j)
    {
      for (int i = 0; i < n0; ++i)
      {
        Samples s;
        for (int b = 0; b < 3; ++b)
        {
          for (int a = 0; a < 3; ++a)
          {
            s[std::size_t(3 * b + a)] = F[std::size_t((2 * j + b) * m + 2 * i + a)];
          }
        }
        const double s0 = double(i) / n0, t0 = double(j) / n0;
        total += cell(p, q, s0, s0 + 1.0 / n0, t0, t0 + 1.0 / n0, s,
                      simpson(s, 1.0 / (n0 * n0)), tol, 2);
      }
    }
    return total;
  }

  // Row-major 3 x 3 samples at (s0, sm, s1) x (t0, tm, t1).
  using Samples = std::array<Mat4, 9>;

  static Mat4 simpson(const Samples &f, double area)
  {
    static constexpr double w[3] = {1.0, 4.0, 1.0};
    Mat4 acc = Mat4::Zero();
    for (int b = 0; b < 3; ++b)
    {
      for (int a = 0; a < 3; ++a)
      {
        acc += (w[a] * w[b]) * f[std::size_t(3 * b + a)];
      }
    }
    return (area / 36.0) * acc;
  }

  Mat4 cell(int p, int q, double s0, double s1, double t0, double t1, const Samples &f,
            const Mat4 &whole, double tol, int depth) const
  {
    // 5 x 5 samples of the children; even indices come from f.
    std::array<Mat4, 25> g;
    for (int j = 0; j < 5; ++j)
    {
      for (int i = 0; i < 5; ++i)
      {
        g[std::size_t(5 * j + i)] =
          (i % 2 == 0 && j % 2 == 0)
            ? f[std::size_t(3 * (j / 2) + i / 2)]
            : point(p, q, s0 + (s1 - s0) * i / 4.0, t0 + (t1 - t0) * j / 4.0);
      }
    }
    const double area = 0.25 * (s1 - s0) * (t1 - t0);
    std::array<Samples, 4> child;
    std::array<Mat4, 4> part;
    Mat4 sum = Mat4::Zero();
    for (int c = 0; c < 4; ++c)
    {
      const int ci = 2 * (c % 2), cj = 2 * (c / 2);
      for (int b = 0; b < 3; ++b)
      {
        for (int a = 0; a < 3; ++a)
        {
          child[std::size_t(c)][std::size_t(3 * b + a)] = g[std::size_t(5 * (cj + b) + ci + a)];
        }
      }
      part[std::size_t(c)] = simpson(child[std::size_t(c)], area);
      sum += part[std::size_t(c)];
    }
    if ((sum - whole).cwiseAbs().maxCoeff() <= tol)
    {
      return sum;
    }
    if (depth >= pb_.q1.max_depth)
    {
      char tol[32];
      std::snprintf(tol, sizeof tol, "%g", pb_.q1.quad_tol);
      throw NumericalError(std::string("Q1 adaptive quadrature did not reach tolerance ") + tol +
                           " within depth " +
                           std::to_string(pb_.q1.max_depth) + " on element (" +
                           std::to_string(p) + ", " + std::to_string(q) + ")");
    }
    const double sm = 0.5 * (s0 + s1), tm = 0.5 * (t0 + t1);
    return cell(p, q, s0, sm, t0, tm, child[0], part[0], tol, depth + 1) +
           cell(p, q, sm, s1, t0, tm, child[1], part[1], tol, depth + 1) +
           cell(p, q, s0, sm, tm, t1, child[2], part[2], tol, depth + 1) +
           cell(p, q, sm, s1, tm, t1, child[3], part[3], tol, depth + 1);
  }

  const Problem &pb_;
  const Patch &pt_;
};

}  // namespace

bool q1_element_discontinuous(const Problem &pb, int p, int q)
{
  const GaussRule g = gauss_rule(pb.q1.mass_gauss);
  const double h = pb.grid.h;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double t : g.pts)
  {
    for (double s : g.pts)
    {
      const double c = pb.model->sample((p + s) * h, (q + t) * h);
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  return hi / lo >= pb.q1.smoothness_threshold;
}

SpMat assemble_q1(const Problem &pb, const Patch &pt)
{
  if (!(pb.q1.smoothness_threshold > 1.0))
  {
    throw ConfigError("Q1 smoothness threshold must exceed 1");
  }
  const Q1Element el(pb, pt);
  std::vector<Eigen::Triplet<cplx, int>> trip;
  trip.reserve(std::size_t(16 * (pt.x.size() + 1) * (pt.z.size() + 1)));
  // Elements are visited in the same physical order for every patch so that
  // duplicate sums are accumulated identically.
  for (int q = pt.z.first - 1; q <= pt.z.last; ++q)
  {
    for (int p = pt.x.first - 1; p <= pt.x.last; ++p)
    {
      const Mat4 A = el.stiffness(p, q) - el.mass(p, q);
      const int nodes_p[4] = {p, p + 1, p, p + 1};
      const int nodes_q[4] = {q, q, q + 1, q + 1};
      for (int a = 0; a < 4; ++a)
      {
        if (!pt.contains(nodes_p[a], nodes_q[a]))
        {
          continue;
        }
        const int ia = int(pt.index(nodes_p[a], nodes_q[a]));
        for (int b = 0; b < 4; ++b)
        {
          if (pt.contains(nodes_p[b], nodes_q[b]))
          {
            trip.emplace_back(ia, int(pt.index(nodes_p[b], nodes_q[b])), A(a, b));
          }
        }
      }
    }
  }
  SpMat H(pt.size(), pt.size());
  H.setFromTriplets(trip.begin(), trip.end());
  H.makeCompressed();
  return H;
}

CVector project_rhs(const Problem &pb, const Patch &pt, const CVector &f)
{
  if (f.size() != pt.size())
  {
    throw ConfigError("right-hand side does not match the patch size");
  }
  if (pb.scheme == Scheme::fd)
  {
    return f;
  }
  const GaussRule g = gauss_rule(3);
  const double h = pb.grid.h;
  CVector b = CVector::Zero(pt.size());
  for (int q = pt.z.first - 1; q <= pt.z.last; ++q)
  {
    for (int p = pt.x.first - 1; p <= pt.x.last; ++p)
    {
      const int np[4] = {p, p + 1, p, p + 1};
      const int nq[4] = {q, q, q + 1, q + 1};
      cplx fv[4];
      bool any = false;
      for (int a = 0; a < 4; ++a)
      {
        fv[a] = pt.contains(np[a], nq[a]) ? f[pt.index(np[a], nq[a])] : cplx(0.0);
        any = any || fv[a] != cplx(0.0);
      }
      if (!any)
      {
        continue;
      }
      cplx loc[4] = {0.0, 0.0, 0.0, 0.0};
      for (std::size_t j = 0; j < g.pts.size(); ++j)
      {
        for (std::size_t i = 0; i < g.pts.size(); ++i)
        {
          const double s = g.pts[i], t = g.pts[j];
          const auto N = shape(s, t);
          const cplx fh = N[0] * fv[0] + N[1] * fv[1] + N[2] * fv[2] + N[3] * fv[3];
          const cplx a = make_alpha(pt.x.sigma((p + s) * h), pb.omega) *
                         make_alpha(pt.z.sigma((q + t) * h), pb.omega);
          const cplx v = g.wts[i] * g.wts[j] * h * h * fh / a;
          for (int k = 0; k < 4; ++k)
          {
            loc[k] += v * N[k];
          }
        }
      }
      for (int a = 0; a < 4; ++a)
      {
        if (pt.contains(np[a], nq[a]))
        {
          b[pt.index(np[a], nq[a])] += loc[a];
        }
      }
    }
  }
  return b;
}

double delta_scale(const Problem &pb)
{
  return pb.scheme == Scheme::fd ? 1.0 / (pb.grid.h * pb.grid.h) : 1.0;
}

CVector delta_source(const Problem &pb, const Patch &pt, int p, int q)
{
  if (!pt.contains(p, q))
  {
    throw ConfigError("point source at node (" + std::to_string(p) + ", " + std::to_string(q) +
                      ") lies outside the grid");
  }
  CVector d = CVector::Zero(pt.size());
  d[pt.index(p, q)] = delta_scale(pb);
  return d;
}

void copy_nodes(const Patch &from, const CVector &src, const Patch &to, CVector &dst, int p_lo,
                int p_hi, int q_lo, int q_hi)
{
  const int p0 = std::max({p_lo, from.x.first, to.x.first});
  const int p1 = std::min({p_hi, from.x.last, to.x.last});
  const int q0 = std::max({q_lo, from.z.first, to.z.first});
  const int q1 = std::min({q_hi, from.z.last, to.z.last});
  for (int q = q0; q <= q1; ++q)
  {
    for (int p = p0; p <= p1; ++p)
    {
      dst[to.index(p, q)] = src[from.index(p, q)];
    }
  }
}

}  // namespace nestedpt
