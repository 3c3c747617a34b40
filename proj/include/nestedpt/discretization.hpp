// SPDX-License-Identifier: Apache-2.0
//
// Grids, PML profiles, velocity models and the discrete Helmholtz operators
// (5-point finite differences and Q1 finite elements).
//
// Node numbering. Physical nodes are p = 1..nx and q = 1..nz with coordinates
// (p h, q h). The extended grid adds npml nodes per side, so p runs over
// 1-npml .. nx+npml. Homogeneous Dirichlet conditions hold one node further
// out. The damping profile vanishes on [0, (nx+1) h] and grows quadratically
// outside.

#ifndef NESTEDPT_DISCRETIZATION_HPP
#define NESTEDPT_DISCRETIZATION_HPP

#include <functional>
#include <memory>
#include <vector>

#include "nestedpt/types.hpp"

namespace nestedpt
{

enum class Axis
{
  x,
  z
};

enum class Scheme
{
  fd,
  q1
};

struct Grid
{
  int nx = 0, nz = 0;
  double h = 0.0;
  int npml = 0;

  static Grid make(int nx, int nz, double h, int npml);

  int nxe() const { return nx + 2 * npml; }
  int nze() const { return nz + 2 * npml; }
  int first() const { return 1 - npml; }
  int last_x() const { return nx + npml; }
  int last_z() const { return nz + npml; }
  double delta_pml() const { return npml * h; }
  // Coordinate of the far edge of the physical domain along an axis.
  double length(Axis a) const { return ((a == Axis::x ? nx : nz) + 1) * h; }
  std::int64_t interior_size() const { return std::int64_t(nx) * nz; }
  std::int64_t extended_size() const { return std::int64_t(nxe()) * nze(); }
};

/// Default PML thickness, max(10, ceil(log2 N)).
int default_npml(std::int64_t n_interior);

/// Default absorption strength. The quadratic ramp integrates to C/3, so a
/// normally incident wave at speed c_max returns attenuated by
/// exp(-2 C / (3 c_max)); C is chosen to make that 1e-6.
double default_pml_strength(double c_max);

/// Quadratic damping C/delta (d/delta)^2 at distance d past the edge.
double pml_ramp(double d, double delta, double C);

/// Samples of sigma at the extended nodes of one axis.
std::vector<double> make_pml_sigma(const Grid &grid, double C, Axis axis);

/// Complex stretching factor 1 / (1 + i sigma / omega).
cplx make_alpha(double sigma, double omega);

/// Damping along one axis of a (sub)domain. Nodes first..last are unknowns,
/// sigma vanishes on [left_edge, right_edge] and ramps outside.
struct AxisProfile
{
  int first = 1, last = 0;
  double h = 1.0;
  double left_edge = 0.0, right_edge = 0.0;
  double delta = 0.0, C = 0.0;

  int size() const { return last - first + 1; }
  double coord(int node) const { return node * h; }
  double sigma(double x) const;
};

/// Wave speed on the extended grid plus a point sampler used by quadrature.
class VelocityModel
{
public:
  using Sampler = std::function<double(double x, double z)>;

  /// Nodal speeds in z-major order over the extended grid. Without a
  /// sampler, point values are bilinear interpolants of the nodes.
  VelocityModel(Grid grid, std::vector<double> c, Sampler sampler = {});

  /// Model defined by a continuous function, sampled at the nodes.
  static VelocityModel from_function(Grid grid, Sampler f);

  const Grid &grid() const { return grid_; }
  const std::vector<double> &speeds() const { return c_; }
  double speed(int p, int q) const;
  double slowness2(int p, int q) const
  {
    const double c = speed(p, q);
    return 1.0 / (c * c);
  }
  double sample(double x, double z) const;
  double min_speed() const;
  double max_speed() const;
  bool has_exact_sampler() const { return bool(sampler_); }

  /// Same physical model on a grid with a different PML thickness. Nodes
  /// outside the old extended grid copy the nearest old node.
  VelocityModel with_npml(int npml) const;

private:
  Grid grid_;
  std::vector<double> c_;
  Sampler sampler_;
};

struct Q1Options
{
  double smoothness_threshold = 1.05;
  double quad_tol = 1e-8;
  int max_depth = 14;
  int stiffness_gauss = 2;  // points per direction
  int mass_gauss = 3;
};

/// Everything that determines a discrete operator except the patch.
struct Problem
{
  Grid grid;
  std::shared_ptr<const VelocityModel> model;
  double omega = 1.0;
  double pml_C = 1.0;
  Scheme scheme = Scheme::fd;
  Q1Options q1;

  static Problem make(std::shared_ptr<const VelocityModel> model, double omega,
                      Scheme scheme = Scheme::fd, double pml_C = 0.0);
};

/// Rectangular block of nodes with its own damping profiles. Unknowns are
/// stored depth-major: index = depth_offset * row_size + row_offset. With
/// depth_is_z the rows are horizontal; otherwise the roles are swapped.
struct Patch
{
  AxisProfile x, z;
  bool depth_is_z = true;

  const AxisProfile &depth() const { return depth_is_z ? z : x; }
  const AxisProfile &row() const { return depth_is_z ? x : z; }
  Index row_size() const { return row().size(); }
  Index depth_size() const { return depth().size(); }
  Index size() const { return row_size() * depth_size(); }
  bool contains(int p, int q) const
  {
    return p >= x.first && p <= x.last && q >= z.first && q <= z.last;
  }
  Index index(int p, int q) const
  {
    return depth_is_z ? Index(q - z.first) * x.size() + (p - x.first)
                      : Index(p - x.first) * z.size() + (q - z.first);
  }
  /// Storage index from (depth node, row node).
  Index index_dr(int d, int r) const { return depth_is_z ? index(r, d) : index(d, r); }
  Patch swapped() const
  {
    Patch s = *this;
    s.depth_is_z = !depth_is_z;
    return s;
  }
};

/// The full extended domain in the standard (horizontal row) orientation.
Patch global_patch(const Problem &pb);

/// Discrete Helmholtz operator on a patch.
SpMat assemble(const Problem &pb, const Patch &patch);
SpMat assemble_fd(const Problem &pb, const Patch &patch);
SpMat assemble_q1(const Problem &pb, const Patch &patch);

/// Right-hand side for nodal source values on the patch. Identity for FD,
/// Galerkin projection of f / (alpha_x alpha_z) for Q1.
CVector project_rhs(const Problem &pb, const Patch &patch, const CVector &f);

/// Discrete point source at node (p, q): 1/h^2 for FD, unit load for Q1.
CVector delta_source(const Problem &pb, const Patch &patch, int p, int q);
/// Scale of delta_source relative to a unit vector.
double delta_scale(const Problem &pb);

/// True when the velocity ratio over the element's mass quadrature points is
/// at least the threshold, meaning the adaptive rule is used.
bool q1_element_discontinuous(const Problem &pb, int p, int q);

/// Transfer node values between two patches of the same problem. Nodes of
/// `to` outside `from` (or outside the node window) are left untouched.
void copy_nodes(const Patch &from, const CVector &src, const Patch &to, CVector &dst, int p_lo,
                int p_hi, int q_lo, int q_hi);

}  // namespace nestedpt

#endif  // NESTEDPT_DISCRETIZATION_HPP
