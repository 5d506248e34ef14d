#include "mmsc/solvers.hpp"

#include <cmath>

namespace mmsc {

ScalarField1D step_burgers_1d(const ScalarField1D& psi, double nu, const GridSpec1D& grid,
                              const ScalarField1D* forcing) {
  const int n = grid.n_points;
  if (psi.size() != n) throw std::invalid_argument("step_burgers_1d: field size mismatch");
  if (forcing && forcing->size() != n) throw std::invalid_argument("step_burgers_1d: forcing size mismatch");

  ScalarField1D out(n);
  const double* p = psi.v.data();
  const double inv_dx = 1.0 / grid.dx;
  const double inv_dx2 = inv_dx * inv_dx;
  const double dt = grid.dt;

  for (int i = 0; i < n; ++i) {
    const double pm = p[i > 0 ? i - 1 : n - 1];
    const double pp = p[i + 1 < n ? i + 1 : 0];
    const double pc = p[i];
    const double upwind = pc > 0.0 ? (pc - pm) * inv_dx : (pp - pc) * inv_dx;
    const double lap = (pp - 2.0 * pc + pm) * inv_dx2;
    double next = pc + dt * (-pc * upwind + nu * lap);
    if (forcing) next += dt * forcing->v[i];
    out.v[i] = next;
  }
  return out;
}

namespace {

// Upwind x/y derivatives of `field` at (ix, iy) given the local advecting
// velocities. Periodic neighbors are resolved by the caller-passed indices.
struct Stencil2D {
  double c, xm, xp, ym, yp;
};

inline Stencil2D gather(const ScalarField2D& f, int ix, int iy, int ixm, int ixp, int iym, int iyp) {
  return {f.at(ix, iy), f.at(ixm, iy), f.at(ixp, iy), f.at(ix, iym), f.at(ix, iyp)};
}

inline double upwind_x(const Stencil2D& s, double vel, double inv_dx) {
  return vel > 0.0 ? (s.c - s.xm) * inv_dx : (s.xp - s.c) * inv_dx;
}

inline double upwind_y(const Stencil2D& s, double vel, double inv_dy) {
  return vel > 0.0 ? (s.c - s.ym) * inv_dy : (s.yp - s.c) * inv_dy;
}

inline double laplacian(const Stencil2D& s, double inv_dx2, double inv_dy2) {
  return (s.xp - 2.0 * s.c + s.xm) * inv_dx2 + (s.yp - 2.0 * s.c + s.ym) * inv_dy2;
}

}  // namespace

VectorField2D step_burgers_2d(const VectorField2D& field, double nu, const GridSpec2D& grid,
                              const VectorField2D* forcing) {
  const int nx = grid.nx, ny = grid.ny;
  if (field.u.nx != nx || field.u.ny != ny || field.v.nx != nx || field.v.ny != ny)
    throw std::invalid_argument("step_burgers_2d: field size mismatch");

  VectorField2D out(nx, ny);
  const double inv_dx = 1.0 / grid.dx, inv_dy = 1.0 / grid.dy;
  const double inv_dx2 = inv_dx * inv_dx, inv_dy2 = inv_dy * inv_dy;
  const double dt = grid.dt;

  for (int ix = 0; ix < nx; ++ix) {
    const int ixm = ix > 0 ? ix - 1 : nx - 1;
    const int ixp = ix + 1 < nx ? ix + 1 : 0;
    for (int iy = 0; iy < ny; ++iy) {
      const int iym = iy > 0 ? iy - 1 : ny - 1;
      const int iyp = iy + 1 < ny ? iy + 1 : 0;
      const double uc = field.u.at(ix, iy);
      const double vc = field.v.at(ix, iy);

      const Stencil2D su = gather(field.u, ix, iy, ixm, ixp, iym, iyp);
      const Stencil2D sv = gather(field.v, ix, iy, ixm, ixp, iym, iyp);

      double du = -uc * upwind_x(su, uc, inv_dx) - vc * upwind_y(su, vc, inv_dy) +
                  nu * laplacian(su, inv_dx2, inv_dy2);
      double dv = -uc * upwind_x(sv, uc, inv_dx) - vc * upwind_y(sv, vc, inv_dy) +
                  nu * laplacian(sv, inv_dx2, inv_dy2);
      if (forcing) {
        du += forcing->u.at(ix, iy);
        dv += forcing->v.at(ix, iy);
      }
      out.u.at(ix, iy) = uc + dt * du;
      out.v.at(ix, iy) = vc + dt * dv;
    }
  }
  return out;
}

ScalarField2D step_advection_2d(const ScalarField2D& psi, const VectorField2D& velocity,
                                const GridSpec2D& grid, const ScalarField2D* forcing) {
  const int nx = grid.nx, ny = grid.ny;
  if (psi.nx != nx || psi.ny != ny) throw std::invalid_argument("step_advection_2d: field size mismatch");
  if (velocity.u.nx != nx || velocity.u.ny != ny)
    throw std::invalid_argument("step_advection_2d: velocity size mismatch");

  ScalarField2D out(nx, ny);
  const double inv_dx = 1.0 / grid.dx, inv_dy = 1.0 / grid.dy;
  const double dt = grid.dt;

  for (int ix = 0; ix < nx; ++ix) {
    const int ixm = ix > 0 ? ix - 1 : nx - 1;
    const int ixp = ix + 1 < nx ? ix + 1 : 0;
    for (int iy = 0; iy < ny; ++iy) {
      const int iym = iy > 0 ? iy - 1 : ny - 1;
      const int iyp = iy + 1 < ny ? iy + 1 : 0;
      const double uc = velocity.u.at(ix, iy);
      const double vc = velocity.v.at(ix, iy);
      const Stencil2D s = gather(psi, ix, iy, ixm, ixp, iym, iyp);

      double dpsi = -uc * upwind_x(s, uc, inv_dx) - vc * upwind_y(s, vc, inv_dy);
      if (forcing) dpsi += forcing->at(ix, iy);
      out.at(ix, iy) = s.c + dt * dpsi;
    }
  }
  return out;
}

std::vector<ScalarField1D> run_trajectory_burgers_1d(const ScalarField1D& initial, double nu,
                                                     const GridSpec1D& grid, int steps,
                                                     const Forcing1D& forcing) {
  if (steps < 1) throw std::invalid_argument("run_trajectory: steps must be >= 1");
  std::vector<ScalarField1D> snaps;
  snaps.reserve(steps + 1);
  snaps.push_back(initial);
  for (int k = 0; k < steps; ++k) {
    double t = k * grid.dt;
    ScalarField1D next;
    if (forcing) {
      ScalarField1D f = forcing(t);
      next = step_burgers_1d(snaps.back(), nu, grid, &f);
    } else {
      next = step_burgers_1d(snaps.back(), nu, grid);
    }
    if (!all_finite(next.v)) throw BlowupError(k + 1);
    snaps.push_back(std::move(next));
  }
  return snaps;
}

std::vector<VectorField2D> run_trajectory_burgers_2d(const VectorField2D& initial, double nu,
                                                     const GridSpec2D& grid, int steps,
                                                     const ForcingVec2D& forcing) {
  if (steps < 1) throw std::invalid_argument("run_trajectory: steps must be >= 1");
  std::vector<VectorField2D> snaps;
  snaps.reserve(steps + 1);
  snaps.push_back(initial);
  for (int k = 0; k < steps; ++k) {
    double t = k * grid.dt;
    VectorField2D next;
    if (forcing) {
      VectorField2D f = forcing(t);
      next = step_burgers_2d(snaps.back(), nu, grid, &f);
    } else {
      next = step_burgers_2d(snaps.back(), nu, grid);
    }
    if (!all_finite(next.u.v) || !all_finite(next.v.v)) throw BlowupError(k + 1);
    snaps.push_back(std::move(next));
  }
  return snaps;
}

std::vector<ScalarField2D> run_trajectory_advection_2d(const ScalarField2D& initial,
                                                       const VectorField2D& velocity,
                                                       const GridSpec2D& grid, int steps,
                                                       const Forcing2D& forcing) {
  if (steps < 1) throw std::invalid_argument("run_trajectory: steps must be >= 1");
  std::vector<ScalarField2D> snaps;
  snaps.reserve(steps + 1);
  snaps.push_back(initial);
  for (int k = 0; k < steps; ++k) {
    double t = k * grid.dt;
    ScalarField2D next;
    if (forcing) {
      ScalarField2D f = forcing(t);
      next = step_advection_2d(snaps.back(), velocity, grid, &f);
    } else {
      next = step_advection_2d(snaps.back(), velocity, grid);
    }
    if (!all_finite(next.v)) throw BlowupError(k + 1);
    snaps.push_back(std::move(next));
  }
  return snaps;
}

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

CflReport make_report(double convective, double diffusive) {
  CflReport r;
  r.convective_cfl = convective;
  r.diffusion_number = diffusive;
  r.stable = convective <= 1.0 && diffusive <= 0.5;
  return r;
}

}  // namespace

CflReport cfl_check(const ScalarField1D& psi, double nu, const GridSpec1D& grid) {
  double conv = max_abs(psi.v) * grid.dt / grid.dx;
  double diff = 2.0 * nu * grid.dt / (grid.dx * grid.dx);
  return make_report(conv, diff);
}

CflReport cfl_check(const VectorField2D& field, double nu, const GridSpec2D& grid) {
  double conv = 0.0;
  for (size_t i = 0; i < field.u.v.size(); ++i)
    conv = std::max(conv, std::abs(field.u.v[i]) * grid.dt / grid.dx +
                              std::abs(field.v.v[i]) * grid.dt / grid.dy);
  double diff = 2.0 * nu * grid.dt * (1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy));
  return make_report(conv, diff);
}

CflReport cfl_check(const ScalarField2D& psi, const VectorField2D& velocity, const GridSpec2D& grid) {
  if (psi.nx != velocity.u.nx || psi.ny != velocity.u.ny)
    throw std::invalid_argument("cfl_check: shape mismatch");
  double conv = 0.0;
  for (size_t i = 0; i < velocity.u.v.size(); ++i)
    conv = std::max(conv, std::abs(velocity.u.v[i]) * grid.dt / grid.dx +
                              std::abs(velocity.v.v[i]) * grid.dt / grid.dy);
  return make_report(conv, 0.0);
}

}  // namespace mmsc
