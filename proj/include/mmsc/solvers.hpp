#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "mmsc/grid.hpp"

namespace mmsc {

/// Thrown by trajectory runners when a step produces non-finite values.
struct BlowupError : std::runtime_error {
  int step;
  explicit BlowupError(int step_)
      : std::runtime_error("solver blow-up at step " + std::to_string(step_)), step(step_) {}
};

// Explicit Euler in time, first-order upwind for advective terms and central
// second differences for diffusion, all with periodic wrap. Upwind direction
// is picked from the sign of the advecting velocity at the cell; a velocity
// of exactly zero takes the forward difference (the term vanishes anyway).
// Forcing, when given, is sampled at the step's start time and enters as
// + dt * forcing.
ScalarField1D step_burgers_1d(const ScalarField1D& psi, double nu, const GridSpec1D& grid,
                              const ScalarField1D* forcing = nullptr);
VectorField2D step_burgers_2d(const VectorField2D& field, double nu, const GridSpec2D& grid,
                              const VectorField2D* forcing = nullptr);
ScalarField2D step_advection_2d(const ScalarField2D& psi, const VectorField2D& velocity,
                                const GridSpec2D& grid, const ScalarField2D* forcing = nullptr);

using Forcing1D = std::function<ScalarField1D(double t)>;
using ForcingVec2D = std::function<VectorField2D(double t)>;
using Forcing2D = std::function<ScalarField2D(double t)>;

// Trajectory runners return snapshots[0..steps] with snapshots[0] = initial.
// Forcing providers are called with the start time of each step. Non-finite
// states raise BlowupError carrying the failing step index.
std::vector<ScalarField1D> run_trajectory_burgers_1d(const ScalarField1D& initial, double nu,
                                                     const GridSpec1D& grid, int steps,
                                                     const Forcing1D& forcing = {});
std::vector<VectorField2D> run_trajectory_burgers_2d(const VectorField2D& initial, double nu,
                                                     const GridSpec2D& grid, int steps,
                                                     const ForcingVec2D& forcing = {});
std::vector<ScalarField2D> run_trajectory_advection_2d(const ScalarField2D& initial,
                                                       const VectorField2D& velocity,
                                                       const GridSpec2D& grid, int steps,
                                                       const Forcing2D& forcing = {});

/// Advisory stability report: convective CFL = max |velocity| dt / dx summed
/// over axes, diffusion number = 2 nu dt sum(1/dx^2). Explicit upwind wants
/// convective CFL <= 1 and the diffusion number <= 0.5.
struct CflReport {
  double convective_cfl = 0.0;
  double diffusion_number = 0.0;
  bool stable = false;
};

CflReport cfl_check(const ScalarField1D& psi, double nu, const GridSpec1D& grid);
CflReport cfl_check(const VectorField2D& field, double nu, const GridSpec2D& grid);
CflReport cfl_check(const ScalarField2D& psi, const VectorField2D& velocity, const GridSpec2D& grid);

}  // namespace mmsc
