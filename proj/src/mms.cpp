#include "mmsc/mms.hpp"

#include <cmath>
#include <numbers>

namespace mmsc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double draw_wavenumber(Rng& rng) { return rng.uniform_int(2) == 0 ? kTwoPi : 2.0 * kTwoPi; }

}  // namespace

Mms1DBurgers sample_1d_burgers(Rng& rng) {
  Mms1DBurgers s;
  s.A = rng.uniform();
  s.B = rng.uniform();
  s.a = draw_wavenumber(rng);
  s.b = draw_wavenumber(rng);
  s.c = rng.uniform(0.1, 2.0);
  s.delta = rng.uniform(-2.0, 2.0);
  return s;
}

Mms2DBurgers sample_2d_burgers(Rng& rng) {
  Mms2DBurgers s;
  s.Au = rng.uniform();
  s.Bu = rng.uniform();
  s.Cu = rng.uniform();
  s.Du = rng.uniform();
  s.Av = rng.uniform();
  s.Bv = rng.uniform();
  s.Cv = rng.uniform();
  s.Dv = rng.uniform();
  s.z_diff_u = rng.uniform(0.1, 3.0);
  s.z_diff_v = rng.uniform(0.1, 3.0);
  return s;
}

Mms2DAdvection sample_2d_advection(Rng& rng) {
  Mms2DAdvection s;
  s.A = rng.uniform();
  s.B = rng.uniform();
  s.C = rng.uniform();
  s.D = rng.uniform();
  s.a = draw_wavenumber(rng);
  s.b = draw_wavenumber(rng);
  s.c = draw_wavenumber(rng);
  s.d = draw_wavenumber(rng);
  s.e = draw_wavenumber(rng);
  s.f = draw_wavenumber(rng);
  s.g = draw_wavenumber(rng);
  s.h = draw_wavenumber(rng);
  s.alpha = rng.uniform(-1.0, 1.0);
  s.beta = rng.uniform(-1.0, 1.0);
  return s;
}

double eval_solution_1d(const Mms1DBurgers& s, double x, double t) {
  double decay = std::exp(-s.c * t);
  return decay * (s.A * std::sin(s.a * x - s.delta * t) + s.B * std::cos(s.b * x - s.delta * t));
}

double eval_forcing_1d(const Mms1DBurgers& s, double nu, double x, double t) {
  double decay = std::exp(-s.c * t);
  double sa = std::sin(s.a * x - s.delta * t);
  double ca = std::cos(s.a * x - s.delta * t);
  double sb = std::sin(s.b * x - s.delta * t);
  double cb = std::cos(s.b * x - s.delta * t);

  double psi = decay * (s.A * sa + s.B * cb);
  double psi_t = -s.c * psi + decay * s.delta * (-s.A * ca + s.B * sb);
  double psi_x = decay * (s.A * s.a * ca - s.B * s.b * sb);
  double psi_xx = decay * (-s.A * s.a * s.a * sa - s.B * s.b * s.b * cb);
  return psi_t + psi * psi_x - nu * psi_xx;
}

namespace {

struct Trig2D {
  double sx, cx, sy, cy;
};

Trig2D trig_2pi(double x, double y) {
  return {std::sin(kTwoPi * x), std::cos(kTwoPi * x), std::sin(kTwoPi * y), std::cos(kTwoPi * y)};
}

double component_2d(double A, double B, double C, double D, const Trig2D& t) {
  return A * t.sx * t.sy + B * t.cx * t.sy + C * t.sx * t.cy + D * t.cx * t.cy;
}

double component_2d_dx(double A, double B, double C, double D, const Trig2D& t) {
  return kTwoPi * (A * t.cx * t.sy - B * t.sx * t.sy + C * t.cx * t.cy - D * t.sx * t.cy);
}

double component_2d_dy(double A, double B, double C, double D, const Trig2D& t) {
  return kTwoPi * (A * t.sx * t.cy + B * t.cx * t.cy - C * t.sx * t.sy - D * t.cx * t.sy);
}

}  // namespace

UV eval_solution_2d_burgers(const Mms2DBurgers& s, double x, double y, double t) {
  Trig2D tr = trig_2pi(x, y);
  double eu = std::exp(-s.z_diff_u * t);
  double ev = std::exp(-s.z_diff_v * t);
  return {eu * component_2d(s.Au, s.Bu, s.Cu, s.Du, tr),
          ev * component_2d(s.Av, s.Bv, s.Cv, s.Dv, tr)};
}

UV eval_forcing_2d_burgers(const Mms2DBurgers& s, double nu, double x, double y, double t) {
  Trig2D tr = trig_2pi(x, y);
  double eu = std::exp(-s.z_diff_u * t);
  double ev = std::exp(-s.z_diff_v * t);

  double u = eu * component_2d(s.Au, s.Bu, s.Cu, s.Du, tr);
  double v = ev * component_2d(s.Av, s.Bv, s.Cv, s.Dv, tr);
  double u_x = eu * component_2d_dx(s.Au, s.Bu, s.Cu, s.Du, tr);
  double u_y = eu * component_2d_dy(s.Au, s.Bu, s.Cu, s.Du, tr);
  double v_x = ev * component_2d_dx(s.Av, s.Bv, s.Cv, s.Dv, tr);
  double v_y = ev * component_2d_dy(s.Av, s.Bv, s.Cv, s.Dv, tr);

  // Every term is sin/cos of 2*pi x times sin/cos of 2*pi y, so the Laplacian
  // is -2 (2*pi)^2 times the component itself.
  double lap_coeff = -2.0 * kTwoPi * kTwoPi;
  double fu = -s.z_diff_u * u + u * u_x + v * u_y - nu * lap_coeff * u;
  double fv = -s.z_diff_v * v + u * v_x + v * v_y - nu * lap_coeff * v;
  return {fu, fv};
}

double eval_solution_2d_advection(const Mms2DAdvection& s, double x, double y, double /*t*/) {
  return s.A * std::sin(s.a * x) * std::sin(s.b * y) + s.B * std::cos(s.c * x) * std::sin(s.d * y) +
         s.C * std::sin(s.e * x) * std::cos(s.f * y) + s.D * std::cos(s.g * x) * std::cos(s.h * y);
}

double eval_forcing_2d_advection(const Mms2DAdvection& s, double x, double y) {
  double psi_x = s.A * s.a * std::cos(s.a * x) * std::sin(s.b * y) -
                 s.B * s.c * std::sin(s.c * x) * std::sin(s.d * y) +
                 s.C * s.e * std::cos(s.e * x) * std::cos(s.f * y) -
                 s.D * s.g * std::sin(s.g * x) * std::cos(s.h * y);
  double psi_y = s.A * s.b * std::sin(s.a * x) * std::cos(s.b * y) +
                 s.B * s.d * std::cos(s.c * x) * std::cos(s.d * y) -
                 s.C * s.f * std::sin(s.e * x) * std::sin(s.f * y) -
                 s.D * s.h * std::cos(s.g * x) * std::sin(s.h * y);
  // The solution is steady, so the residual is purely advective.
  return advection_u(s, x) * psi_x + advection_v(s, y) * psi_y;
}

double advection_u(const Mms2DAdvection& s, double x) { return x + s.alpha; }
double advection_v(const Mms2DAdvection& s, double y) { return y + s.beta; }

VectorField2D advection_velocity_field(const Mms2DAdvection& s, const GridSpec2D& grid) {
  VectorField2D vel(grid.nx, grid.ny);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy) {
      vel.u.at(ix, iy) = advection_u(s, grid.x(ix));
      vel.v.at(ix, iy) = advection_v(s, grid.y(iy));
    }
  return vel;
}

ScalarField1D solution_field(const Mms1DBurgers& s, const GridSpec1D& grid, double t) {
  ScalarField1D f(grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) f.v[i] = eval_solution_1d(s, grid.x(i), t);
  return f;
}

ScalarField1D forcing_field(const Mms1DBurgers& s, double nu, const GridSpec1D& grid, double t) {
  ScalarField1D f(grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) f.v[i] = eval_forcing_1d(s, nu, grid.x(i), t);
  return f;
}

VectorField2D solution_field(const Mms2DBurgers& s, const GridSpec2D& grid, double t) {
  VectorField2D f(grid.nx, grid.ny);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy) {
      UV uv = eval_solution_2d_burgers(s, grid.x(ix), grid.y(iy), t);
      f.u.at(ix, iy) = uv.u;
      f.v.at(ix, iy) = uv.v;
    }
  return f;
}

VectorField2D forcing_field(const Mms2DBurgers& s, double nu, const GridSpec2D& grid, double t) {
  VectorField2D f(grid.nx, grid.ny);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy) {
      UV uv = eval_forcing_2d_burgers(s, nu, grid.x(ix), grid.y(iy), t);
      f.u.at(ix, iy) = uv.u;
      f.v.at(ix, iy) = uv.v;
    }
  return f;
}

ScalarField2D solution_field(const Mms2DAdvection& s, const GridSpec2D& grid) {
  ScalarField2D f(grid.nx, grid.ny);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy) f.at(ix, iy) = eval_solution_2d_advection(s, grid.x(ix), grid.y(iy));
  return f;
}

ScalarField2D forcing_field(const Mms2DAdvection& s, const GridSpec2D& grid) {
  ScalarField2D f(grid.nx, grid.ny);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy) f.at(ix, iy) = eval_forcing_2d_advection(s, grid.x(ix), grid.y(iy));
  return f;
}

double toy_solution(double x, double t) { return t * std::cos(x); }

double toy_forcing(double nu, double x, double t) {
  return std::cos(x) - t * t * std::cos(x) * std::sin(x) + nu * t * std::cos(x);
}

namespace {

// 4th-order central first and second derivative stencils.
template <typename F>
double fd_d1(const F& f, double v, double h) {
  return (-f(v + 2 * h) + 8 * f(v + h) - 8 * f(v - h) + f(v - 2 * h)) / (12 * h);
}

template <typename F>
double fd_d2(const F& f, double v, double h) {
  return (-f(v + 2 * h) + 16 * f(v + h) - 30 * f(v) + 16 * f(v - h) - f(v - 2 * h)) / (12 * h * h);
}

}  // namespace

double fd_residual_1d(const Mms1DBurgers& s, double nu, double x, double t, double h) {
  auto in_t = [&](double tt) { return eval_solution_1d(s, x, tt); };
  auto in_x = [&](double xx) { return eval_solution_1d(s, xx, t); };
  double psi = eval_solution_1d(s, x, t);
  return fd_d1(in_t, t, h) + psi * fd_d1(in_x, x, h) - nu * fd_d2(in_x, x, h);
}

UV fd_residual_2d_burgers(const Mms2DBurgers& s, double nu, double x, double y, double t, double h) {
  auto u_of = [&](double xx, double yy, double tt) { return eval_solution_2d_burgers(s, xx, yy, tt).u; };
  auto v_of = [&](double xx, double yy, double tt) { return eval_solution_2d_burgers(s, xx, yy, tt).v; };

  double u = u_of(x, y, t);
  double v = v_of(x, y, t);

  auto u_t = fd_d1([&](double tt) { return u_of(x, y, tt); }, t, h);
  auto u_x = fd_d1([&](double xx) { return u_of(xx, y, t); }, x, h);
  auto u_y = fd_d1([&](double yy) { return u_of(x, yy, t); }, y, h);
  auto u_xx = fd_d2([&](double xx) { return u_of(xx, y, t); }, x, h);
  auto u_yy = fd_d2([&](double yy) { return u_of(x, yy, t); }, y, h);

  auto v_t = fd_d1([&](double tt) { return v_of(x, y, tt); }, t, h);
  auto v_x = fd_d1([&](double xx) { return v_of(xx, y, t); }, x, h);
  auto v_y = fd_d1([&](double yy) { return v_of(x, yy, t); }, y, h);
  auto v_xx = fd_d2([&](double xx) { return v_of(xx, y, t); }, x, h);
  auto v_yy = fd_d2([&](double yy) { return v_of(x, yy, t); }, y, h);

  return {u_t + u * u_x + v * u_y - nu * (u_xx + u_yy),
          v_t + u * v_x + v * v_y - nu * (v_xx + v_yy)};
}

double fd_residual_2d_advection(const Mms2DAdvection& s, double x, double y, double h) {
  auto psi_x = fd_d1([&](double xx) { return eval_solution_2d_advection(s, xx, y); }, x, h);
  auto psi_y = fd_d1([&](double yy) { return eval_solution_2d_advection(s, x, yy); }, y, h);
  return advection_u(s, x) * psi_x + advection_v(s, y) * psi_y;
}

ResidualReport residual_check_1d(double nu, int tuples, Rng& rng) {
  ResidualReport rep;
  rep.samples = tuples;
  for (int i = 0; i < tuples; ++i) {
    Mms1DBurgers s = sample_1d_burgers(rng);
    double x = rng.uniform();
    double t = rng.uniform();
    double err = std::abs(eval_forcing_1d(s, nu, x, t) - fd_residual_1d(s, nu, x, t));
    rep.max_abs_error = std::max(rep.max_abs_error, err);
  }
  return rep;
}

ResidualReport residual_check_2d_burgers(double nu, int tuples, Rng& rng) {
  ResidualReport rep;
  rep.samples = tuples;
  for (int i = 0; i < tuples; ++i) {
    Mms2DBurgers s = sample_2d_burgers(rng);
    double x = rng.uniform();
    double y = rng.uniform();
    double t = rng.uniform();
    UV closed = eval_forcing_2d_burgers(s, nu, x, y, t);
    UV fd = fd_residual_2d_burgers(s, nu, x, y, t);
    rep.max_abs_error = std::max({rep.max_abs_error, std::abs(closed.u - fd.u), std::abs(closed.v - fd.v)});
  }
  return rep;
}

ResidualReport residual_check_2d_advection(int tuples, Rng& rng) {
  ResidualReport rep;
  rep.samples = tuples;
  for (int i = 0; i < tuples; ++i) {
    Mms2DAdvection s = sample_2d_advection(rng);
    double x = rng.uniform();
    double y = rng.uniform();
    double err = std::abs(eval_forcing_2d_advection(s, x, y) - fd_residual_2d_advection(s, x, y));
    rep.max_abs_error = std::max(rep.max_abs_error, err);
  }
  return rep;
}

}  // namespace mmsc
