#pragma once

#include <span>
#include <string>
#include <vector>

namespace mmsc {

/// Uniform periodic grid on [0, 1). Cell centers sit at x_i = i * dx and
/// x = 1 is identified with x = 0, so manufactured solutions built from
/// integer multiples of 2*pi are exactly periodic on the grid.
struct GridSpec1D {
  int n_points = 0;
  double dx = 0.0;
  double dt = 0.0;

  static GridSpec1D make(int n_points, double dt);
  double x(int i) const { return i * dx; }
};

/// Square periodic domain [0,1) x [0,1).
struct GridSpec2D {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  double dt = 0.0;

  static GridSpec2D make(int nx, int ny, double dt);
  double x(int ix) const { return ix * dx; }
  double y(int iy) const { return iy * dy; }
};

struct ScalarField1D {
  std::vector<double> v;

  ScalarField1D() = default;
  explicit ScalarField1D(int n, double fill = 0.0) : v(static_cast<size_t>(n), fill) {}
  int size() const { return static_cast<int>(v.size()); }
};

/// Row-major scalar field: value at (ix, iy) is v[ix * ny + iy].
struct ScalarField2D {
  int nx = 0;
  int ny = 0;
  std::vector<double> v;

  ScalarField2D() = default;
  ScalarField2D(int nx_, int ny_, double fill = 0.0)
      : nx(nx_), ny(ny_), v(static_cast<size_t>(nx_) * ny_, fill) {}
  double& at(int ix, int iy) { return v[static_cast<size_t>(ix) * ny + iy]; }
  double at(int ix, int iy) const { return v[static_cast<size_t>(ix) * ny + iy]; }
};

/// Two-component field (u, v) sharing one grid.
struct VectorField2D {
  ScalarField2D u;
  ScalarField2D v;

  VectorField2D() = default;
  VectorField2D(int nx, int ny) : u(nx, ny), v(nx, ny) {}
};

/// Spatial extent of a channel stack: ny == 0 means a 1D row of nx cells.
struct FieldShape {
  int nx = 0;
  int ny = 0;

  bool is_2d() const { return ny > 0; }
  int cells() const { return is_2d() ? nx * ny : nx; }
  bool operator==(const FieldShape&) const = default;
};

/// Dense per-cell channel stack, data layout [channel][cell] with 2D cells
/// flattened row-major. Used for observations, actions and network tensors.
struct ChannelField {
  int channels = 0;
  FieldShape shape;
  std::vector<double> data;

  ChannelField() = default;
  ChannelField(int channels_, FieldShape shape_)
      : channels(channels_),
        shape(shape_),
        data(static_cast<size_t>(channels_) * shape_.cells(), 0.0) {}

  int cells() const { return shape.cells(); }
  double* channel(int c) { return data.data() + static_cast<size_t>(c) * cells(); }
  const double* channel(int c) const { return data.data() + static_cast<size_t>(c) * cells(); }
  std::span<const double> channel_view(int c) const { return {channel(c), static_cast<size_t>(cells())}; }
  std::span<double> channel_span(int c) { return {channel(c), static_cast<size_t>(cells())}; }
};

/// i mod n with a nonnegative result, for arbitrary signed i.
int periodic_index(long long i, int n);

/// Strided restriction: coarse[i] = fine[i * factor]. The fine length must be
/// divisible by the factor.
ScalarField1D subsample(const ScalarField1D& fine, int factor);
ScalarField2D subsample(const ScalarField2D& fine, int factor);
VectorField2D subsample(const VectorField2D& fine, int factor);

double mse(std::span<const double> a, std::span<const double> b);
double mae(std::span<const double> a, std::span<const double> b);
double mse(const ScalarField1D& a, const ScalarField1D& b);
double mae(const ScalarField1D& a, const ScalarField1D& b);
double mse(const ScalarField2D& a, const ScalarField2D& b);
double mae(const ScalarField2D& a, const ScalarField2D& b);
/// Vector fields average over both components (2 * nx * ny values).
double mse(const VectorField2D& a, const VectorField2D& b);
double mae(const VectorField2D& a, const VectorField2D& b);

std::vector<double> cumulative_error(std::span<const double> series);

bool all_finite(std::span<const double> values);

/// Flat CSV formats used by the eval harness: 1D is one value per line,
/// 2D writes the nx header line followed by row-major values.
void write_csv(const std::string& path, const ScalarField1D& field);
void write_csv(const std::string& path, const ScalarField2D& field);
ScalarField1D read_csv_1d(const std::string& path);
ScalarField2D read_csv_2d(const std::string& path);

}  // namespace mmsc
