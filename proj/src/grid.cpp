#include "mmsc/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmsc {

GridSpec1D GridSpec1D::make(int n_points, double dt) {
  if (n_points < 4) throw std::invalid_argument("GridSpec1D: n_points must be >= 4");
  if (!(dt > 0.0)) throw std::invalid_argument("GridSpec1D: dt must be positive");
  GridSpec1D g;
  g.n_points = n_points;
  g.dx = 1.0 / n_points;
  g.dt = dt;
  return g;
}

GridSpec2D GridSpec2D::make(int nx, int ny, double dt) {
  if (nx < 4 || ny < 4) throw std::invalid_argument("GridSpec2D: nx, ny must be >= 4");
  if (!(dt > 0.0)) throw std::invalid_argument("GridSpec2D: dt must be positive");
  GridSpec2D g;
  g.nx = nx;
  g.ny = ny;
  g.dx = 1.0 / nx;
  g.dy = 1.0 / ny;
  g.dt = dt;
  return g;
}

int periodic_index(long long i, int n) {
  if (n < 1) throw std::invalid_argument("periodic_index: n must be >= 1");
  long long m = i % n;
  if (m < 0) m += n;
  return static_cast<int>(m);
}

ScalarField1D subsample(const ScalarField1D& fine, int factor) {
  if (factor < 1) throw std::invalid_argument("subsample: factor must be >= 1");
  if (fine.size() % factor != 0)
    throw std::invalid_argument("subsample: fine length not divisible by factor");
  ScalarField1D coarse(fine.size() / factor);
  for (int i = 0; i < coarse.size(); ++i) coarse.v[i] = fine.v[static_cast<size_t>(i) * factor];
  return coarse;
}

ScalarField2D subsample(const ScalarField2D& fine, int factor) {
  if (factor < 1) throw std::invalid_argument("subsample: factor must be >= 1");
  if (fine.nx % factor != 0 || fine.ny % factor != 0)
    throw std::invalid_argument("subsample: fine grid not divisible by factor");
  ScalarField2D coarse(fine.nx / factor, fine.ny / factor);
  for (int ix = 0; ix < coarse.nx; ++ix)
    for (int iy = 0; iy < coarse.ny; ++iy) coarse.at(ix, iy) = fine.at(ix * factor, iy * factor);
  return coarse;
}

VectorField2D subsample(const VectorField2D& fine, int factor) {
  VectorField2D coarse;
  coarse.u = subsample(fine.u, factor);
  coarse.v = subsample(fine.v, factor);
  return coarse;
}

namespace {

void require_same_size(size_t a, size_t b) {
  if (a != b) throw std::invalid_argument("field shape mismatch");
}

}  // namespace

double mse(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  if (a.empty()) throw std::invalid_argument("mse: empty fields");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double mae(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  if (a.empty()) throw std::invalid_argument("mae: empty fields");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double mse(const ScalarField1D& a, const ScalarField1D& b) { return mse(std::span(a.v), std::span(b.v)); }
double mae(const ScalarField1D& a, const ScalarField1D& b) { return mae(std::span(a.v), std::span(b.v)); }

double mse(const ScalarField2D& a, const ScalarField2D& b) {
  if (a.nx != b.nx || a.ny != b.ny) throw std::invalid_argument("field shape mismatch");
  return mse(std::span(a.v), std::span(b.v));
}

double mae(const ScalarField2D& a, const ScalarField2D& b) {
  if (a.nx != b.nx || a.ny != b.ny) throw std::invalid_argument("field shape mismatch");
  return mae(std::span(a.v), std::span(b.v));
}

double mse(const VectorField2D& a, const VectorField2D& b) {
  return 0.5 * (mse(a.u, b.u) + mse(a.v, b.v));
}

double mae(const VectorField2D& a, const VectorField2D& b) {
  return 0.5 * (mae(a.u, b.u) + mae(a.v, b.v));
}

std::vector<double> cumulative_error(std::span<const double> series) {
  if (series.empty()) throw std::invalid_argument("cumulative_error: empty series");
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    out[i] = acc;
  }
  return out;
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void write_value_lines(std::ofstream& out, std::span<const double> values) {
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  }
}

}  // namespace

void write_csv(const std::string& path, const ScalarField1D& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_value_lines(out, field.v);
}

void write_csv(const std::string& path, const ScalarField2D& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << field.nx << "\n";
  write_value_lines(out, field.v);
}

ScalarField1D read_csv_1d(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  ScalarField1D f;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    f.v.push_back(std::stod(line));
  }
  return f;
}

ScalarField2D read_csv_2d(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty 2d field file: " + path);
  int nx = std::stoi(line);
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    values.push_back(std::stod(line));
  }
  if (nx <= 0 || values.size() % static_cast<size_t>(nx) != 0)
    throw std::runtime_error("malformed 2d field file: " + path);
  ScalarField2D f(nx, static_cast<int>(values.size()) / nx);
  f.v = std::move(values);
  return f;
}

}  // namespace mmsc
