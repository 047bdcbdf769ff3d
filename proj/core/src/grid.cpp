#include "nhkpm/grid.hpp"

#include <algorithm>
#include <cmath>

namespace nhkpm {

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw InvalidArgument("axis needs at least one node");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + step * i;
  out.back() = hi;
  return out;
}

ComplexGrid ComplexGrid::uniform(double re_lo, double re_hi, int n_re, double im_lo, double im_hi,
                                 int n_im) {
  ComplexGrid g{linspace(re_lo, re_hi, n_re), linspace(im_lo, im_hi, n_im)};
  g.validate();
  return g;
}

std::vector<cplx> ComplexGrid::nodes() const {
  std::vector<cplx> out;
  out.reserve(size());
  for (double y : im)
    for (double x : re) out.emplace_back(x, y);
  return out;
}

double ComplexGrid::max_abs() const {
  double m = 0.0;
  for (double x : {re.front(), re.back()})
    for (double y : {im.front(), im.back()}) m = std::max(m, std::hypot(x, y));
  return m;
}

void ComplexGrid::validate() const {
  auto check = [](const std::vector<double>& axis, const char* name) {
    if (axis.empty()) throw InvalidArgument(std::string(name) + " axis is empty");
    for (double v : axis) {
      if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + " axis has a non-finite node");
    }
    for (std::size_t i = 1; i < axis.size(); ++i) {
      if (!(axis[i] > axis[i - 1])) {
        throw InvalidArgument(std::string(name) + " axis must be strictly increasing");
      }
    }
  };
  check(re, "real");
  check(im, "imaginary");
}

bool same_axes(const ComplexGrid& a, const ComplexGrid& b, double tol) {
  auto eq = [tol](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i] - y[i]) > tol) return false;
    }
    return true;
  };
  return eq(a.re, b.re) && eq(a.im, b.im);
}

namespace {

// Trapezoid weights; a single node gets weight 1 so that degenerate axes act as sums.
std::vector<double> trapezoid_weights(const std::vector<double>& x) {
  std::vector<double> w(x.size(), 1.0);
  if (x.size() < 2) return w;
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double h = 0.5 * (x[i + 1] - x[i]);
    w[i] += h;
    w[i + 1] += h;
  }
  return w;
}

}  // namespace

cplx SpectralMap::integrate() const {
  const auto wr = trapezoid_weights(grid.re);
  const auto wi = trapezoid_weights(grid.im);
  cplx total = 0.0;
  for (std::size_t j = 0; j < wi.size(); ++j)
    for (std::size_t i = 0; i < wr.size(); ++i) total += wr[i] * wi[j] * at(i, j);
  return total;
}

}  // namespace nhkpm
