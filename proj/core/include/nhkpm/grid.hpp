#pragma once

#include <map>
#include <string>
#include <vector>

#include "nhkpm/types.hpp"

namespace nhkpm {

/// Evenly spaced axis; n == 1 collapses to the single point lo.
std::vector<double> linspace(double lo, double hi, int n);

/// Rectangular lattice in the complex plane. Node (i_re, i_im) has flat index
/// i_im * re.size() + i_re, i.e. rows of constant Im(omega), Re(omega) fastest.
struct ComplexGrid {
  std::vector<double> re;
  std::vector<double> im;

  static ComplexGrid uniform(double re_lo, double re_hi, int n_re, double im_lo, double im_hi, int n_im);

  std::size_t size() const noexcept { return re.size() * im.size(); }
  cplx node(std::size_t flat) const { return {re[flat % re.size()], im[flat / re.size()]}; }
  std::vector<cplx> nodes() const;
  double max_abs() const;

  /// Throws InvalidArgument unless both axes are non-empty and strictly increasing.
  void validate() const;
};

bool same_axes(const ComplexGrid& a, const ComplexGrid& b, double tol = 0.0);

/// A complex-valued function sampled on a ComplexGrid, plus free-form metadata.
struct SpectralMap {
  ComplexGrid grid;
  std::vector<cplx> values;
  std::map<std::string, std::string> metadata;

  cplx at(std::size_t i_re, std::size_t i_im) const { return values[i_im * grid.re.size() + i_re]; }
  /// Trapezoid integral of the values over the grid rectangle.
  cplx integrate() const;
};

}  // namespace nhkpm
