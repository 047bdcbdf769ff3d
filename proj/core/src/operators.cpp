#include "nhkpm/operators.hpp"

#include <cmath>
#include <string>

namespace nhkpm {

namespace {

void check_sites(int L) {
  if (L < 1 || L > kMaxSites) {
    throw InvalidArgument("site count must be in [1, " + std::to_string(kMaxSites) +
                          "], got " + std::to_string(L));
  }
}

Index spin_dim(int L) { return Index{1} << L; }

bool is_up(Index state, int site) { return ((state >> (site - 1)) & 1) != 0; }

double sz_value(Index state, int site) { return is_up(state, site) ? 0.5 : -0.5; }

std::vector<std::pair<int, int>> chain_bonds(int L, Boundary bc) {
  std::vector<std::pair<int, int>> bonds;
  for (int l = 1; l < L; ++l) bonds.emplace_back(l, l + 1);
  if (bc == Boundary::periodic && L >= 2) bonds.emplace_back(L, 1);
  return bonds;
}

}  // namespace

void SpinChainParams::validate() const {
  check_sites(L);
  for (double v : {J, gamma, Jz, hz}) {
    if (!std::isfinite(v)) throw InvalidArgument("spin chain couplings must be finite");
  }
}

SparseOperator::SparseOperator(Matrix m) : matrix_(std::move(m)) {
  if (matrix_.rows() != matrix_.cols()) {
    throw InvalidArgument("operator must be square");
  }
  matrix_.prune([](Index, Index, const cplx& v) { return std::abs(v) > kDropTolerance; });
  matrix_.makeCompressed();
}

SparseOperator SparseOperator::from_triplets(Index dim, const std::vector<Triplet>& entries) {
  Matrix m(dim, dim);
  m.setFromTriplets(entries.begin(), entries.end());
  return SparseOperator(std::move(m));
}

SparseOperator SparseOperator::from_dense(const Eigen::MatrixXcd& dense) {
  if (dense.rows() != dense.cols()) throw InvalidArgument("operator must be square");
  return SparseOperator(Matrix(dense.sparseView(1.0, kDropTolerance)));
}

SparseOperator SparseOperator::identity(Index dim) {
  Matrix m(dim, dim);
  m.setIdentity();
  return SparseOperator(std::move(m));
}

SparseOperator SparseOperator::adjoint() const { return SparseOperator(Matrix(matrix_.adjoint())); }

double SparseOperator::max_row_sum() const {
  double best = 0.0;
  for (Index r = 0; r < matrix_.outerSize(); ++r) {
    double s = 0.0;
    for (Matrix::InnerIterator it(matrix_, r); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

double SparseOperator::max_col_sum() const {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(matrix_.cols());
  for (Index r = 0; r < matrix_.outerSize(); ++r) {
    for (Matrix::InnerIterator it(matrix_, r); it; ++it) sums[it.col()] += std::abs(it.value());
  }
  return sums.size() == 0 ? 0.0 : sums.maxCoeff();
}

double SparseOperator::hermiticity_defect() const {
  Matrix diff = matrix_ - Matrix(matrix_.adjoint());
  double worst = 0.0;
  for (Index r = 0; r < diff.outerSize(); ++r) {
    for (Matrix::InnerIterator it(diff, r); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
  return SparseOperator(SparseOperator::Matrix(a.matrix_ + b.matrix_));
}

SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
  return SparseOperator(SparseOperator::Matrix(a.matrix_ - b.matrix_));
}

SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
  return SparseOperator(SparseOperator::Matrix(a.matrix_ * b.matrix_));
}

SparseOperator operator*(cplx s, const SparseOperator& a) {
  return SparseOperator(SparseOperator::Matrix(s * a.matrix_));
}

double staggered_field(int site, double hz) {
  const int r = site % 4;
  return (r == 2 || r == 3) ? -hz : 0.0;
}

SparseOperator spin_operator(int site, SpinKind kind, int L) {
  check_sites(L);
  if (site < 1 || site > L) {
    throw InvalidArgument("site " + std::to_string(site) + " outside 1.." + std::to_string(L));
  }
  const Index dim = spin_dim(L);
  const Index bit = Index{1} << (site - 1);
  std::vector<SparseOperator::Triplet> t;
  t.reserve(static_cast<std::size_t>(dim));
  const cplx i_unit{0.0, 1.0};
  for (Index s = 0; s < dim; ++s) {
    const bool up = (s & bit) != 0;
    switch (kind) {
      case SpinKind::z:
        t.emplace_back(s, s, up ? 0.5 : -0.5);
        break;
      case SpinKind::plus:
        if (!up) t.emplace_back(s | bit, s, 1.0);
        break;
      case SpinKind::minus:
        if (up) t.emplace_back(s & ~bit, s, 1.0);
        break;
      case SpinKind::x:
        t.emplace_back(s ^ bit, s, 0.5);
        break;
      case SpinKind::y:
        // S^y = (S^+ - S^-) / 2i
        t.emplace_back(s ^ bit, s, up ? 0.5 * i_unit : -0.5 * i_unit);
        break;
    }
  }
  return SparseOperator::from_triplets(dim, t);
}

SparseOperator build_spin_chain(const SpinChainParams& p) {
  p.validate();
  const Index dim = spin_dim(p.L);
  const auto bonds = chain_bonds(p.L, p.bc);
  const double forward = 0.5 * (p.J + p.gamma);   // S^+_l S^-_{l+1}
  const double backward = 0.5 * (p.J - p.gamma);  // S^-_l S^+_{l+1}

  std::vector<SparseOperator::Triplet> t;
  t.reserve(static_cast<std::size_t>(dim) * (2 * bonds.size() + 1));
  for (Index s = 0; s < dim; ++s) {
    cplx diag = 0.0;
    for (auto [a, b] : bonds) {
      diag += p.Jz * sz_value(s, a) * sz_value(s, b);
      const Index ba = Index{1} << (a - 1);
      const Index bb = Index{1} << (b - 1);
      if (!is_up(s, a) && is_up(s, b)) t.emplace_back((s | ba) & ~bb, s, forward);
      if (is_up(s, a) && !is_up(s, b)) t.emplace_back((s & ~ba) | bb, s, backward);
    }
    for (int l = 1; l <= p.L; ++l) {
      diag += cplx{0.0, staggered_field(l, p.hz)} * sz_value(s, l);
    }
    t.emplace_back(s, s, diag);
  }
  return SparseOperator::from_triplets(dim, t);
}

SparseOperator build_fermion_chain(const SpinChainParams& p) {
  p.validate();
  if (p.bc != Boundary::open) {
    throw InvalidArgument("the Jordan-Wigner fermion chain is defined for open boundaries only");
  }
  const int L = p.L;
  const Index dim = spin_dim(L);

  // c_l = prod_{j<l} (-2 S^z_j) S^-_l
  std::vector<SparseOperator> annihilate;
  annihilate.reserve(static_cast<std::size_t>(L));
  SparseOperator string = SparseOperator::identity(dim);
  for (int l = 1; l <= L; ++l) {
    annihilate.push_back(string * spin_operator(l, SpinKind::minus, L));
    string = string * (cplx{-2.0} * spin_operator(l, SpinKind::z, L));
  }
  std::vector<SparseOperator> create;
  std::vector<SparseOperator> shifted_number;  // n_l - 1/2
  const SparseOperator half = cplx{0.5} * SparseOperator::identity(dim);
  for (const auto& c : annihilate) {
    create.push_back(c.adjoint());
    shifted_number.push_back(create.back() * c - half);
  }

  SparseOperator H(SparseOperator::Matrix(dim, dim));
  for (int l = 0; l + 1 < L; ++l) {
    H = H + cplx{0.5 * (p.J + p.gamma)} * (create[l] * annihilate[l + 1]);
    H = H + cplx{0.5 * (p.J - p.gamma)} * (create[l + 1] * annihilate[l]);
    H = H + cplx{p.Jz} * (shifted_number[l] * shifted_number[l + 1]);
  }
  for (int l = 1; l <= L; ++l) {
    const double h = staggered_field(l, p.hz);
    if (h != 0.0) H = H + cplx{0.0, h} * shifted_number[l - 1];
  }
  return H;
}

SparseOperator build_hatano_nelson(int L, double t, double gamma, Boundary bc) {
  if (L < 2) throw InvalidArgument("Hatano-Nelson chain needs L >= 2");
  if (!std::isfinite(t) || !std::isfinite(gamma)) {
    throw InvalidArgument("Hatano-Nelson couplings must be finite");
  }
  std::vector<SparseOperator::Triplet> e;
  for (Index l = 0; l + 1 < L; ++l) {
    e.emplace_back(l, l + 1, t + gamma);
    e.emplace_back(l + 1, l, t - gamma);
  }
  if (bc == Boundary::periodic) {
    e.emplace_back(L - 1, 0, t + gamma);
    e.emplace_back(0, L - 1, t - gamma);
  }
  return SparseOperator::from_triplets(L, e);
}

SparseOperator hermitrize(const SparseOperator& H, cplx omega) {
  const Index d = H.dim();
  std::vector<SparseOperator::Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * (H.nonzeros() + d)));
  for (Index r = 0; r < d; ++r) {
    t.emplace_back(r, d + r, omega);
    t.emplace_back(d + r, r, std::conj(omega));
  }
  const auto& m = H.matrix();
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (SparseOperator::Matrix::InnerIterator it(m, r); it; ++it) {
      t.emplace_back(r, d + it.col(), -it.value());
      t.emplace_back(d + it.col(), r, -std::conj(it.value()));
    }
  }
  return SparseOperator::from_triplets(2 * d, t);
}

SpinChainParams similarity_transform_params(const SpinChainParams& p) {
  p.validate();
  if (p.bc != Boundary::open) {
    throw InvalidArgument("the imaginary gauge transformation requires open boundaries");
  }
  if (!(std::abs(p.gamma) < p.J)) {
    throw InvalidArgument("similarity transformation requires |gamma| < J");
  }
  SpinChainParams q = p;
  q.J = std::sqrt((p.J + p.gamma) * (p.J - p.gamma));
  q.gamma = 0.0;
  return q;
}

std::pair<SparseOperator, ScalingRecord> rescale(const SparseOperator& H, double delta, cplx shift) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw InvalidArgument("scale factor must be positive, got " + std::to_string(delta));
  }
  SparseOperator::Matrix id(H.dim(), H.dim());
  id.setIdentity();
  SparseOperator::Matrix m = (H.matrix() - shift * id) / delta;
  return {SparseOperator(std::move(m)), ScalingRecord{delta, shift}};
}

SparseOperator unscale(const SparseOperator& H_scaled, const ScalingRecord& record) {
  SparseOperator::Matrix id(H_scaled.dim(), H_scaled.dim());
  id.setIdentity();
  return SparseOperator(SparseOperator::Matrix(H_scaled.matrix() * record.delta + record.shift * id));
}

double estimate_scale_factor(const SparseOperator& H, double omega_max) {
  const double bound = std::max(H.max_row_sum(), H.max_col_sum()) + std::abs(omega_max);
  // A zero operator probed only at omega = 0 has no scale; any positive value works.
  return bound > 0.0 ? 1.1 * bound : 1.0;
}

}  // namespace nhkpm
