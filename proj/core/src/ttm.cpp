#include "chaintensor/ttm.hpp"

#include <cmath>
#include <sstream>

namespace chaintensor {

namespace {

using Index = Eigen::Index;

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

std::size_t system_dim_of(std::size_t vec_dim) {
  const auto d = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(vec_dim))));
  if (d * d != vec_dim) throw ValidationError("superoperator size is not a square of the system dimension");
  return d;
}

}  // namespace

std::vector<CMatrix> preparation_states(std::size_t d) {
  if (d == 0) throw ValidationError("preparation_states: dimension must be >= 1");
  const auto n = static_cast<Index>(d);
  std::vector<CMatrix> out;
  for (Index i = 0; i < n; ++i) {
    CMatrix p = CMatrix::Zero(n, n);
    p(i, i) = 1.0;
    out.push_back(p);
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      for (Complex phase : {Complex(1.0), kI}) {
        CVector v = CVector::Zero(n);
        v(i) = 1.0 / std::sqrt(2.0);
        v(j) = phase / std::sqrt(2.0);
        out.push_back(v * v.adjoint());
      }
    }
  return out;
}

DynamicalMapSet maps_from_trajectories(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw ValidationError("maps_from_trajectories: no trajectories");
  const Trajectory& first = trajectories.front();
  if (first.states.empty()) throw ValidationError("maps_from_trajectories: empty trajectory");
  const Index d = first.states.front().rows();
  const std::size_t steps = first.steps();
  for (const auto& tr : trajectories) {
    if (tr.steps() != steps) throw ValidationError("maps_from_trajectories: trajectories differ in length");
    if (std::abs(tr.dt - first.dt) > 1e-12 * std::abs(first.dt)) throw ValidationError("maps_from_trajectories: trajectories differ in dt");
    for (const auto& s : tr.states)
      if (s.rows() != d || s.cols() != d) throw ValidationError("maps_from_trajectories: inconsistent state dimensions");
  }
  const Index d2 = d * d;
  const auto n = static_cast<Index>(trajectories.size());
  if (n < d2)
    throw IllPosedBasisError("maps_from_trajectories: " + std::to_string(n) + " trajectories cannot span a " +
                             std::to_string(d2) + "-dimensional operator space");

  auto columns = [&](std::size_t k) {
    CMatrix r(d2, n);
    for (Index i = 0; i < n; ++i) r.col(i) = vectorize(trajectories[static_cast<std::size_t>(i)].states[k]);
    return r;
  };
  const CMatrix r0 = columns(0);
  Eigen::JacobiSVD<CMatrix> svd(r0);
  const RVector& sv = svd.singularValues();
  if (sv(d2 - 1) <= 1e-10 * sv(0))
    throw IllPosedBasisError("maps_from_trajectories: initial states do not span the operator space");
  const CMatrix inverse = n == d2 ? CMatrix(r0.fullPivLu().inverse()) : CMatrix(r0.completeOrthogonalDecomposition().pseudoInverse());

  DynamicalMapSet out;
  out.dt = first.dt;
  out.system_dim = static_cast<std::size_t>(d);
  out.maps.reserve(steps);
  for (std::size_t k = 1; k <= steps; ++k) out.maps.push_back(columns(k) * inverse);
  return out;
}

TransferTensorSet tensors_from_maps(const DynamicalMapSet& maps) {
  TransferTensorSet out;
  out.dt = maps.dt;
  out.system_dim = maps.system_dim;
  const std::size_t m = maps.size();
  out.tensors.reserve(m);
  for (std::size_t n = 1; n <= m; ++n) {
    CMatrix t = maps.map(n);
    for (std::size_t k = 1; k < n; ++k) t.noalias() -= out.tensors[n - k - 1] * maps.map(k);
    out.norms.push_back(t.norm());
    out.tensors.push_back(std::move(t));
  }
  out.cutoff = m;
  out.decayed = true;
  return out;
}

CutoffSelection select_cutoff(const TransferTensorSet& tensors, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("select_cutoff: threshold must be > 0");
  const std::size_t m = tensors.size();
  if (m == 0) throw ValidationError("select_cutoff: empty tensor set");
  const double ref = tensors.norms.front();
  if (ref == 0.0) return {1, true};
  std::size_t k = m;
  while (k > 1 && tensors.norms[k - 1] / ref < threshold) --k;
  CutoffSelection sel;
  sel.cutoff = k;
  sel.decayed = tensors.norms[m - 1] / ref < threshold || m == 1;
  if (!sel.decayed) sel.cutoff = m;
  return sel;
}

void apply_cutoff(TransferTensorSet& tensors, double threshold) {
  const CutoffSelection sel = select_cutoff(tensors, threshold);
  tensors.cutoff = sel.cutoff;
  tensors.decayed = sel.decayed;
  if (!sel.decayed) {
    std::ostringstream msg;
    msg << "transfer tensors have not decayed within the learning window: ||T_M||/||T_1|| = "
        << tensors.norms.back() / tensors.norms.front() << " >= " << threshold << "; lengthen the learning time";
    warn(msg.str());
  }
}

CMatrix commutator_superoperator(const CMatrix& h) {
  const CMatrix id = CMatrix::Identity(h.rows(), h.cols());
  return kron(id, h) - kron(h.transpose(), id);
}

std::vector<CMatrix> gell_mann_basis(std::size_t d) {
  const auto n = static_cast<Index>(d);
  std::vector<CMatrix> out;
  const double s = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < n; ++j)
    for (Index k = j + 1; k < n; ++k) {
      CMatrix sym = CMatrix::Zero(n, n), asym = CMatrix::Zero(n, n);
      sym(j, k) = sym(k, j) = s;
      asym(j, k) = -kI * s;
      asym(k, j) = kI * s;
      out.push_back(sym);
      out.push_back(asym);
    }
  for (Index l = 1; l < n; ++l) {
    CMatrix diag = CMatrix::Zero(n, n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l * (l + 1)));
    for (Index j = 0; j < l; ++j) diag(j, j) = norm;
    diag(l, l) = -static_cast<double>(l) * norm;
    out.push_back(diag);
  }
  return out;
}

LiouvillianEstimate liouvillian_from_first_tensor(const CMatrix& t1, double dt, double residual_tolerance) {
  if (!(dt > 0.0)) throw ValidationError("liouvillian_from_first_tensor: dt must be > 0");
  if (t1.rows() != t1.cols()) throw ValidationError("liouvillian_from_first_tensor: T_1 must be square");
  const std::size_t d = system_dim_of(static_cast<std::size_t>(t1.rows()));
  LiouvillianEstimate est;
  est.liouvillian = kI * (t1 - CMatrix::Identity(t1.rows(), t1.cols())) / dt;

  const std::vector<CMatrix> basis = gell_mann_basis(d);
  const Index rows = t1.size();
  Eigen::MatrixXd a(2 * rows, static_cast<Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const CMatrix c = commutator_superoperator(basis[j]);
    const Eigen::Map<const CVector> v(c.data(), rows);
    a.col(static_cast<Index>(j)) << v.real(), v.imag();
  }
  const Eigen::Map<const CVector> target(est.liouvillian.data(), rows);
  Eigen::VectorXd b(2 * rows);
  b << target.real(), target.imag();
  est.hamiltonian = CMatrix::Zero(static_cast<Index>(d), static_cast<Index>(d));
  if (!basis.empty()) {
    const Eigen::VectorXd coeff = a.completeOrthogonalDecomposition().solve(b);
    for (std::size_t j = 0; j < basis.size(); ++j) est.hamiltonian += coeff(static_cast<Index>(j)) * basis[j];
  }
  const double scale = est.liouvillian.norm();
  est.residual = scale > 0.0 ? (est.liouvillian - commutator_superoperator(est.hamiltonian)).norm() / scale : 0.0;
  est.flagged = est.residual > residual_tolerance;
  if (est.flagged) {
    std::ostringstream msg;
    msg << "first transfer tensor is not generated by a Hamiltonian: relative residual " << est.residual;
    warn(msg.str());
  }
  return est;
}

TensorPropagator::TensorPropagator(const TransferTensorSet& tensors, std::size_t cutoff)
    : tensors_(&tensors), cutoff_(cutoff), ring_(cutoff) {
  if (cutoff == 0 || cutoff > tensors.size())
    throw ValidationError("TensorPropagator: cutoff must satisfy 1 <= K <= number of tensors");
}

void TensorPropagator::push(const CVector& state) {
  head_ = (head_ + 1) % cutoff_;
  ring_[head_] = state;
  if (filled_ < cutoff_) ++filled_;
}

const CVector& TensorPropagator::latest() const {
  if (filled_ == 0) throw ValidationError("TensorPropagator: empty history");
  return ring_[head_];
}

const CVector& TensorPropagator::advance() {
  if (filled_ == 0) throw ValidationError("TensorPropagator: empty history");
  CVector next = CVector::Zero(ring_[head_].size());
  for (std::size_t k = 1; k <= filled_; ++k) {
    const std::size_t idx = (head_ + cutoff_ - (k - 1)) % cutoff_;
    next.noalias() += tensors_->tensors[k - 1] * ring_[idx];
  }
  push(next);
  return ring_[head_];
}

Trajectory propagate(const TransferTensorSet& tensors, std::size_t cutoff, const std::vector<CMatrix>& history,
                     std::size_t steps, double trace_drift_tolerance) {
  if (history.empty()) throw ValidationError("propagate: history must hold at least one state");
  const auto d = static_cast<Index>(tensors.system_dim);
  for (const auto& h : history)
    if (h.rows() != d || h.cols() != d) throw ValidationError("propagate: history state dimension mismatch");
  TensorPropagator prop(tensors, cutoff);
  const std::size_t first = history.size() > cutoff ? history.size() - cutoff : 0;
  for (std::size_t i = first; i < history.size(); ++i) prop.push(vectorize(history[i]));

  Trajectory out;
  out.dt = tensors.dt;
  out.states = history;
  out.states.reserve(history.size() + steps);
  const Complex ref = history.back().trace();
  bool warned = false;
  for (std::size_t n = 0; n < steps; ++n) {
    const CVector& v = prop.advance();
    if (!v.allFinite()) throw NumericalError("propagate: non-finite state at step " + std::to_string(n + 1));
    CMatrix rho = unvectorize(v);
    const double drift = std::abs(rho.trace() - ref);
    if (!warned && drift > trace_drift_tolerance) {
      std::ostringstream msg;
      msg << "transfer-tensor propagation is unstable: trace drift " << drift << " at step " << (n + 1);
      warn(msg.str());
      warned = true;
    }
    out.states.push_back(std::move(rho));
  }
  return out;
}

MemoryKernelView memory_kernel(const TransferTensorSet& tensors) {
  if (!(tensors.dt > 0.0)) throw ValidationError("memory_kernel: dt must be > 0");
  MemoryKernelView view;
  view.dt = tensors.dt;
  const double scale = 1.0 / (tensors.dt * tensors.dt);
  for (std::size_t k = 2; k <= tensors.size(); ++k) {
    view.samples.push_back(tensors.tensor(k) * scale);
    view.norms.push_back(tensors.norms[k - 1] * scale);
  }
  return view;
}

}  // namespace chaintensor
