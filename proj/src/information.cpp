#include "qbound/information.hpp"

#include <cmath>
#include <sstream>

#include "qbound/linalg.hpp"

namespace qbound {

ModelPoint ModelPoint::at(const ParametricModel& model, const RVector& theta) {
  return {model.state(theta).matrix(), model.derivatives(theta), model.is_pure()};
}

SldSet sld(const ModelPoint& pt, const Numerics& num) {
  SldSet out;
  if (pt.pure) {
    for (const auto& d : pt.derivs) out.slds.push_back(2.0 * d);
    return out;
  }
  const double lo = min_eigenvalue(pt.rho);
  if (lo <= num.singular_tol) {
    std::ostringstream os;
    os << "state is rank-deficient (smallest eigenvalue " << lo
       << "); the SLD is undefined for a singular mixed state";
    throw RankDeficiencyError(os.str(), lo);
  }
  const int d = pt.dim();
  const auto basis = hermitian_basis(d);
  const auto n = static_cast<Eigen::Index>(basis.size());
  // A_ab = trace(B_a (rho B_b + B_b rho))
  RMatrix a(n, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const CMatrix img = pt.rho * basis[static_cast<std::size_t>(b)] +
                        basis[static_cast<std::size_t>(b)] * pt.rho;
    a.col(b) = to_coords(img, basis);
  }
  a = 0.5 * (a + a.transpose());
  Eigen::LDLT<RMatrix> ldlt(a);
  for (const auto& der : pt.derivs) {
    const RVector rhs = to_coords(2.0 * der, basis);
    out.slds.push_back(hermitian_part(from_coords(ldlt.solve(rhs), basis)));
  }
  return out;
}

SldSet sld(const ParametricModel& model, const RVector& theta) {
  return sld(ModelPoint::at(model, theta));
}

InfoMatrix helstrom_matrix(const ModelPoint& pt, const SldSet& l) {
  const auto p = static_cast<Eigen::Index>(l.slds.size());
  InfoMatrix h{RMatrix(p, p), InfoMatrix::Kind::helstrom};
  for (Eigen::Index i = 0; i < p; ++i) {
    const CMatrix rl = pt.rho * l.slds[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = (rl.cwiseProduct(l.slds[static_cast<std::size_t>(j)].transpose())).sum().real();
      h.values(i, j) = v;
      h.values(j, i) = v;
    }
  }
  return h;
}

InfoMatrix helstrom_matrix(const ParametricModel& model, const RVector& theta) {
  const auto pt = ModelPoint::at(model, theta);
  return helstrom_matrix(pt, sld(pt));
}

InfoMatrix povm_fisher(const ModelPoint& pt, const Povm& m) {
  if (pt.dim() != m.dim()) throw DimensionError("state and POVM dimensions differ");
  const auto p = static_cast<Eigen::Index>(pt.derivs.size());
  InfoMatrix info{RMatrix::Zero(p, p), InfoMatrix::Kind::povm_fisher};
  RVector grad(p);
  for (std::size_t x = 0; x < m.size(); ++x) {
    const CMatrix mt = m.elements()[x].transpose();
    const double px = pt.rho.cwiseProduct(mt).sum().real();
    for (Eigen::Index i = 0; i < p; ++i)
      grad(i) = pt.derivs[static_cast<std::size_t>(i)].cwiseProduct(mt).sum().real();
    const double g = grad.cwiseAbs().maxCoeff();
    if (px <= 1e-12) {
      if (g <= 1e-12) continue;
      if (g > 1e-8) {
        std::ostringstream os;
        os << "outcome '" << m.labels()[x] << "' has probability " << px
           << " but gradient magnitude " << g << "; the classical model is irregular here";
        throw IrregularModelError(os.str());
      }
      continue;
    }
    info.values += grad * grad.transpose() / px;
  }
  return info;
}

InfoMatrix povm_fisher(const ParametricModel& model, const RVector& theta, const Povm& m) {
  return povm_fisher(ModelPoint::at(model, theta), m);
}

double sld_residual(const ModelPoint& pt, const SldSet& l) {
  double r = 0.0;
  for (std::size_t i = 0; i < l.slds.size(); ++i) {
    const CMatrix res = pt.rho * l.slds[i] + l.slds[i] * pt.rho - 2.0 * pt.derivs[i];
    r = std::max(r, max_abs_entry(res));
  }
  return r;
}

}  // namespace qbound
