#pragma once

#include "nikishin/mop.hpp"

#include <memory>

namespace nikishin {

enum class FamilyKind { Plain, RFamily, Tilde };
const char* to_string(FamilyKind k);

/// Upward chain Psi_0 = base, Psi_k(z) = int Psi_{k-1}(x) / (z - x) dsigma_k(x)
/// on a fixed discretization. For the tilde family the level weights carry
/// p_k / q_k.
class SecondTypeFamily {
public:
    SecondTypeFamily(std::shared_ptr<const Discretization> d, Polynomial base, FamilyKind kind,
                     std::vector<int> measure_signs);

    FamilyKind kind() const { return kind_; }
    int m() const { return disc_->m(); }
    const Discretization& disc() const { return *disc_; }
    const Polynomial& base() const { return base_; }

    /// Psi_k(z), 0 <= k <= m. Proximity error near supp sigma_k.
    Complex operator()(int k, const Complex& z) const;
    /// Psi_k(z) and a magnitude scale sum |w Psi_{k-1}| / |z - x|.
    Complex eval(int k, const Complex& z, Real* scale) const;
    /// Psi_{k-1} at the level-k nodes, 1 <= k <= m.
    const CVec& inner(int k) const { return inner_.at(k - 1); }
    /// Sign of the level-k measure (p_k sigma_k for the tilde family); 0 if undefined.
    int measure_sign(int k) const { return signs_.at(k - 1); }

private:
    std::shared_ptr<const Discretization> disc_;
    Polynomial base_;
    FamilyKind kind_;
    std::vector<int> signs_;
    std::vector<CVec> inner_;
};

/// Psi-family of Q_n.
SecondTypeFamily plain_family(const NikishinSystem& sys, const MultiIndex& n, const Polynomial& Qn);
/// R_{n,0} = Q~_n p_1...p_m over the unperturbed measures.
SecondTypeFamily r_family(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                          const Polynomial& Qt);
/// Psi~-family of Q~_n over p_k sigma_k (p_k / q_k sigma_k with denominators).
SecondTypeFamily tilde_family(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                              const Polynomial& Qt);

/// Q_{n,k}, H_{n,k}, K_{n,k}, kappa_{n,k}, eps_{n,k} built from a Psi-family.
struct InducedFamily {
    std::shared_ptr<const SecondTypeFamily> family;
    MultiIndex n;
    std::vector<CVec> zeros;         ///< k = 0..m+1; empty at both ends
    std::vector<int> contour_count;  ///< k = 1..m (slot 0 unused)
    std::vector<int> eps;            ///< k = 1..m (slot 0 unused)
    std::vector<Real> K;             ///< k = 0..m, K[0] = 1

    int m() const { return static_cast<int>(n.size()); }
    int N(int k) const;
    /// Monic Q_{n,k}(z) from its zeros, 0 <= k <= m+1.
    Complex Q(int k, const Complex& z) const;
    /// H_{n,k} = Q_{n,k-1} Psi_{n,k-1} / Q_{n,k}, 1 <= k <= m+1.
    Complex H(int k, const Complex& z) const;
    /// h_{n,k} = K_{n,k-1}^2 H_{n,k}.
    Complex h(int k, const Complex& z) const;
    Real kappa(int k) const { return K.at(k) / K.at(k - 1); }
    Polynomial polynomial(int k) const { return Polynomial::from_roots(zeros.at(k)); }
};

/// Zeros of Psi_{k-1} on Delta_k for k = 1..m: argument-principle count on a
/// rectangle around Delta_k, bracketed roots on a panel grid, then the
/// constants. Structural error on any count mismatch.
InducedFamily induced_polynomials(const SecondTypeFamily& fam, const MultiIndex& n);
/// Same construction for the tilde family; real perturbations only.
InducedFamily tilde_induced(const SecondTypeFamily& tilde, const MultiIndex& n);

/// Solves Q_n with escalation and returns its induced family computed at
/// the solve's precision (doubling once more on a count mismatch).
struct InducedSolve {
    MopResult mop;
    InducedFamily induced;
    unsigned bits = 0;
};
InducedSolve solve_induced(const NikishinSystem& sys, const MultiIndex& n, const MopOptions& opt = {});
InducedSolve solve_tilde_induced(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                                 const MopOptions& opt = {});

/// Number of zeros of f inside the rectangle [lo-r, hi+r] x [-r, r] by the
/// argument principle with adaptive subdivision.
/// `hint` (expected count) sets the initial sampling density.
int contour_zero_count(const std::function<Complex(const Complex&)>& f, const Interval& iv, const Real& r,
                       int hint = 0);
/// Real zeros of f on [lo, hi] by sign changes on a panel grid, refined by
/// bracketing; the grid is doubled until `expected` zeros are found.
RVec real_zeros(const std::function<Real(const Real&)>& f, const Interval& iv, int expected);

/// Max relative gap between both sides of
///   H_{n,k+1}(z) = int Q_{n,k} Psi_{n,k-1} / ((z-x) Q_{n,k+1}) dsigma_k.
Real verify_h_recursion(const InducedFamily& ind, int k, const CVec& z);

/// Max scaled |int T_nu Psi_{n,k-1} d<sigma_k..sigma_{k+r}>| over nu < n_{k+r}.
Real psi_orthogonality_residual(const SecondTypeFamily& fam, const MultiIndex& n, int k, int r);
/// Max scaled |int T_nu Psi_{n,k-1} / Q_{n,k+1} dsigma_k| over nu < N_{n,k}.
Real varying_orthogonality_residual(const InducedFamily& ind, int k);
/// True when H_{n,k} keeps one sign on Delta_k (sampled between zeros).
bool h_constant_sign(const InducedFamily& ind, int k);

/// eps_{n,k} h_{n,k+1}(z) and its limit 1/sqrt((z-b)(z-a)), positive for z > b.
Complex normalized_h(const InducedFamily& ind, int k, const Complex& z);
Complex inverse_sqrt_limit(const Interval& ab, const Complex& z);

/// Max relative gap of R_{n,k}(z) = (p_{k+1}...p_m)(z) Psi~_{n,k}(z) over k and z.
Real lemmarelation_residual(const SecondTypeFamily& R, const SecondTypeFamily& tilde,
                            const RationalPerturbation& pert, const CVec& z);

/// Max relative gap of R_{n,k} = (-1)^(k-1) Phi_k + sum_l (-1)^(l-1) theta^_{l,k} Phi_l,
/// Phi_l(z) = int R_n(x) / (z-x) ds_l(x), theta_{l,k} = <sigma_k, ..., sigma_{l+1}>.
Real verify_eq13(const SecondTypeFamily& R, int k, const CVec& z);

/// Scaled R_{n,k-1}^(i)(z_k) at zeros z_k of p_k...p_m, k >= 2, i < min(mult, max_order + 1).
Real lemma4_chain_residual(const SecondTypeFamily& R, const RationalPerturbation& pert, int max_order = 2);

}  // namespace nikishin
