#pragma once

#include "nikishin/riemann.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace nikishin {

/// Distinct roots z_{k,nu} of p_k...p_m with multiplicities tau_{k,nu}.
struct PerturbationRoots {
    std::vector<std::vector<std::pair<Complex, int>>> groups;  ///< k = 1..m at index k-1
    std::vector<int> degs;                                     ///< deg p_k at index k-1

    int m() const { return static_cast<int>(degs.size()); }
    const std::vector<std::pair<Complex, int>>& group(int k) const { return groups.at(k - 1); }
    /// deg(p_k ... p_m); zero past m.
    int tail_degree(int k) const;
    /// (p_k ... p_m)(z) from the grouped roots.
    Complex tail_value(int k, const Complex& z) const;

    static PerturbationRoots from_polynomials(const std::vector<Polynomial>& p);
    static PerturbationRoots numerators(const RationalPerturbation& pert) { return from_polynomials(pert.p); }
    static PerturbationRoots denominators(const RationalPerturbation& pert) { return from_polynomials(pert.q); }
    static PerturbationRoots none(int m);
};

/// Orientation signs delta_k (Delta_k left of Delta_{k+1}) and the exact
/// Delta_{k,l} table used by the sign laws.
struct DeltaTable {
    int m = 0;
    std::vector<int> delta;  ///< delta_k at index k, k = 1..m-1

    /// Delta_{k,l}, 1 <= k, l <= m.
    int Delta(int k, int l) const;
    /// prod_{i<=k} Delta_{i,l}: predicted eps_{n^l,k} / eps_{n,k}.
    int ratio_eps(int k, int l) const;
    /// Xi_k = prod_{j=1}^{m-1} (Delta_{k-1,j} ... Delta_{1,j})^{deg(p_{j+1}...p_m)}.
    int Xi(int k, const PerturbationRoots& roots) const;
};
DeltaTable delta_table(const std::vector<Interval>& hulls);
DeltaTable delta_table(const SurfaceSpec& spec);

/// Every limit function assembled from the branches psi^(1..m) of one surface.
class LimitSuite {
public:
    /// flips[l-1] negates the sign choice of psi^(l) (l >= 2 only).
    explicit LimitSuite(std::shared_ptr<const CoveringMap> cover, std::vector<bool> flips = {});

    int m() const { return cover_->m(); }
    const CoveringMap& cover() const { return *cover_; }
    const BranchFunction& psi(int l) const { return psi_.at(l - 1); }
    const std::vector<BranchFunction>& branches() const { return psi_; }
    const DeltaTable& table() const { return table_; }
    /// delta = sg psi_0^(1)(infinity).
    int delta() const { return psi(1).sg(0); }

    /// c_k^(l) for k = 0..m+1 (c_0 = c_{m+1} = 1).
    Real c(int l, int k) const;
    /// kappa_k^(l) = c_k / sqrt(c_{k-1} c_{k+1}).
    Real kappa(int l, int k) const;
    /// delta_{k,l} = sg(prod_{nu>=k} psi_nu^(l)(infinity)).
    int delta_F(int k, int l) const;

    /// F~_k^(l)(z) = F_k^(l)(z) / c_k^(l), evaluated as a product of branches.
    Complex f_tilde(int k, int l, const Complex& z) const;
    /// phi_s^(j)(z) = sg(psi_s^(j)(inf)) / (c_1^(j) psi_s^(j)(z)) on sheet s.
    Complex varphi(int j, int s, const Complex& z) const;
    /// (phi_s^(1)(z) - phi_s^(1)(t)) / (z - t), exact in the parameter plane.
    Complex varphi_divided(int s, const Complex& z, const Complex& t) const;

    /// Relative-asymptotics limit of Q~_n / Q_n.
    Complex script_F(const PerturbationRoots& r, const Complex& z) const;
    Complex script_F_rational(const PerturbationRoots& p, const PerturbationRoots& q, const Complex& z) const;

    /// Limit of Psi~_{n,k} / Psi_{n,k}, 0 <= k <= m-1; G_0 = script_F.
    Complex G(const PerturbationRoots& r, int k, const Complex& z) const;
    Complex G_rational(const PerturbationRoots& p, const PerturbationRoots& q, int k, const Complex& z) const;
    /// Value at infinity on sheet k (far-field average at +-iR).
    Complex G_inf(const PerturbationRoots& r, int k) const;

    /// F_k = prod_{i<k} G_i / G_i(inf), 1 <= k <= m.
    Complex F_k(const PerturbationRoots& r, int k, const Complex& z) const;
    Complex F_k_rational(const PerturbationRoots& p, const PerturbationRoots& q, int k, const Complex& z) const;
    /// Limit of K~_{n,k}^2 / K_{n,k}^2 = prod_{i<=k} signs[i-1] / G_k(inf), 1 <= k <= m-1.
    Real K_ratio_limit(const PerturbationRoots& r, const std::vector<int>& signs, int k) const;
    Real K_ratio_limit_rational(const PerturbationRoots& p, const PerturbationRoots& q, const std::vector<int>& signs,
                                int k) const;

    /// Far-field value lim_{z->inf} f(z) on a sheet, from the +-iR average.
    static Complex at_infinity(const std::function<Complex(const Complex&)>& f);

private:
    // Product over groups j with the sheet-s variable X = d_s phi_s(z).
    Complex level_product(const PerturbationRoots& r, int s, const Complex& z) const;

    std::shared_ptr<const CoveringMap> cover_;
    std::vector<BranchFunction> psi_;
    DeltaTable table_;
};

/// Max relative gap between the two sides of
///   (phi_0(z) - delta phi_{k-1}(t)) / F~_1^(k-1)(z) = 1 - psi_0^(k-1)(z) / psi_{k-1}^(k-1)(t),
/// k = 2 uses phi_1 in place of delta phi_1.
Real neweq_chain_residual(const LimitSuite& s, int k, const CVec& z, const CVec& t);

/// Max relative gap of phi_{k-1}^(1) = F~_k^(1) / ((kappa_1...kappa_{k-1})^2 F~_{k-1}^(1)).
Real varphi_consistency(const LimitSuite& s, int k, const CVec& z);

/// Max relative gap between prod_{i<=k} G_i / G_i(inf) and the recursion
/// F_{i+1} = F_i p_Lambda(X_i) / (prod_j (phi_i^(j))^{deg(p_{j+1}...)} (p_{i+1}...p_m)),
/// normalized at infinity, started from script_F.
Real relation_Fk_residual(const LimitSuite& s, const PerturbationRoots& r, int k, const CVec& z);

}  // namespace nikishin
