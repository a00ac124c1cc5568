#pragma once

#include "nikishin/system.hpp"

namespace nikishin {

struct MopResult {
    Polynomial Q;        ///< monic, Chebyshev basis on Delta_1
    int degree = 0;
    Real residual = 0;   ///< max scaled orthogonality residual
    Real condition = 0;  ///< pivot-ratio estimate of the row-scaled moment matrix
    unsigned bits = 0;
};

struct MopOptions {
    unsigned max_bits = 0;  ///< 0 means 4x the working precision
    int extra_nodes = 80;
    bool check_zeros = true;
};

/// Q_n on a fixed discretization (no escalation). Throws on a degree drop.
MopResult solve_mop(const Discretization& d, const MultiIndex& n);
/// Q_n with node sizing and precision escalation.
MopResult solve_mop(const NikishinSystem& sys, const MultiIndex& n, const MopOptions& opt = {});

/// Q~_n of smallest degree on a perturbed discretization.
MopResult solve_perturbed_mop(const Discretization& tilde, const MultiIndex& n);
MopResult solve_perturbed_mop(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                              const MopOptions& opt = {});

/// max_{k, nu < n_k} |int T_nu Q ds_k| / int |T_nu Q| d|s_k| on d's nodes.
Real orthogonality_residual(const Discretization& d, const Polynomial& Q, const MultiIndex& n);

/// All zeros, refined at working precision.
CVec mop_zeros(const Polynomial& Q);

struct ZeroReport {
    int count = 0;
    int real_inside = 0;  ///< real zeros in the open interval
    bool simple = true;
    Real min_gap = 0;
};
ZeroReport classify_zeros(const CVec& zeros, const Interval& iv);

/// Orthogonality recovered after multiplying by p_1...p_m:
/// int T_nu Q~ p_1..p_m ds_k for nu < n_k - deg(p_{k+1}..p_m).
Real lemma2_residual(const Discretization& plain, const RationalPerturbation& pert, const Polynomial& Qt,
                     const MultiIndex& n);

/// Auxiliary indices n_j, j = 0..N, of the expansion.
std::vector<MultiIndex> lemma3_indices(const RationalPerturbation& pert, const MultiIndex& n);

struct Lemma3Result {
    int N = 0;
    std::vector<MultiIndex> indices;
    CVec lambda;
    Real residual = 0;  ///< coefficient residual relative to the largest coefficient of R_n
    int jprime = 0;     ///< deg R_n - |n_0|
    bool structure_ok = false;
};

/// R_n = Q~_n p_1...p_m expanded in Q_{n_j}. Polynomial perturbations only.
Lemma3Result lemma3_expansion(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                              const Polynomial& Qt, const Discretization& plain);

/// Relative coefficient difference between solves on shuffled node orders.
Real permutation_uniqueness(const Discretization& d, const MultiIndex& n, unsigned seed);

/// Scaled values of (R_n/Q_{n_0})^(i) at every zero of p_1...p_m, i < multiplicity,
/// by Cauchy integrals on small circles. Returns the max.
Real lemma4_omega_residual(const Polynomial& R, const Polynomial& Qn0, const RationalPerturbation& pert,
                           const Interval& hull1, int max_order = 2);

/// Distinct zeros of p_k...p_m with multiplicities.
std::vector<std::pair<Complex, int>> grouped_zeros(const RationalPerturbation& pert, int k);

}  // namespace nikishin
