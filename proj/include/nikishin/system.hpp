#pragma once

#include "nikishin/measure.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace nikishin {

using MultiIndex = std::vector<int>;

int norm(const MultiIndex& n);
std::string to_string(const MultiIndex& n);

struct NikishinSystem {
    std::vector<Measure> measures;  ///< sigma_1 .. sigma_m (stored 0-based)
    std::vector<Interval> hulls;    ///< convex hull of each support

    int m() const { return static_cast<int>(measures.size()); }
    /// 1-based accessors, matching the usual indexing of the theory.
    const Measure& sigma(int k) const { return measures.at(k - 1); }
    const Interval& hull(int k) const { return hulls.at(k - 1); }
    /// +1 if Delta_k lies to the left of Delta_{k+1}, -1 otherwise.
    int delta(int k) const;
};

/// Validates the measures and computes hulls; consecutive hulls must be disjoint.
NikishinSystem build_system(std::vector<Measure> measures);

/// Multiplies sigma_k by p_k / q_k. Polynomials are monic, monomial basis.
struct RationalPerturbation {
    std::vector<Polynomial> p, q;

    static RationalPerturbation trivial(int m);
    static RationalPerturbation polynomial(std::vector<Polynomial> p);
    static RationalPerturbation rational(std::vector<Polynomial> p, std::vector<Polynomial> q);

    int m() const { return static_cast<int>(p.size()); }
    bool real_flag() const;
    bool is_trivial() const;
    bool has_denominators() const;
    /// 1-based accessors.
    const Polynomial& pk(int k) const { return p.at(k - 1); }
    const Polynomial& qk(int k) const { return q.at(k - 1); }
    /// deg(p_from ... p_to); zero for an empty range.
    int deg_p(int from, int to) const;
    /// Degrees used by the index class: deg p_k, or deg(p_k q_k) with denominators.
    std::vector<int> class_degrees() const;
    /// Root clearance against every hull and coprimality of p_k, q_k.
    void validate(const NikishinSystem& sys) const;
    /// Factor p_k(x)/q_k(x).
    Complex factor(int k, const Real& x) const;
    /// Sign of p_k/q_k on supp sigma_k (real coefficients only).
    int sign_on_support(const NikishinSystem& sys, int k) const;
};

/// Membership in Z_+^m(*; p_1..p_m) given deg p_k (1 entry per level).
bool check_index_class(const MultiIndex& n, const std::vector<int>& degs);
bool check_index_class(const MultiIndex& n);

/// Cyclic ladder n_1 -> n_2 -> ... -> n_m starting at base. `stride`
/// increments separate consecutive returned indices.
std::vector<MultiIndex> build_ladder(const MultiIndex& base, int count, const std::vector<int>& degs,
                                     int stride = 1);

/// Quadrature discretization of a (possibly perturbed) system: nodes and
/// complex weights per level. Densities of the nested measures are cached.
class Discretization {
public:
    struct Level {
        RVec x;
        CVec w;
        Interval interval;  ///< continuous part
        Interval hull;
        RVec atoms;
        Real clear;
    };

    Discretization(const NikishinSystem& sys, const std::vector<int>& nodes,
                   const RationalPerturbation* pert = nullptr);

    int m() const { return static_cast<int>(levels_.size()); }
    const Level& level(int k) const { return levels_.at(k - 1); }
    unsigned bits() const { return bits_; }
    bool perturbed() const { return perturbed_; }

    /// Values of the Cauchy transform of <sigma_{a+1},...,sigma_b> at the
    /// level-a nodes; all ones when b == a.
    const CVec& density(int a, int b) const;
    /// Weights w_i such that sum w_i f(x_i) = int f d<sigma_a,...,sigma_b>.
    CVec nested_weights(int a, int b) const;
    /// int f ds_k over level-1 nodes.
    Complex integrate_s(int k, const std::function<Complex(const Real&)>& f) const;
    Complex integrate_nested(int a, int b, const std::function<Complex(const Real&)>& f) const;

    /// Distance from z to supp sigma_k.
    Real support_distance(int k, const Complex& z) const;
    /// Throws a proximity error when z is within the clearance of supp sigma_k.
    void check_clear(int k, const Complex& z) const;

    /// Same rules with the node order of every level shuffled.
    Discretization permuted(unsigned seed) const;

private:
    Discretization() = default;
    std::vector<Level> levels_;
    unsigned bits_ = 0;
    bool perturbed_ = false;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
    mutable std::map<std::pair<int, int>, CVec> densities_;
};

/// Node counts per level sized for a multi-index: 2 x (degree + 8), with
/// a floor of degree + `extra`.
std::vector<int> default_nodes(const NikishinSystem& sys, const MultiIndex& n, int extra_degree = 0,
                               int extra = 80);

/// Lemma-1 decomposition: l_{k,1..k} (index j-1) with
///   s~_k = sum_j p_1...p_j l_{k,j} s_j.
/// Polynomials are in the monomial basis; only numerators p_k are used.
std::vector<Polynomial> lemma1_decompose(const Discretization& plain, const RationalPerturbation& pert, int k);

/// Max relative residual of the decomposition over monomials x^0..x^max_degree.
Real lemma1_residual(const Discretization& plain, const Discretization& perturbed,
                     const RationalPerturbation& pert, int k, const std::vector<Polynomial>& l, int max_degree);

}  // namespace nikishin
