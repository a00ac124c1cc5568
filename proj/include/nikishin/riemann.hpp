#pragma once

#include "nikishin/system.hpp"

#include <memory>
#include <string>
#include <vector>

namespace nikishin {

/// Slits of the (m+1)-sheeted surface: sheet k is the sphere cut along
/// slit k and slit k+1, neighbouring sheets glued crosswise along the slit
/// they share.
struct SurfaceSpec {
    std::vector<Interval> slits;

    int m() const { return static_cast<int>(slits.size()); }
    /// 1-based.
    const Interval& slit(int k) const { return slits.at(k - 1); }
    /// Consecutive slits disjoint, m >= 1.
    void validate() const;
    /// Cache key built from the decimal slit ends.
    std::string key() const;
    /// Continuous parts of sigma_1..sigma_m.
    static SurfaceSpec from_system(const NikishinSystem& sys);
};

/// Genus-zero uniformization
///   Z(w) = w + sum_k A_k / (w - B_k),
/// so w = infinity lies over z = infinity on sheet 0 and w = B_k over
/// z = infinity on sheet k. crit_lo[k], crit_hi[k] are the critical points
/// over the ends of slit k+1 (0-based vectors).
class CoveringMap {
public:
    CoveringMap() = default;
    CoveringMap(SurfaceSpec spec, RVec A, RVec B, RVec crit_lo, RVec crit_hi, unsigned bits);

    const SurfaceSpec& spec() const { return spec_; }
    int m() const { return spec_.m(); }
    unsigned bits() const { return bits_; }
    /// 1-based pole data.
    const Real& A(int k) const { return A_.at(k - 1); }
    const Real& B(int k) const { return B_.at(k - 1); }
    const Real& crit_lo(int k) const { return lo_.at(k - 1); }
    const Real& crit_hi(int k) const { return hi_.at(k - 1); }

    Complex Z(const Complex& w) const;
    Complex dZ(const Complex& w) const;
    /// Max of |Z(w_c) - end| and |Z'(w_c)| over the critical points.
    Real residual() const;
    /// Z = N / D with D = prod (w - B_k), lowest order first.
    std::pair<RVec, RVec> numerator_denominator() const;

    /// Preimage of z on sheet k (0 <= k <= m), tracked in double along the
    /// vertical ray from infinity and polished by Newton at the working
    /// precision. Proximity error on the sheet's own cuts.
    Complex preimage(int k, const Complex& z) const;
    /// True when z lies on the closure of a cut of sheet k.
    bool on_cut(int k, const Complex& z) const;

    std::string to_json() const;
    static CoveringMap from_json(const std::string& text);

private:
    Complex polish(Complex w, const Complex& z) const;

    SurfaceSpec spec_;
    RVec A_, B_, lo_, hi_;
    unsigned bits_ = 0;
};

/// Newton solve for the pole data and critical points. Slits are added in
/// index order (slit k+1 lives on sheet k, which must exist first), each
/// grown from a short slit at its centre over 8 continuation steps with
/// halving on failure.
CoveringMap build_covering(const SurfaceSpec& spec);
/// Process-wide cache keyed by the slit list and precision; when `dir` is
/// non-empty the JSON file <dir>/<hash>.json is read or written as well.
std::shared_ptr<const CoveringMap> cached_covering(const SurfaceSpec& spec, const std::string& dir = "");

/// Round-trip |Z(preimage(k, z)) - z| over `samples` random points per sheet
/// and whether the sheet preimages of each point are pairwise distinct.
struct RoundTrip {
    Real max_residual = 0;
    bool injective = true;
};
RoundTrip covering_round_trip(const CoveringMap& cover, int samples, unsigned seed);

/// psi^(l)(w) = c / (w - B_l): simple zero at infinity^(0), simple pole at
/// infinity^(l), |c| fixed by prod_k |psi_k^(l)(infinity)| = 1.
class BranchFunction {
public:
    /// l = 1 follows the orientation rule (leading value at infinity^(0)
    /// positive iff slit 1 lies left of slit 2, or m = 1); l >= 2 takes
    /// C1 > 0. `flip` negates the choice.
    BranchFunction(std::shared_ptr<const CoveringMap> cover, int l, bool flip = false);

    int l() const { return l_; }
    const CoveringMap& cover() const { return *cover_; }
    const Real& c() const { return c_; }
    /// Leading coefficient at infinity^(0): psi_0 ~ C1 / z.
    const Real& C1() const { return c_; }
    /// Leading coefficient at infinity^(l): psi_l ~ C2 z.
    Real C2() const { return c_ / cover_->A(l_); }
    /// Value (k != 0, l) or leading coefficient (k = 0, l) at infinity on sheet k.
    Real lead(int k) const;
    int sg(int k) const { return sign_of(lead(k)); }

    Complex at_w(const Complex& w) const { return Complex(c_) / (w - Complex(cover_->B(l_))); }
    Complex operator()(int k, const Complex& z) const { return at_w(cover_->preimage(k, z)); }

private:
    std::shared_ptr<const CoveringMap> cover_;
    int l_;
    Real c_;
};

/// Max relative residual of
///   1/psi^(1)(z) - 1/psi^(1)(inf^(l-1)) = C1^(l-1) / (C1^(1) psi^(l-1)(z))
/// over the samples on every sheet, l >= 2.
Real verify_relalg(const std::vector<BranchFunction>& psi, int l, const CVec& z);

/// Spread of prod_k psi_k^(l)(z) over the samples and the distance of its
/// mean from the nearest of +-1.
struct ProductCheck {
    Real spread = 0;
    Real unit_gap = 0;
    int value = 0;
};
ProductCheck branch_product(const BranchFunction& psi, const CVec& z);

/// Max |psi_k(x + i eps) - conj psi_{k+1}(x + i eps)| / max(1, |psi|) over x inside slit k+1.
Real boundary_conjugation(const BranchFunction& psi, int k, const RVec& x, const Real& eps);

}  // namespace nikishin
