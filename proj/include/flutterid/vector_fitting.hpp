#pragma once

// Fast Relaxed Vector Fitting.
//
// Common poles, per-channel residues. Pole relocation fits sigma(s) H(s) ~ f(s)
// with sigma(s) = sum c_n phi_n(s) + d_hat; the new poles are the zeros of
// sigma. Each channel's least-squares block is QR-reduced and only the rows
// coupling to the sigma unknowns are kept, so the final solve is
// (channels * (N+1) + 1) x (N+1) regardless of the number of frequency bins.
//
// Conjugate pairs use the real basis
//   phi_m = 1/(s-p) + 1/(s-conj p),  phi_{m+1} = i/(s-p) - i/(s-conj p),
// which keeps every unknown real and every residue pair exactly conjugate.

#include "flutterid/error.hpp"
#include "flutterid/frf.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

namespace flutterid {

struct VfConfig {
    int order = 6;                       ///< number of poles N (even)
    int max_iterations = 30;
    double pole_shift_tolerance = 1e-6;  ///< max |ds|/|s| between iterations
    bool enforce_stable_poles = true;
    bool include_d_term = true;
    bool include_e_term = false;
    bool relaxed = true;
    bool inverse_magnitude_weighting = false;
    bool allow_rank_deficient = false;   ///< minimum-norm solve instead of throwing

    void validate() const
    {
        require(order >= 2 && order % 2 == 0, "vector fitting order must be even and >= 2");
        require(max_iterations >= 1, "max_iterations must be >= 1");
        require(pole_shift_tolerance > 0.0, "pole_shift_tolerance must be > 0");
    }
};

struct VfResult {
    std::vector<cplx> poles;     ///< rad/s, conjugate-closed, canonical order
    Eigen::MatrixXcd residues;   ///< channels x N
    Eigen::VectorXd d_term;
    Eigen::VectorXd e_term;
    int iterations_used = 0;
    double rms_fit_error = 0.0;
    bool converged = false;
    int reflected_poles = 0;     ///< unstable poles mirrored during relocation

    /// Fitted model at complex frequency s, one value per channel.
    Eigen::VectorXcd evaluate(cplx s) const
    {
        Eigen::VectorXcd h = d_term.cast<cplx>() + s * e_term.cast<cplx>();
        for (std::size_t n = 0; n < poles.size(); ++n) h += residues.col(static_cast<Eigen::Index>(n)) / (s - poles[n]);
        return h;
    }
};

struct RelocationResult {
    std::vector<cplx> poles;
    double d_hat = 1.0;
    int reflected = 0;
    bool rank_deficient = false;
};

struct FrvfOutcome {
    VfResult fit;
    ModalParameterSet modes;
    std::vector<DiscardedPole> discarded;
};

namespace vf_detail {

enum class Slot { real, pair_first, pair_second };

/// Relative tolerance below which an imaginary part counts as zero.
inline constexpr double real_pole_tol = 1e-12;

/// Reorders a conjugate-closed set as [..., p, conj(p), ...] sorted by |p|,
/// with the upper half-plane member first. Throws if the set is not
/// closed under conjugation.
inline std::vector<cplx> canonical(const std::vector<cplx>& poles)
{
    std::vector<cplx> reals, upper, lower;
    for (const cplx p : poles) {
        require(std::isfinite(p.real()) && std::isfinite(p.imag()), "poles must be finite");
        const double mag = std::max(std::abs(p), std::numeric_limits<double>::min());
        if (std::abs(p.imag()) <= real_pole_tol * mag) reals.emplace_back(p.real(), 0.0);
        else if (p.imag() > 0.0) upper.push_back(p);
        else lower.push_back(p);
    }
    require(upper.size() == lower.size(), "poles are not closed under conjugation");
    std::vector<bool> used(lower.size(), false);
    for (const cplx u : upper) {
        bool found = false;
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (!used[j] && std::abs(lower[j] - std::conj(u)) <= 1e-9 * std::abs(u)) {
                used[j] = true;
                found = true;
                break;
            }
        }
        require(found, "poles are not closed under conjugation");
    }
    struct Group {
        cplx p;
        bool pair;
    };
    std::vector<Group> groups;
    for (const cplx r : reals) groups.push_back({r, false});
    for (const cplx u : upper) groups.push_back({u, true});
    std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        return std::abs(a.p) < std::abs(b.p);
    });
    std::vector<cplx> out;
    out.reserve(poles.size());
    for (const Group& g : groups) {
        out.push_back(g.p);
        if (g.pair) out.push_back(std::conj(g.p));
    }
    return out;
}

inline std::vector<Slot> layout(const std::vector<cplx>& canonical_poles)
{
    std::vector<Slot> slots(canonical_poles.size(), Slot::real);
    for (std::size_t n = 0; n < canonical_poles.size(); ++n) {
        if (canonical_poles[n].imag() > 0.0) {
            slots[n] = Slot::pair_first;
            slots[n + 1] = Slot::pair_second;
            ++n;
        }
    }
    return slots;
}

/// Ns x N real-coefficient partial-fraction basis.
inline Eigen::MatrixXcd basis(const std::vector<cplx>& poles, const std::vector<Slot>& slots, const FrequencyGrid& grid)
{
    const auto ns = static_cast<Eigen::Index>(grid.size());
    const auto n = static_cast<Eigen::Index>(poles.size());
    Eigen::MatrixXcd phi(ns, n);
    const cplx i1(0.0, 1.0);
    for (Eigen::Index k = 0; k < ns; ++k) {
        const cplx s = grid.s(static_cast<std::size_t>(k));
        for (Eigen::Index m = 0; m < n; ++m) {
            const cplx p = poles[static_cast<std::size_t>(m)];
            switch (slots[static_cast<std::size_t>(m)]) {
            case Slot::real: phi(k, m) = 1.0 / (s - p); break;
            case Slot::pair_first: phi(k, m) = 1.0 / (s - p) + 1.0 / (s - std::conj(p)); break;
            case Slot::pair_second: {
                const cplx q = poles[static_cast<std::size_t>(m - 1)];
                phi(k, m) = i1 / (s - q) - i1 / (s - std::conj(q));
                break;
            }
            }
        }
    }
    return phi;
}

/// Stack [Re; Im] so a complex least-squares system with real unknowns
/// becomes an ordinary real one.
inline Eigen::MatrixXd realify(const Eigen::MatrixXcd& m)
{
    Eigen::MatrixXd out(2 * m.rows(), m.cols());
    out.topRows(m.rows()) = m.real();
    out.bottomRows(m.rows()) = m.imag();
    return out;
}

inline Eigen::MatrixXd weights(const FrfDataset& frf, bool inverse_magnitude)
{
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(frf.channels(), frf.bins());
    if (inverse_magnitude) {
        const double floor = 1e-12 * std::max(frf.responses.cwiseAbs().maxCoeff(), 1e-300);
        w = frf.responses.cwiseAbs().cwiseMax(floor).cwiseInverse();
    }
    return w;
}

struct LsSolution {
    Eigen::MatrixXd x;
    bool rank_deficient = false;
};

/// Column-equilibrated least squares with a pivoted-QR rank check.
inline LsSolution solve_scaled(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool allow_rank_deficient,
                               const char* what)
{
    Eigen::VectorXd scale(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double nrm = a.col(j).norm();
        scale(j) = nrm > 0.0 ? 1.0 / nrm : 1.0;
    }
    const Eigen::MatrixXd as = a * scale.asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(as);
    qr.setThreshold(1e-12);
    LsSolution out;
    if (qr.rank() < as.cols()) {
        if (!allow_rank_deficient) throw RankDeficientError(what);
        out.rank_deficient = true;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(as);
        cod.setThreshold(1e-12);
        out.x = scale.asDiagonal() * cod.solve(b);
        return out;
    }
    out.x = scale.asDiagonal() * qr.solve(b);
    return out;
}

/// Least squares on a system whose columns were normalised before a
/// projection, so a pivot below `pivot_tol` means the column carried no
/// information beyond the projected-out part.
inline LsSolution solve_projected(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, bool allow_rank_deficient,
                                  double pivot_tol, const char* what)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::Index rank = 0;
    const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
    for (Eigen::Index i = 0; i < diag.size(); ++i) rank += diag(i) > pivot_tol ? 1 : 0;
    LsSolution out;
    if (rank < a.cols()) {
        if (!allow_rank_deficient) throw RankDeficientError(what);
        out.rank_deficient = true;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
        cod.setThreshold(pivot_tol / std::max(diag.maxCoeff(), pivot_tol));
        out.x = cod.solve(b);
        return out;
    }
    out.x = qr.solve(b);
    return out;
}

/// Largest relative displacement between two pole sets (nearest match).
inline double max_relative_shift(const std::vector<cplx>& before, const std::vector<cplx>& after)
{
    double worst = 0.0;
    for (const cplx a : after) {
        double best = std::numeric_limits<double>::infinity();
        for (const cplx b : before) best = std::min(best, std::abs(a - b));
        worst = std::max(worst, best / std::max(std::abs(a), std::numeric_limits<double>::min()));
    }
    return worst;
}

} // namespace vf_detail

/// N/2 conjugate pairs -beta/100 +- i beta with beta linearly spaced over
/// the band (endpoints included; a single pair sits at the midpoint).
inline std::vector<cplx> init_poles(int order, std::pair<double, double> band_hz)
{
    require(order >= 2 && order % 2 == 0, "order must be even and >= 2");
    require(band_hz.first > 0.0 && band_hz.first < band_hz.second, "band must satisfy 0 < f_lo < f_hi");
    const int pairs = order / 2;
    const double lo = hz_to_rad(band_hz.first);
    const double hi = hz_to_rad(band_hz.second);
    std::vector<cplx> poles;
    poles.reserve(static_cast<std::size_t>(order));
    for (int n = 0; n < pairs; ++n) {
        const double beta = pairs == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * n / (pairs - 1);
        poles.emplace_back(-beta / 100.0, beta);
        poles.emplace_back(-beta / 100.0, -beta);
    }
    return poles;
}

/// One pole relocation: solve for sigma and return its zeros.
inline RelocationResult pole_relocation_step(const FrfDataset& frf, const std::vector<cplx>& poles_in, bool relaxed,
                                             const VfConfig& config = {})
{
    require(!poles_in.empty(), "pole set is empty");
    require(frf.bins() >= 1 && frf.channels() >= 1, "FRF is empty");
    const std::vector<cplx> poles = vf_detail::canonical(poles_in);
    const std::vector<vf_detail::Slot> slots = vf_detail::layout(poles);

    const Eigen::Index ns = frf.bins();
    const Eigen::Index nc = frf.channels();
    const auto n = static_cast<Eigen::Index>(poles.size());
    const Eigen::Index offs = (config.include_d_term ? 1 : 0) + (config.include_e_term ? 1 : 0);
    const Eigen::Index nf = n + offs;
    const Eigen::Index nsig = relaxed ? n + 1 : n;

    const Eigen::MatrixXcd phi = vf_detail::basis(poles, slots, frf.grid);
    const Eigen::MatrixXd w = vf_detail::weights(frf, config.inverse_magnitude_weighting);
    Eigen::VectorXcd s(ns);
    for (Eigen::Index k = 0; k < ns; ++k) s(k) = frf.grid.s(static_cast<std::size_t>(k));

    // sigma columns are normalised over all channels so the reduced blocks
    // can be rank-tested against an absolute threshold.
    Eigen::VectorXd sig_norm = Eigen::VectorXd::Zero(nsig);
    for (Eigen::Index c = 0; c < nc; ++c) {
        const Eigen::VectorXd wh_abs = w.row(c).cwiseProduct(frf.responses.row(c).cwiseAbs()).transpose();
        for (Eigen::Index m = 0; m < n; ++m) sig_norm(m) += wh_abs.cwiseProduct(phi.col(m).cwiseAbs()).squaredNorm();
        if (relaxed) sig_norm(n) += wh_abs.squaredNorm();
    }
    sig_norm = sig_norm.cwiseSqrt();
    for (Eigen::Index m = 0; m < nsig; ++m) {
        if (!(sig_norm(m) > 0.0)) sig_norm(m) = 1.0;
    }
    const Eigen::VectorXcd sig_inv = sig_norm.cwiseInverse().cast<cplx>();

    const Eigen::Index rows = nc * nsig + (relaxed ? 1 : 0);
    Eigen::MatrixXd aa = Eigen::MatrixXd::Zero(rows, nsig);
    Eigen::VectorXd bb = Eigen::VectorXd::Zero(rows);

    for (Eigen::Index c = 0; c < nc; ++c) {
        const Eigen::VectorXcd wc = w.row(c).transpose().cast<cplx>();
        const Eigen::VectorXcd hc = frf.responses.row(c).transpose();
        Eigen::MatrixXcd block(ns, nf + nsig);
        block.leftCols(n) = wc.asDiagonal() * phi;
        Eigen::Index col = n;
        if (config.include_d_term) block.col(col++) = wc;
        if (config.include_e_term) block.col(col++) = wc.cwiseProduct(s);
        const Eigen::VectorXcd wh = wc.cwiseProduct(hc);
        block.middleCols(nf, n) = -(wh.asDiagonal() * phi) * sig_inv.head(n).asDiagonal();
        if (relaxed) block.col(nf + n) = -wh * sig_inv(n);
        for (Eigen::Index m = 0; m < nf; ++m) {
            const double nrm = block.col(m).norm();
            if (nrm > 0.0) block.col(m) /= nrm;
        }

        const Eigen::MatrixXd ar = vf_detail::realify(block);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(ar);
        const Eigen::MatrixXd r = qr.matrixQR().topRows(nf + nsig).triangularView<Eigen::Upper>();
        aa.middleRows(c * nsig, nsig) = r.block(nf, nf, nsig, nsig);
        if (!relaxed) {
            const Eigen::VectorXd br = vf_detail::realify(wh);
            const Eigen::VectorXd qtb = qr.householderQ().adjoint() * br;
            bb.segment(c * nsig, nsig) = qtb.segment(nf, nsig);
        }
    }

    if (relaxed) {
        const double scale = std::sqrt(w.cwiseProduct(frf.responses.cwiseAbs()).squaredNorm()) / static_cast<double>(ns);
        for (Eigen::Index m = 0; m < n; ++m) aa(rows - 1, m) = scale * phi.col(m).sum().real() / sig_norm(m);
        aa(rows - 1, n) = scale * static_cast<double>(ns) / sig_norm(n);
        bb(rows - 1) = scale * static_cast<double>(ns);
    }

    const vf_detail::LsSolution sol =
        vf_detail::solve_projected(aa, bb, config.allow_rank_deficient, 1e-10,
                                   "rank-deficient pole relocation block: model order likely too high");
    const Eigen::VectorXd x = sol.x.col(0).cwiseQuotient(sig_norm);

    double d_hat = 1.0;
    if (relaxed) {
        d_hat = x(n);
        if (!(std::abs(d_hat) > 1e-8)) throw DegenerateRelaxationError("relaxation constant collapsed to zero");
    }

    // sigma(s) = d_hat + C (sI - Lambda)^{-1} B in real block form.
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd bvec = Eigen::VectorXd::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const cplx p = poles[static_cast<std::size_t>(m)];
        switch (slots[static_cast<std::size_t>(m)]) {
        case vf_detail::Slot::real:
            lambda(m, m) = p.real();
            bvec(m) = 1.0;
            break;
        case vf_detail::Slot::pair_first:
            lambda(m, m) = p.real();
            lambda(m, m + 1) = p.imag();
            lambda(m + 1, m) = -p.imag();
            lambda(m + 1, m + 1) = p.real();
            bvec(m) = 2.0;
            bvec(m + 1) = 0.0;
            break;
        case vf_detail::Slot::pair_second: break;
        }
    }
    const Eigen::MatrixXd zeros_matrix = lambda - bvec * x.head(n).transpose() / d_hat;
    Eigen::EigenSolver<Eigen::MatrixXd> es(zeros_matrix, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue solve for sigma zeros failed");

    RelocationResult out;
    out.d_hat = d_hat;
    out.rank_deficient = sol.rank_deficient;
    std::vector<cplx> next;
    next.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index m = 0; m < n; ++m) {
        cplx z = es.eigenvalues()(m);
        if (config.enforce_stable_poles && z.real() > 0.0) {
            z = {-z.real(), z.imag()};
            ++out.reflected;
        }
        next.push_back(z);
    }
    out.poles = vf_detail::canonical(next);
    return out;
}

/// Residues, d and e with the poles frozen. Pairs are solved in the real
/// basis so residue pairs come out exactly conjugate.
inline VfResult residue_identification(const FrfDataset& frf, const std::vector<cplx>& poles_in,
                                       const VfConfig& config = {})
{
    std::vector<cplx> distinct;
    for (const cplx p : poles_in) {
        const bool dup = std::any_of(distinct.begin(), distinct.end(), [p](cplx q) {
            return std::abs(p - q) <= 1e-10 * std::max(std::abs(p), std::abs(q));
        });
        if (!dup) {
            distinct.push_back(p);
        } else if (!config.allow_rank_deficient) {
            throw NumericalError("ill-conditioned basis: near-duplicate poles");
        }
    }
    // Lenient mode merges coincident poles; they span the same basis column.
    const std::vector<cplx> poles = vf_detail::canonical(distinct);
    const std::vector<vf_detail::Slot> slots = vf_detail::layout(poles);
    const auto n = static_cast<Eigen::Index>(poles.size());
    require(n >= 1, "pole set is empty");

    const Eigen::Index ns = frf.bins();
    const Eigen::Index nc = frf.channels();
    const Eigen::Index offs = (config.include_d_term ? 1 : 0) + (config.include_e_term ? 1 : 0);
    const Eigen::Index nf = n + offs;
    const Eigen::MatrixXcd phi = vf_detail::basis(poles, slots, frf.grid);
    Eigen::VectorXcd s(ns);
    for (Eigen::Index k = 0; k < ns; ++k) s(k) = frf.grid.s(static_cast<std::size_t>(k));

    Eigen::MatrixXcd base(ns, nf);
    base.leftCols(n) = phi;
    Eigen::Index col = n;
    if (config.include_d_term) base.col(col++) = Eigen::VectorXcd::Ones(ns);
    if (config.include_e_term) base.col(col++) = s;

    Eigen::MatrixXd coeffs(nf, nc);
    const char* what = "ill-conditioned basis in residue identification";
    if (!config.inverse_magnitude_weighting) {
        const Eigen::MatrixXd ar = vf_detail::realify(base);
        const Eigen::MatrixXd br = vf_detail::realify(Eigen::MatrixXcd(frf.responses.transpose()));
        coeffs = vf_detail::solve_scaled(ar, br, config.allow_rank_deficient, what).x;
    } else {
        const Eigen::MatrixXd w = vf_detail::weights(frf, true);
        for (Eigen::Index c = 0; c < nc; ++c) {
            const Eigen::VectorXcd wc = w.row(c).transpose().cast<cplx>();
            const Eigen::MatrixXd ar = vf_detail::realify(wc.asDiagonal() * base);
            const Eigen::VectorXcd wh = wc.cwiseProduct(frf.responses.row(c).transpose());
            coeffs.col(c) = vf_detail::solve_scaled(ar, vf_detail::realify(wh), config.allow_rank_deficient, what).x;
        }
    }

    VfResult out;
    out.poles = poles;
    out.residues = Eigen::MatrixXcd::Zero(nc, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        switch (slots[static_cast<std::size_t>(m)]) {
        case vf_detail::Slot::real: out.residues.col(m) = coeffs.row(m).transpose().cast<cplx>(); break;
        case vf_detail::Slot::pair_first: {
            const Eigen::VectorXcd r = coeffs.row(m).transpose().cast<cplx>() +
                                       cplx(0.0, 1.0) * coeffs.row(m + 1).transpose().cast<cplx>();
            out.residues.col(m) = r;
            out.residues.col(m + 1) = r.conjugate();
            break;
        }
        case vf_detail::Slot::pair_second: break;
        }
    }
    out.d_term = Eigen::VectorXd::Zero(nc);
    out.e_term = Eigen::VectorXd::Zero(nc);
    col = n;
    if (config.include_d_term) out.d_term = coeffs.row(col++).transpose();
    if (config.include_e_term) out.e_term = coeffs.row(col++).transpose();

    double err2 = 0.0;
    const double data2 = frf.responses.squaredNorm();
    for (Eigen::Index k = 0; k < ns; ++k) {
        err2 += (out.evaluate(s(k)) - frf.responses.col(k)).squaredNorm();
    }
    out.rms_fit_error = data2 > 0.0 ? std::sqrt(err2 / data2) : std::sqrt(err2);
    return out;
}

/// init_poles -> relocation until the poles stop moving (or the iteration
/// cap) -> residues -> modal parameters. Non-convergence is reported via
/// `converged`, not thrown.
inline FrvfOutcome frvf_identify(const FrfDataset& frf, const VfConfig& config = {})
{
    config.validate();
    const std::pair<double, double> band{frf.grid.lo(), frf.grid.hi()};
    std::vector<cplx> poles = vf_detail::canonical(init_poles(config.order, band));

    int reflected = 0;
    int iterations = 0;
    bool converged = false;
    for (int it = 0; it < config.max_iterations; ++it) {
        RelocationResult step;
        try {
            step = pole_relocation_step(frf, poles, config.relaxed, config);
        } catch (const DegenerateRelaxationError&) {
            step = pole_relocation_step(frf, poles, false, config);
        }
        reflected += step.reflected;
        const double shift = vf_detail::max_relative_shift(poles, step.poles);
        poles = std::move(step.poles);
        iterations = it + 1;
        if (shift < config.pole_shift_tolerance) {
            converged = true;
            break;
        }
    }

    VfResult fit = residue_identification(frf, poles, config);
    fit.iterations_used = iterations;
    fit.converged = converged;
    fit.reflected_poles = reflected;

    std::vector<Mode> modes;
    std::vector<DiscardedPole> discarded;
    for (std::size_t m = 0; m < fit.poles.size(); ++m) {
        const cplx p = fit.poles[m];
        if (p.imag() == 0.0) {
            discarded.push_back({p, DiscardReason::real_valued});
            continue;
        }
        if (p.imag() < 0.0) continue;
        if (p.real() >= 0.0) {
            discarded.push_back({p, DiscardReason::unstable});
            continue;
        }
        const double f = rad_to_hz(std::abs(p));
        if (f < band.first || f > band.second) {
            discarded.push_back({p, DiscardReason::out_of_band});
            continue;
        }
        Eigen::VectorXcd shape = fit.residues.col(static_cast<Eigen::Index>(m)) * cplx(0.0, 2.0 * p.imag());
        modes.push_back(Mode::from_pole(p, std::move(shape)));
    }
    return {std::move(fit), ModalParameterSet(std::move(modes), SourceMethod::frvf), std::move(discarded)};
}

} // namespace flutterid
