#pragma once

// Loewner-framework identification for SIMO frequency responses.
//
// Frequency bins are split into right (lambda) and left (mu) interpolation
// points. Every point is stored next to its conjugate, so a per-pair unitary
// turns the complex pencil into a real one before projection. The
// projection uses the leading singular vectors of [L Ls] (left) and
// [L; Ls] (right), which span the same spaces as zeta*L - Ls for exact data.

#include "flutterid/error.hpp"
#include "flutterid/frf.hpp"
#include "flutterid/linalg.hpp"
#include "flutterid/stabilization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace flutterid {

enum class Partitioning { interleaved, split_half };

inline std::string to_string(Partitioning p) { return p == Partitioning::interleaved ? "interleaved" : "split-half"; }

inline Partitioning partitioning_from_string(const std::string& s)
{
    if (s == "interleaved") return Partitioning::interleaved;
    if (s == "split-half" || s == "split_half") return Partitioning::split_half;
    throw ValidationError("unknown partitioning '" + s + "' (valid: interleaved, split-half)");
}

/// Right data (lambda_i, r_i, w_i) and left data (mu_j, l_j, v_j).
/// Entries 2q and 2q+1 of each side are a point and its conjugate.
struct TangentialData {
    Eigen::VectorXcd lambda;  ///< rho right points
    Eigen::MatrixXcd R;       ///< m x rho right directions
    Eigen::MatrixXcd W;       ///< p x rho right values  H(lambda_i) r_i
    Eigen::VectorXcd mu;      ///< nu left points
    Eigen::MatrixXcd L;       ///< nu x p left directions
    Eigen::MatrixXcd V;       ///< nu x m left values  l_j H(mu_j)

    Eigen::Index right_count() const { return lambda.size(); }
    Eigen::Index left_count() const { return mu.size(); }
    Eigen::Index outputs() const { return W.rows(); }
    Eigen::Index inputs() const { return R.rows(); }
};

struct LfConfig {
    std::optional<int> order;  ///< explicit k; otherwise sweep or automatic
    std::vector<int> sweep_orders{6, 8, 10, 12, 14, 16, 18, 20, 22, 24};  ///< empty -> automatic k
    double tau = 1e-10;        ///< relative singular-value threshold
    Partitioning partitioning = Partitioning::interleaved;
    std::uint64_t direction_seed = 1;
    int min_consecutive = 3;

    void validate() const
    {
        if (order) require(*order >= 1, "explicit order must be >= 1");
        for (int k : sweep_orders) require(k >= 1, "sweep orders must be >= 1");
        require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
        require(min_consecutive >= 1, "min_consecutive must be >= 1");
    }
};

struct LoewnerPencil {
    Eigen::MatrixXcd L;   ///< nu x rho
    Eigen::MatrixXcd Ls;  ///< nu x rho
    Eigen::MatrixXcd V;   ///< nu x m
    Eigen::MatrixXcd W;   ///< p x rho
    TangentialData data;

    Eigen::Index rows() const { return L.rows(); }
    Eigen::Index cols() const { return L.cols(); }
};

/// The pencil after the per-pair unitary transform; all blocks are real.
struct RealPencil {
    Eigen::MatrixXd L, Ls, V, W;
};

namespace lf_detail {

inline void check_pairs(const Eigen::VectorXcd& pts, const char* side)
{
    require(pts.size() % 2 == 0, std::string(side) + " points must come in conjugate pairs");
    for (Eigen::Index q = 0; q < pts.size(); q += 2) {
        require(pts(q + 1) == std::conj(pts(q)) && pts(q).imag() != 0.0,
                std::string(side) + " points must be stored as adjacent conjugate pairs");
    }
}

/// Rows 2q, 2q+1 of M replaced by J^H [row_a; row_b], J = [[1,-i],[1,i]]/sqrt2.
inline Eigen::MatrixXd realify_rows(const Eigen::MatrixXcd& m)
{
    const double r2 = std::sqrt(2.0);
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index q = 0; q < m.rows(); q += 2) {
        out.row(q) = (m.row(q) + m.row(q + 1)).real() / r2;
        out.row(q + 1) = (m.row(q) - m.row(q + 1)).imag() / -r2;
    }
    return out;
}

/// Row-transformed matrix (complex, still holding column pairs) to real
/// form by the same unitary on column pairs.
inline Eigen::MatrixXd realify_cols(const Eigen::MatrixXcd& m)
{
    const double r2 = std::sqrt(2.0);
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index q = 0; q < m.cols(); q += 2) {
        out.col(q) = (m.col(q) + m.col(q + 1)).real() / r2;
        out.col(q + 1) = (m.col(q) - m.col(q + 1)).imag() / r2;
    }
    return out;
}

/// J_l^H M J_r for a matrix whose rows and columns are both pair-ordered.
inline Eigen::MatrixXd realify_both(const Eigen::MatrixXcd& m)
{
    const double h = 0.5;
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index a = 0; a < m.rows(); a += 2) {
        for (Eigen::Index b = 0; b < m.cols(); b += 2) {
            const cplx m00 = m(a, b), m01 = m(a, b + 1), m10 = m(a + 1, b), m11 = m(a + 1, b + 1);
            // J^H [[m00, m01],[m10, m11]] J
            const cplx s00 = m00 + m01 + m10 + m11;
            const cplx s01 = cplx(0, 1) * (-m00 + m01 - m10 + m11);
            const cplx s10 = cplx(0, 1) * (m00 + m01 - m10 - m11);
            const cplx s11 = m00 - m01 - m10 + m11;
            out(a, b) = h * s00.real();
            out(a, b + 1) = h * s01.real();
            out(a + 1, b) = h * s10.real();
            out(a + 1, b + 1) = h * s11.real();
        }
    }
    return out;
}

} // namespace lf_detail

/// Splits the bins into right/left sets and closes both under conjugation.
/// Right directions are 1 (single input); left directions are random real
/// unit rows drawn from `direction_seed`.
inline TangentialData partition_data(const FrfDataset& frf, const LfConfig& config = {})
{
    require(frf.bins() >= 4, "Loewner partitioning needs at least 4 frequency bins");
    const Eigen::Index n = frf.bins();
    const Eigen::Index p = frf.channels();

    std::vector<Eigen::Index> right, left;
    for (Eigen::Index j = 0; j < n; ++j) {
        const bool to_right = config.partitioning == Partitioning::interleaved ? (j % 2 == 0) : (j < (n + 1) / 2);
        (to_right ? right : left).push_back(j);
    }

    TangentialData td;
    const auto rho = static_cast<Eigen::Index>(2 * right.size());
    const auto nu = static_cast<Eigen::Index>(2 * left.size());
    td.lambda.resize(rho);
    td.R = Eigen::MatrixXcd::Ones(1, rho);
    td.W.resize(p, rho);
    for (std::size_t q = 0; q < right.size(); ++q) {
        const auto i = static_cast<Eigen::Index>(2 * q);
        const cplx s = frf.grid.s(static_cast<std::size_t>(right[q]));
        td.lambda(i) = s;
        td.lambda(i + 1) = std::conj(s);
        td.W.col(i) = frf.responses.col(right[q]);
        td.W.col(i + 1) = frf.responses.col(right[q]).conjugate();
    }

    std::mt19937_64 rng(config.direction_seed);
    std::normal_distribution<double> normal;
    td.mu.resize(nu);
    td.L.resize(nu, p);
    td.V.resize(nu, 1);
    for (std::size_t q = 0; q < left.size(); ++q) {
        const auto j = static_cast<Eigen::Index>(2 * q);
        Eigen::RowVectorXd dir(p);
        for (Eigen::Index c = 0; c < p; ++c) dir(c) = normal(rng);
        dir /= dir.norm();
        const cplx s = frf.grid.s(static_cast<std::size_t>(left[q]));
        const cplx value = (dir.cast<cplx>() * frf.responses.col(left[q]))(0);
        td.mu(j) = s;
        td.mu(j + 1) = std::conj(s);
        td.L.row(j) = dir.cast<cplx>();
        td.L.row(j + 1) = dir.cast<cplx>();
        td.V(j, 0) = value;
        td.V(j + 1, 0) = std::conj(value);
    }
    return td;
}

/// L[j,i] = (v_j r_i - l_j w_i)/(mu_j - lambda_i),
/// Ls[j,i] = (mu_j v_j r_i - lambda_i l_j w_i)/(mu_j - lambda_i).
inline LoewnerPencil build_pencil(const TangentialData& td)
{
    const Eigen::Index rho = td.right_count();
    const Eigen::Index nu = td.left_count();
    require(rho >= 1 && nu >= 1, "tangential data is empty");
    require(td.R.cols() == rho && td.W.cols() == rho, "right data blocks disagree in size");
    require(td.L.rows() == nu && td.V.rows() == nu, "left data blocks disagree in size");
    require(td.L.cols() == td.W.rows() && td.V.cols() == td.R.rows(), "direction dimensions disagree");

    const Eigen::MatrixXcd vr = td.V * td.R;  // nu x rho
    const Eigen::MatrixXcd lw = td.L * td.W;  // nu x rho
    LoewnerPencil pencil;
    pencil.L.resize(nu, rho);
    pencil.Ls.resize(nu, rho);
    for (Eigen::Index i = 0; i < rho; ++i) {
        const cplx lam = td.lambda(i);
        for (Eigen::Index j = 0; j < nu; ++j) {
            const cplx mu = td.mu(j);
            const cplx den = mu - lam;
            if (den == cplx(0.0)) throw ValidationError("left and right interpolation points coincide");
            pencil.L(j, i) = (vr(j, i) - lw(j, i)) / den;
            pencil.Ls(j, i) = (mu * vr(j, i) - lam * lw(j, i)) / den;
        }
    }
    pencil.V = td.V;
    pencil.W = td.W;
    pencil.data = td;
    return pencil;
}

/// ||L Lambda - M L - (L W - V R)||_F / ||L||_F.
inline double sylvester_residual(const LoewnerPencil& p)
{
    const TangentialData& td = p.data;
    const Eigen::MatrixXcd lhs = p.L * td.lambda.asDiagonal() - td.mu.asDiagonal() * p.L;
    const Eigen::MatrixXcd rhs = td.L * td.W - td.V * td.R;
    return (lhs - rhs).norm() / p.L.norm();
}

/// ||Ls Lambda - M Ls - (L W Lambda - M V R)||_F / ||Ls||_F.
inline double shifted_sylvester_residual(const LoewnerPencil& p)
{
    const TangentialData& td = p.data;
    const Eigen::MatrixXcd lhs = p.Ls * td.lambda.asDiagonal() - td.mu.asDiagonal() * p.Ls;
    const Eigen::MatrixXcd rhs = td.L * td.W * td.lambda.asDiagonal() - td.mu.asDiagonal() * td.V * td.R;
    return (lhs - rhs).norm() / p.Ls.norm();
}

/// Per-pair unitary transform to a real pencil. Requires adjacent
/// conjugate pairs on both sides and conjugate-consistent data.
inline RealPencil real_pencil(const LoewnerPencil& p)
{
    lf_detail::check_pairs(p.data.lambda, "right");
    lf_detail::check_pairs(p.data.mu, "left");
    RealPencil r;
    r.L = lf_detail::realify_both(p.L);
    r.Ls = lf_detail::realify_both(p.Ls);
    r.V = lf_detail::realify_rows(p.V);
    r.W = lf_detail::realify_cols(p.W);
    return r;
}

/// Pencil projected onto its leading singular subspaces. Because the
/// order-k bases are the first k columns of the order-kmax bases, every
/// order-k realization is a leading block of the stored matrices.
struct LoewnerProjection {
    Eigen::MatrixXd E, A;  ///< kmax x kmax: -Y^T L X, -Y^T Ls X
    Eigen::MatrixXd B;     ///< kmax x m:    Y^T V
    Eigen::MatrixXd C;     ///< p x kmax:    W X
    Eigen::VectorXd row_singular_values;  ///< of [L Ls]
    Eigen::VectorXd col_singular_values;  ///< of [L; Ls]

    Eigen::Index max_order() const { return E.rows(); }

    /// Count of singular values of [L Ls] above tau * sigma_max among those
    /// computed (a lower bound on the numerical rank when all pass).
    Eigen::Index numerical_rank(double tau) const
    {
        const double cut = tau * row_singular_values(0);
        Eigen::Index k = 0;
        while (k < row_singular_values.size() && row_singular_values(k) > cut) ++k;
        return k;
    }
};

inline LoewnerProjection project(const LoewnerPencil& pencil, Eigen::Index max_order, std::uint64_t seed = 0x10e)
{
    require(max_order >= 1, "order must be >= 1");
    const Eigen::Index nu = pencil.rows();
    const Eigen::Index rho = pencil.cols();
    require(max_order <= std::min(nu, rho), "order exceeds the number of interpolation points per side");
    const RealPencil rp = real_pencil(pencil);

    Eigen::MatrixXd rowcat(nu, 2 * rho);
    rowcat << rp.L, rp.Ls;
    if (!(rowcat.cwiseAbs().maxCoeff() > 0.0)) throw NumericalError("Loewner pencil is identically zero");
    const TruncatedSvd left = leading_svd(rowcat, max_order, seed);
    rowcat.resize(0, 0);
    Eigen::MatrixXd colcat(2 * nu, rho);
    colcat << rp.L, rp.Ls;
    const TruncatedSvd right = leading_svd(colcat, max_order, seed + 1);
    colcat.resize(0, 0);

    LoewnerProjection proj;
    const Eigen::MatrixXd& Y = left.U;
    const Eigen::MatrixXd& X = right.V;
    proj.E = -(Y.transpose() * (rp.L * X));
    proj.A = -(Y.transpose() * (rp.Ls * X));
    proj.B = Y.transpose() * rp.V;
    proj.C = rp.W * X;
    proj.row_singular_values = left.S;
    proj.col_singular_values = right.S;
    return proj;
}

/// Descriptor realization of order k from a projection:
/// E = -Y^T L X, A = -Y^T Ls X, B = Y^T V, C = W X, D = 0.
inline StateSpaceRealization realize(const LoewnerProjection& proj, Eigen::Index k)
{
    require(k >= 1 && k <= proj.max_order(), "order outside the computed projection");
    StateSpaceRealization r;
    r.E = proj.E.topLeftCorner(k, k).cast<cplx>();
    r.A = proj.A.topLeftCorner(k, k).cast<cplx>();
    r.B = proj.B.topRows(k).cast<cplx>();
    r.C = proj.C.leftCols(k).cast<cplx>();
    r.D = Eigen::MatrixXcd::Zero(r.C.rows(), r.B.cols());
    return r;
}

/// Order-k realization; throws if k exceeds the numerical rank.
inline StateSpaceRealization realize(const LoewnerPencil& pencil, Eigen::Index k, double tau = 1e-10)
{
    require(k >= 1 && k <= std::min(pencil.rows(), pencil.cols()), "order must satisfy 1 <= k <= min(nu, rho)");
    const LoewnerProjection proj = project(pencil, k);
    if (proj.numerical_rank(tau) < k) {
        throw NumericalError("order " + std::to_string(k) + " exceeds numerical rank " +
                             std::to_string(proj.numerical_rank(tau)) + " of the Loewner pencil");
    }
    return realize(proj, k);
}

struct OrderEstimate {
    Eigen::Index order = 0;
    Eigen::Index threshold_count = 0;  ///< singular values above tau * sigma_max
    Eigen::Index gap_count = 0;        ///< position of the largest ratio sigma_i / sigma_{i+1}
    Eigen::VectorXd singular_values;   ///< leading values examined
    std::optional<std::string> warning;
};

/// Order from the singular values of [L Ls]: the threshold count, unless
/// it disagrees with the largest-gap count by more than 2 (noisy data),
/// in which case the gap count is used and a warning attached. Only the
/// leading `probe` values are examined.
inline OrderEstimate estimate_order(const LoewnerPencil& pencil, double tau = 1e-10, Eigen::Index probe = 48)
{
    require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
    const RealPencil rp = real_pencil(pencil);
    const Eigen::Index nu = rp.L.rows();
    const Eigen::Index rho = rp.L.cols();
    Eigen::MatrixXd rowcat(nu, 2 * rho);
    rowcat << rp.L, rp.Ls;
    if (!(rowcat.cwiseAbs().maxCoeff() > 0.0)) throw NumericalError("Loewner pencil is identically zero");
    probe = std::min(probe, std::min(nu, 2 * rho));

    OrderEstimate est;
    est.singular_values = leading_svd(rowcat, probe).S;
    const Eigen::VectorXd& sv = est.singular_values;
    const double cut = tau * sv(0);
    while (est.threshold_count < sv.size() && sv(est.threshold_count) > cut) ++est.threshold_count;

    // Values below round-off are floored so exact zeros in the tail do not
    // produce a spurious infinite gap.
    const double floor = sv(0) * std::numeric_limits<double>::epsilon() * static_cast<double>(rowcat.cols());
    double best = 0.0;
    est.gap_count = sv.size();
    for (Eigen::Index i = 0; i + 1 < sv.size(); ++i) {
        const double ratio = std::max(sv(i), floor) / std::max(sv(i + 1), floor);
        if (ratio > best) {
            best = ratio;
            est.gap_count = i + 1;
        }
    }
    est.order = est.threshold_count;
    if (std::abs(est.threshold_count - est.gap_count) > 2) {
        est.order = est.gap_count;
        est.warning = "singular-value threshold count " + std::to_string(est.threshold_count) +
                      " disagrees with largest-gap count " + std::to_string(est.gap_count) +
                      "; using the gap (noisy data?)";
    }
    return est;
}

/// max over interpolation points of |H(point) direction - data| / |data|.
inline double interpolation_residual(const StateSpaceRealization& r, const TangentialData& td)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < td.right_count(); ++i) {
        const Eigen::VectorXcd got = r.transfer(td.lambda(i)) * td.R.col(i);
        const double e = (got - td.W.col(i)).norm() / td.W.col(i).norm();
        if (!(e <= worst)) worst = e;  // NaN propagates
    }
    for (Eigen::Index j = 0; j < td.left_count(); ++j) {
        const Eigen::RowVectorXcd got = td.L.row(j) * r.transfer(td.mu(j));
        const double e = (got - td.V.row(j)).norm() / td.V.row(j).norm();
        if (!(e <= worst)) worst = e;
    }
    return worst;
}

struct LfOutcome {
    ModalParameterSet modes;
    std::vector<DiscardedPole> discarded;          ///< at the single or highest order
    std::optional<StabilizationDiagram> diagram;   ///< order sweeps only
    std::optional<OrderEstimate> estimate;         ///< automatic order only
    Eigen::Index numerical_rank = 0;               ///< lower bound from the computed spectrum
    std::vector<std::string> warnings;
};

/// partition -> pencil -> projection -> realization(s) -> modes.
/// Explicit order: one realization, rejected if above the numerical rank.
/// Order sweep: each order is capped at the numerical rank and the modes
/// are consolidated over a stabilization diagram. Neither: automatic order.
inline LfOutcome lf_identify(const FrfDataset& frf, const LfConfig& config = {})
{
    config.validate();
    const std::pair<double, double> band{frf.grid.lo(), frf.grid.hi()};
    const LoewnerPencil pencil = build_pencil(partition_data(frf, config));
    const Eigen::Index cap = std::min(pencil.rows(), pencil.cols());

    LfOutcome out;
    auto single = [&](Eigen::Index k) {
        require(k <= cap, "order " + std::to_string(k) + " exceeds the interpolation points per side");
        const LoewnerProjection proj = project(pencil, k);
        out.numerical_rank = proj.numerical_rank(config.tau);
        if (out.numerical_rank < k) {
            throw NumericalError("order " + std::to_string(k) + " exceeds numerical rank " +
                                 std::to_string(out.numerical_rank) + " of the Loewner pencil");
        }
        ModalExtraction ex = realization_to_modal(realize(proj, k), band, SourceMethod::lf);
        out.modes = std::move(ex.modes);
        out.discarded = std::move(ex.discarded);
    };

    if (config.order) {
        single(*config.order);
        return out;
    }
    if (config.sweep_orders.empty()) {
        OrderEstimate est = estimate_order(pencil, config.tau);
        if (est.warning) out.warnings.push_back(*est.warning);
        const Eigen::Index k = std::max<Eigen::Index>(est.order, 1);
        out.estimate = std::move(est);
        single(k);
        return out;
    }

    const int kmax = *std::max_element(config.sweep_orders.begin(), config.sweep_orders.end());
    require(kmax <= cap, "sweep order " + std::to_string(kmax) + " exceeds the interpolation points per side");
    const LoewnerProjection proj = project(pencil, kmax);
    out.numerical_rank = proj.numerical_rank(config.tau);
    if (out.numerical_rank < kmax) {
        out.warnings.push_back("orders above the numerical rank " + std::to_string(out.numerical_rank) +
                               " were realized at that rank");
    }
    int highest_done = 0;
    auto identify = [&](int k) {
        const Eigen::Index used = std::min<Eigen::Index>(k, std::max<Eigen::Index>(out.numerical_rank, 1));
        ModalExtraction ex = realization_to_modal(realize(proj, used), band, SourceMethod::lf);
        if (k >= highest_done) {
            highest_done = k;
            out.discarded = ex.discarded;
        }
        return ex.modes;
    };
    out.diagram = build_diagram(identify, config.sweep_orders);
    out.modes = consolidate_modes(*out.diagram, config.min_consecutive, SourceMethod::lf);
    return out;
}

} // namespace flutterid
