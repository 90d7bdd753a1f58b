#pragma once

// Frequency-response data model, pole <-> modal conversions, the synthetic
// FRF generator and modal extraction from descriptor realizations.

#include "flutterid/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace flutterid {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double hz_to_rad(double hz) { return two_pi * hz; }
inline double rad_to_hz(double rad) { return rad / two_pi; }

// ---------------------------------------------------------------------------
// FrequencyGrid

/// Strictly increasing, positive frequency samples. Stored in Hz; the
/// angular accessors are the only place the 2*pi factor appears.
class FrequencyGrid {
public:
    FrequencyGrid() = default;

    explicit FrequencyGrid(std::vector<double> hz) : hz_(std::move(hz))
    {
        require(hz_.size() >= 2, "frequency grid needs at least 2 points");
        for (std::size_t i = 0; i < hz_.size(); ++i) {
            require(std::isfinite(hz_[i]) && hz_[i] > 0.0, "frequency grid values must be finite and > 0");
            if (i > 0) require(hz_[i] > hz_[i - 1], "non-monotonic grid");
        }
    }

    static FrequencyGrid from_rad_per_s(const std::vector<double>& omega)
    {
        std::vector<double> hz(omega.size());
        std::transform(omega.begin(), omega.end(), hz.begin(), rad_to_hz);
        return FrequencyGrid(std::move(hz));
    }

    /// n points from lo to hi inclusive.
    static FrequencyGrid linspace(double lo_hz, double hi_hz, std::size_t n)
    {
        require(n >= 2, "frequency grid needs at least 2 points");
        require(lo_hz > 0.0 && hi_hz > lo_hz, "invalid frequency band");
        std::vector<double> hz(n);
        const double step = (hi_hz - lo_hz) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) hz[i] = lo_hz + step * static_cast<double>(i);
        hz.back() = hi_hz;
        return FrequencyGrid(std::move(hz));
    }

    std::size_t size() const { return hz_.size(); }
    const std::vector<double>& hz() const { return hz_; }
    double hz(std::size_t i) const { return hz_[i]; }
    double omega(std::size_t i) const { return hz_to_rad(hz_[i]); }
    cplx s(std::size_t i) const { return {0.0, omega(i)}; }
    double lo() const { return hz_.front(); }
    double hi() const { return hz_.back(); }

    bool operator==(const FrequencyGrid&) const = default;

private:
    std::vector<double> hz_;
};

// ---------------------------------------------------------------------------
// FrfDataset

enum class FrfKind { receptance, mobility, accelerance };

inline std::string to_string(FrfKind kind)
{
    switch (kind) {
    case FrfKind::receptance: return "receptance";
    case FrfKind::mobility: return "mobility";
    case FrfKind::accelerance: return "accelerance";
    }
    return "receptance";
}

inline FrfKind frf_kind_from_string(const std::string& text)
{
    if (text == "receptance") return FrfKind::receptance;
    if (text == "mobility") return FrfKind::mobility;
    if (text == "accelerance") return FrfKind::accelerance;
    throw ValidationError("unknown FRF kind '" + text + "'");
}

/// SIMO frequency response: one row per output channel, one column per bin.
struct FrfDataset {
    FrequencyGrid grid;
    Eigen::MatrixXcd responses;
    FrfKind kind = FrfKind::receptance;
    std::vector<std::string> labels;

    FrfDataset() = default;

    FrfDataset(FrequencyGrid g, Eigen::MatrixXcd h, FrfKind k = FrfKind::receptance,
               std::vector<std::string> channel_labels = {})
        : grid(std::move(g)), responses(std::move(h)), kind(k), labels(std::move(channel_labels))
    {
        require(responses.rows() >= 1, "FRF needs at least one channel");
        require(static_cast<std::size_t>(responses.cols()) == grid.size(),
                "FRF column count must equal the grid length");
        require(responses.allFinite(), "FRF contains NaN or infinite entries");
        if (labels.empty()) {
            for (Eigen::Index c = 0; c < responses.rows(); ++c) labels.push_back("ch" + std::to_string(c + 1));
        }
        require(labels.size() == static_cast<std::size_t>(responses.rows()),
                "channel label count must equal the channel count");
    }

    Eigen::Index channels() const { return responses.rows(); }
    Eigen::Index bins() const { return responses.cols(); }

    /// Same data expressed as receptance: mobility = i*w*H, accelerance = -w^2*H.
    FrfDataset to_receptance() const
    {
        if (kind == FrfKind::receptance) return *this;
        Eigen::MatrixXcd h = responses;
        for (Eigen::Index j = 0; j < h.cols(); ++j) {
            const cplx iw = grid.s(static_cast<std::size_t>(j));
            h.col(j) /= (kind == FrfKind::mobility) ? iw : iw * iw;
        }
        return FrfDataset(grid, std::move(h), FrfKind::receptance, labels);
    }

    /// Bins whose frequency lies in [lo, hi], as a new dataset.
    FrfDataset restricted(double lo_hz, double hi_hz) const
    {
        std::vector<double> hz;
        std::vector<Eigen::Index> keep;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid.hz(i) >= lo_hz && grid.hz(i) <= hi_hz) {
                hz.push_back(grid.hz(i));
                keep.push_back(static_cast<Eigen::Index>(i));
            }
        }
        require(keep.size() >= 2, "band selects fewer than 2 frequency bins");
        Eigen::MatrixXcd h(channels(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) h.col(static_cast<Eigen::Index>(j)) = responses.col(keep[j]);
        return FrfDataset(FrequencyGrid(std::move(hz)), std::move(h), kind, labels);
    }
};

// ---------------------------------------------------------------------------
// Poles and modes

struct ModalPoint {
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
};

/// f = |s| / 2pi, zeta = -Re(s) / |s|.
inline ModalPoint pole_to_modal(cplx pole)
{
    const double mag = std::abs(pole);
    require(mag > 0.0 && std::isfinite(mag), "pole must have non-zero finite magnitude");
    return {rad_to_hz(mag), -pole.real() / mag};
}

/// Upper half-plane pole -zeta*wn + i*wn*sqrt(1 - zeta^2).
inline cplx modal_to_pole(double frequency_hz, double damping_ratio)
{
    require(frequency_hz > 0.0, "natural frequency must be positive");
    require(damping_ratio >= 0.0 && damping_ratio < 1.0, "damping ratio must lie in [0, 1)");
    const double wn = hz_to_rad(frequency_hz);
    return {-damping_ratio * wn, wn * std::sqrt(1.0 - damping_ratio * damping_ratio)};
}

struct Mode {
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
    cplx pole{};             ///< upper half-plane member of the conjugate pair (rad/s)
    Eigen::VectorXcd shape;  ///< one entry per output channel; may be empty

    double omega_n() const { return hz_to_rad(frequency_hz); }
    double omega_d() const { return pole.imag(); }

    static Mode from_modal(double frequency_hz, double damping_ratio, Eigen::VectorXcd shape = {})
    {
        return {frequency_hz, damping_ratio, modal_to_pole(frequency_hz, damping_ratio), std::move(shape)};
    }

    static Mode from_pole(cplx pole, Eigen::VectorXcd shape = {})
    {
        if (pole.imag() < 0.0) pole = std::conj(pole);
        const ModalPoint mp = pole_to_modal(pole);
        return {mp.frequency_hz, mp.damping_ratio, pole, std::move(shape)};
    }
};

enum class SourceMethod { frvf, lf, external };

inline std::string to_string(SourceMethod m)
{
    switch (m) {
    case SourceMethod::frvf: return "frvf";
    case SourceMethod::lf: return "lf";
    case SourceMethod::external: return "external";
    }
    return "external";
}

struct ModalParameterSet {
    std::vector<Mode> modes;
    SourceMethod source_method = SourceMethod::external;

    ModalParameterSet() = default;
    ModalParameterSet(std::vector<Mode> m, SourceMethod method) : modes(std::move(m)), source_method(method)
    {
        std::stable_sort(modes.begin(), modes.end(),
                         [](const Mode& a, const Mode& b) { return a.frequency_hz < b.frequency_hz; });
    }

    std::size_t size() const { return modes.size(); }
    bool empty() const { return modes.empty(); }
    const Mode& operator[](std::size_t i) const { return modes[i]; }
};

// ---------------------------------------------------------------------------
// Descriptor realization

/// E x' = A x + B u, y = C x + D u.
struct StateSpaceRealization {
    Eigen::MatrixXcd E, A, B, C, D;

    Eigen::Index order() const { return A.rows(); }

    void validate() const
    {
        const Eigen::Index k = A.rows();
        require(k >= 1, "realization must have at least one state");
        require(A.cols() == k && E.rows() == k && E.cols() == k, "E and A must be square and equal-sized");
        require(B.rows() == k && C.cols() == k, "B rows and C columns must equal the state dimension");
        require(D.rows() == C.rows() && D.cols() == B.cols(), "D must be p x m");
    }

    /// C (sE - A)^{-1} B + D.
    Eigen::MatrixXcd transfer(cplx s) const
    {
        Eigen::MatrixXcd pencil = s * E - A;
        return C * pencil.fullPivLu().solve(B) + D;
    }
};

enum class DiscardReason { real_valued, unstable, out_of_band, infinite, indeterminate };

inline std::string to_string(DiscardReason r)
{
    switch (r) {
    case DiscardReason::real_valued: return "real-valued";
    case DiscardReason::unstable: return "unstable";
    case DiscardReason::out_of_band: return "out-of-band";
    case DiscardReason::infinite: return "infinite";
    case DiscardReason::indeterminate: return "indeterminate";
    }
    return "unknown";
}

struct DiscardedPole {
    cplx value;
    DiscardReason reason;
};

struct ModalExtraction {
    ModalParameterSet modes;
    std::vector<DiscardedPole> discarded;
};

namespace detail {

inline bool is_effectively_real(const Eigen::MatrixXcd& m)
{
    const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
    return m.imag().cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

/// Unit-norm null vector of (A - lambda E), phase-aligned so the largest
/// component is real and positive.
inline Eigen::VectorXcd null_vector(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& E, cplx lambda)
{
    Eigen::MatrixXcd m = A - lambda * E;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
    Eigen::VectorXcd v = svd.matrixV().col(m.cols() - 1);
    return v;
}

inline Eigen::VectorXcd normalise_shape(Eigen::VectorXcd v)
{
    if (v.size() == 0) return v;
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const double n = v.norm();
    if (n == 0.0) return v;
    const cplx phase = std::abs(v(imax)) > 0.0 ? std::conj(v(imax)) / std::abs(v(imax)) : cplx(1.0);
    return v * phase / n;
}

} // namespace detail

/// Generalized eigenanalysis A v = lambda E v. Keeps oscillatory, stable
/// poles whose natural frequency lies in the band; everything else goes to
/// the discard report with the reason it was dropped. Conjugate mirrors
/// (Im < 0) of retained poles are implied and not listed.
inline ModalExtraction realization_to_modal(const StateSpaceRealization& r, std::pair<double, double> band_hz,
                                            SourceMethod method = SourceMethod::external)
{
    r.validate();
    require(band_hz.first < band_hz.second, "band must satisfy lo < hi");
    const Eigen::Index k = r.order();

    std::vector<cplx> eigenvalues;
    std::vector<DiscardedPole> discarded;

    if (detail::is_effectively_real(r.A) && detail::is_effectively_real(r.E)) {
        const Eigen::MatrixXd A = r.A.real();
        const Eigen::MatrixXd E = r.E.real();
        Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(A, E, false);
        if (ges.info() != Eigen::Success) throw NumericalError("generalized eigenvalue solve failed");
        const double tol = 1e-13 * std::max({A.norm(), E.norm(), 1e-300});
        const Eigen::VectorXcd alphas = ges.alphas();
        const Eigen::VectorXd betas = ges.betas();
        std::size_t indeterminate = 0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const cplx alpha = alphas(i);
            const double beta = betas(i);
            if (std::abs(alpha) <= tol && std::abs(beta) <= tol) {
                ++indeterminate;
                discarded.push_back({cplx(std::numeric_limits<double>::quiet_NaN()), DiscardReason::indeterminate});
            } else if (std::abs(beta) <= tol) {
                discarded.push_back({cplx(std::numeric_limits<double>::infinity()), DiscardReason::infinite});
            } else {
                eigenvalues.push_back(alpha / beta);
            }
        }
        if (indeterminate == static_cast<std::size_t>(k)) throw NumericalError("singular pencil");
    } else {
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(r.E);
        if (!lu.isInvertible()) throw NumericalError("singular pencil: E not invertible in the complex path");
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(lu.solve(r.A), false);
        if (ces.info() != Eigen::Success) throw NumericalError("eigenvalue solve failed");
        for (Eigen::Index i = 0; i < k; ++i) eigenvalues.push_back(ces.eigenvalues()(i));
    }

    std::vector<Mode> modes;
    for (const cplx lambda : eigenvalues) {
        const double mag = std::abs(lambda);
        if (!std::isfinite(mag) || mag == 0.0) {
            discarded.push_back({lambda, DiscardReason::real_valued});
            continue;
        }
        if (std::abs(lambda.imag()) <= 1e-9 * mag) {
            discarded.push_back({lambda, DiscardReason::real_valued});
            continue;
        }
        if (lambda.imag() < 0.0) continue;
        if (lambda.real() >= 0.0) {
            discarded.push_back({lambda, DiscardReason::unstable});
            continue;
        }
        const double f = rad_to_hz(mag);
        if (f < band_hz.first || f > band_hz.second) {
            discarded.push_back({lambda, DiscardReason::out_of_band});
            continue;
        }
        Eigen::VectorXcd v = detail::null_vector(r.A, r.E, lambda);
        modes.push_back(Mode::from_pole(lambda, detail::normalise_shape(r.C * v)));
    }
    if (modes.empty()) throw NumericalError("no eigenvalue in band");
    return {ModalParameterSet(std::move(modes), method), std::move(discarded)};
}

// ---------------------------------------------------------------------------
// Synthetic FRF

/// Receptance residue of `mode` at every channel: shape / (2 i wd).
inline Eigen::VectorXcd modal_residue(const Mode& mode)
{
    return mode.shape / cplx(0.0, 2.0 * mode.omega_d());
}

/// Evaluate sum_n [A_n/(s - s_n) + conj(A_n)/(s - conj(s_n))] at an arbitrary
/// complex s, one value per channel.
inline Eigen::VectorXcd evaluate_modal_model(const ModalParameterSet& modes, cplx s)
{
    require(!modes.empty(), "modal model needs at least one mode");
    const Eigen::Index p = modes[0].shape.size();
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(p);
    for (const Mode& m : modes.modes) {
        const Eigen::VectorXcd a = modal_residue(m);
        h += a / (s - m.pole) + a.conjugate() / (s - std::conj(m.pole));
    }
    return h;
}

/// Receptance FRF of a modal model sampled on `grid`, with optional complex
/// circular Gaussian noise whose RMS is `noise_rms_fraction` times the RMS of
/// each clean channel. Deterministic for a fixed seed.
inline FrfDataset synthesize_frf(const ModalParameterSet& modes, const FrequencyGrid& grid,
                                 double noise_rms_fraction = 0.0, std::uint64_t seed = 0)
{
    require(!modes.empty(), "empty mode set");
    const Eigen::Index p = modes[0].shape.size();
    require(p >= 1, "modes need a shape vector");
    for (const Mode& m : modes.modes) require(m.shape.size() == p, "inconsistent shape lengths");
    require(noise_rms_fraction >= 0.0 && std::isfinite(noise_rms_fraction), "noise fraction must be >= 0");

    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXcd h(p, n);
    for (Eigen::Index j = 0; j < n; ++j) h.col(j) = evaluate_modal_model(modes, grid.s(static_cast<std::size_t>(j)));

    if (noise_rms_fraction > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index c = 0; c < p; ++c) {
            const double rms = std::sqrt(h.row(c).squaredNorm() / static_cast<double>(n));
            const double sigma = noise_rms_fraction * rms / std::sqrt(2.0);
            for (Eigen::Index j = 0; j < n; ++j) {
                const double re = normal(rng);
                const double im = normal(rng);
                h(c, j) += cplx(sigma * re, sigma * im);
            }
        }
    }
    return FrfDataset(grid, std::move(h), FrfKind::receptance);
}

} // namespace flutterid
