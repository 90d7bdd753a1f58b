#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>

namespace flutterid {

/// Leading singular triplets: A ~= U diag(S) V^T, columns ordered by
/// decreasing singular value.
struct TruncatedSvd {
    Eigen::MatrixXd U;
    Eigen::VectorXd S;
    Eigen::MatrixXd V;
};

namespace detail {

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

} // namespace detail

/// Short SVD keeping `rank` triplets. Small problems use a dense
/// divide-and-conquer SVD; large ones use a randomized range finder with
/// power iterations, which costs O(m n rank) instead of O(m n min(m,n)).
/// Deterministic for a fixed seed.
inline TruncatedSvd leading_svd(const Eigen::MatrixXd& a, Eigen::Index rank, std::uint64_t seed = 0x5eed)
{
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    const Eigen::Index full = std::min(m, n);
    rank = std::clamp<Eigen::Index>(rank, 1, full);

    constexpr Eigen::Index dense_limit = 400;
    constexpr Eigen::Index oversample = 12;
    constexpr int power_iterations = 3;

    TruncatedSvd out;
    if (full <= dense_limit || rank + oversample >= full / 2) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.U = svd.matrixU().leftCols(rank);
        out.S = svd.singularValues().head(rank);
        out.V = svd.matrixV().leftCols(rank);
        return out;
    }

    const Eigen::Index l = rank + oversample;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd omega(n, l);
    for (Eigen::Index j = 0; j < l; ++j)
        for (Eigen::Index i = 0; i < n; ++i) omega(i, j) = normal(rng);

    Eigen::MatrixXd q = detail::orthonormal_basis(a * omega);
    for (int it = 0; it < power_iterations; ++it) {
        const Eigen::MatrixXd z = detail::orthonormal_basis(a.transpose() * q);
        q = detail::orthonormal_basis(a * z);
    }
    const Eigen::MatrixXd b = q.transpose() * a;  // l x n
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = q * svd.matrixU().leftCols(rank);
    out.S = svd.singularValues().head(rank);
    out.V = svd.matrixV().leftCols(rank);
    return out;
}

} // namespace flutterid
