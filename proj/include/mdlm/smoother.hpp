#ifndef MDLM_SMOOTHER_HPP
#define MDLM_SMOOTHER_HPP

// Conditional posterior of the latent states given theta and the observed
// outcomes, and composition sampling of (theta, alpha).

#include "mdlm/marginal.hpp"
#include "mdlm/rng.hpp"

#include <random>
#include <vector>

namespace mdlm {

template <typename Scalar>
struct LatentPosterior {
    VectorX<Scalar> mean;   ///< K*G, outcome-major (k*G + g)
    MatrixX<Scalar> cov;    ///< K*G x K*G
    std::vector<int> day_grid;  ///< G days (1-based) the states are reported on
    Index outcomes = 0;

    Index grid_size() const { return static_cast<Index>(day_grid.size()); }
    Index row(Index k, Index g) const { return k * grid_size() + g; }
};

/// Full 1..T grid.
inline std::vector<int> full_day_grid(const PatientRecord& record) {
    std::vector<int> g(static_cast<std::size_t>(record.horizon()));
    std::iota(g.begin(), g.end(), 1);
    return g;
}

namespace detail {

template <typename Scalar>
struct LatentPrior {
    std::vector<VectorX<Scalar>> E, V;  // per outcome, full 1..T
};

template <typename Scalar>
LatentPrior<Scalar> latent_prior(const PatientRecord& record, const Theta<Scalar>& theta) {
    const Index K = theta.beta.rows(), T = record.horizon();
    LatentPrior<Scalar> p;
    p.E.resize(K);
    p.V.resize(K);
    for (Index k = 0; k < K; ++k) {
        p.E[k] = latent_mean_sequence(theta.rho(k), theta.phi.row(k), record.covariates_dynamic);
        p.V[k] = latent_variance_sequence(theta.rho(k), theta.sigma_nu(k), theta.sigma_0(k), T);
    }
    return p;
}

inline void check_grid(const std::vector<int>& grid, Index T) {
    for (int d : grid)
        if (d < 1 || d > T) throw std::invalid_argument("day grid entry outside horizon");
}

}  // namespace detail

/// Cov(alpha on the grid, y on the observations): (K*G) x m. Entries pairing
/// different outcomes are exactly zero.
template <typename Scalar>
MatrixX<Scalar> latent_observation_cross_covariance(const PatientRecord& record,
                                                    const Theta<Scalar>& theta,
                                                    const std::vector<int>& grid) {
    detail::check_dims(record, theta);
    detail::check_grid(grid, record.horizon());
    const Index K = theta.beta.rows(), G = static_cast<Index>(grid.size());
    const auto L = observation_layout(record, K);
    const auto prior = detail::latent_prior(record, theta);
    MatrixX<Scalar> C = MatrixX<Scalar>::Zero(K * G, L.size());
    for (Index j = 0; j < L.size(); ++j) {
        const Index k = L.outcome[j];
        for (Index g = 0; g < G; ++g)
            C(k * G + g, j) = latent_cov_entry(prior.V[k], theta.rho(k), Index(grid[g]), Index(L.day[j]));
    }
    return C;
}

/// Gaussian conditioning of the latent states on the observations, reported
/// on `grid` (defaults to every day 1..T).
template <typename Scalar>
LatentPosterior<Scalar> latent_conditional(const PatientRecord& record, const Theta<Scalar>& theta,
                                           std::vector<int> grid = {}) {
    detail::check_dims(record, theta);
    if (grid.empty()) grid = full_day_grid(record);
    detail::check_grid(grid, record.horizon());
    const Index K = theta.beta.rows(), G = static_cast<Index>(grid.size());
    const auto prior = detail::latent_prior(record, theta);

    LatentPosterior<Scalar> post;
    post.day_grid = grid;
    post.outcomes = K;
    post.mean.resize(K * G);
    post.cov = MatrixX<Scalar>::Zero(K * G, K * G);
    for (Index k = 0; k < K; ++k)
        for (Index g = 0; g < G; ++g) {
            post.mean(k * G + g) = prior.E[k](grid[g] - 1);
            for (Index h = 0; h <= g; ++h) {
                const Scalar c = latent_cov_entry(prior.V[k], theta.rho(k), Index(grid[g]), Index(grid[h]));
                post.cov(k * G + g, k * G + h) = c;
                post.cov(k * G + h, k * G + g) = c;
            }
        }
    if (record.observations.empty()) return post;

    const auto L = observation_layout(record, K);
    const auto sys = observed_system(record, L, theta);
    const auto llt = factorize_with_jitter(sys.cov);
    const MatrixX<Scalar> C = latent_observation_cross_covariance(record, theta, grid);
    // W = L^{-1} C', so C S^{-1} C' = W'W and C S^{-1} r = W' L^{-1} r.
    const MatrixX<Scalar> W = llt.matrixL().solve(C.transpose());
    const VectorX<Scalar> z = llt.matrixL().solve(VectorX<Scalar>(sys.values.template cast<Scalar>() - sys.mean));
    post.mean.noalias() += W.transpose() * z;
    post.cov.noalias() -= W.transpose() * W;
    post.cov = (Scalar(0.5) * (post.cov + post.cov.transpose())).eval();
    return post;
}

/// One draw from N(mean, cov). Negative eigenvalues from roundoff are clamped
/// at zero for the draw only.
inline Eigen::VectorXd sample_latent(const LatentPosterior<double>& post, Rng& rng) {
    const Index n = post.mean.size();
    Eigen::VectorXd z(n);
    std::normal_distribution<double> normal;
    for (Index i = 0; i < n; ++i) z(i) = normal(rng);
    if (n == 0) return post.mean;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(post.cov);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return post.mean + eig.eigenvectors() * (root.asDiagonal() * z);
}

inline Eigen::VectorXd sample_latent(const PatientRecord& record, const ThetaParams& theta, Rng& rng) {
    return sample_latent(latent_conditional(record, theta), rng);
}

/// For each theta draw, one latent draw per patient on the full day grid:
/// result[draw][patient]. Patient streams are derived from (seed, draw, patient).
inline std::vector<std::vector<Eigen::VectorXd>> compose_posterior(
    const Cohort& records, const std::vector<ThetaParams>& theta_draws, std::uint64_t seed) {
    std::vector<std::vector<Eigen::VectorXd>> out(theta_draws.size());
    for (std::size_t d = 0; d < theta_draws.size(); ++d) {
        out[d].reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            Rng rng = make_stream(seed, {d, i});
            out[d].push_back(sample_latent(records[i], theta_draws[d], rng));
        }
    }
    return out;
}

}  // namespace mdlm

#endif  // MDLM_SMOOTHER_HPP
