#ifndef MDLM_MARGINAL_HPP
#define MDLM_MARGINAL_HPP

// Exact marginal moments and log-likelihood of the sparse outcome
// observations with the AR(1) latent states integrated out.

#include "mdlm/core.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mdlm {

/// Latent mean E_t for one outcome: E_1 = 0 and
/// E_t = rho E_{t-1} + phi' c_t for t >= 2. The day-1 covariate never enters.
template <typename Scalar, typename PhiRow, typename Covariates>
VectorX<Scalar> latent_mean_sequence(const Scalar& rho, const Eigen::MatrixBase<PhiRow>& phi,
                                     const Eigen::MatrixBase<Covariates>& covariates) {
    const Index T = covariates.rows();
    if (phi.size() != covariates.cols())
        throw ValidationError("dimension mismatch: phi has " + std::to_string(phi.size()) +
                              " entries, covariates have " + std::to_string(covariates.cols()) +
                              " columns");
    if (!covariates.allFinite()) throw ValidationError("invalid covariate");
    VectorX<Scalar> E(T);
    if (T == 0) return E;
    E(0) = Scalar(0);
    for (Index t = 1; t < T; ++t) {
        Scalar drive(0);
        for (Index j = 0; j < covariates.cols(); ++j)
            drive += phi(j) * Scalar(covariates(t, j));
        E(t) = rho * E(t - 1) + drive;
    }
    return E;
}

/// Latent variance V_t: V_1 = sigma0_sq, V_t = rho^2 V_{t-1} + sigma_nu_sq.
template <typename Scalar>
VectorX<Scalar> latent_variance_sequence(const Scalar& rho, const Scalar& sigma_nu_sq,
                                         const Scalar& sigma0_sq, Index T) {
    if (T < 1) throw std::invalid_argument("latent_variance_sequence: T must be >= 1");
    VectorX<Scalar> V(T);
    V(0) = sigma0_sq;
    const Scalar rho2 = rho * rho;
    for (Index t = 1; t < T; ++t) V(t) = rho2 * V(t - 1) + sigma_nu_sq;
    return V;
}

/// rho^lag for a non-negative integer lag.
template <typename Scalar>
Scalar lag_power(const Scalar& rho, Index lag) {
    using std::pow;
    return lag == 0 ? Scalar(1) : Scalar(pow(rho, static_cast<double>(lag)));
}

/// Latent covariance between days t and s (1-based): rho^|t-s| V_min(t,s).
template <typename Scalar>
Scalar latent_cov_entry(const VectorX<Scalar>& V, const Scalar& rho, Index t, Index s) {
    const Index lo = std::min(t, s);
    return lag_power(rho, std::abs(t - s)) * V(lo - 1);
}

/// T x T covariance of (alpha_1..alpha_T) for one outcome.
template <typename Scalar>
MatrixX<Scalar> latent_covariance_matrix(const VectorX<Scalar>& V, const Scalar& rho) {
    const Index T = V.size();
    MatrixX<Scalar> S(T, T);
    for (Index s = 0; s < T; ++s) {
        S(s, s) = V(s);
        for (Index t = s + 1; t < T; ++t) {
            S(t, s) = lag_power(rho, t - s) * V(s);
            S(s, t) = S(t, s);
        }
    }
    return S;
}

/// Per-record quantities that do not depend on theta: the canonical
/// observation order and the last observed day of each outcome.
struct ObservationLayout {
    std::vector<std::size_t> order;
    std::vector<int> day;
    std::vector<Index> outcome;
    std::vector<int> replicate;
    Eigen::VectorXd values;
    std::vector<int> last_day;  ///< per outcome, 0 when the outcome is never observed

    Index size() const { return static_cast<Index>(order.size()); }
};

inline ObservationLayout observation_layout(const PatientRecord& record, Index K) {
    ObservationLayout L;
    L.order = canonical_order(record);
    const Index m = static_cast<Index>(L.order.size());
    L.day.resize(m);
    L.outcome.resize(m);
    L.replicate.resize(m);
    L.values.resize(m);
    L.last_day.assign(static_cast<std::size_t>(K), 0);
    for (Index j = 0; j < m; ++j) {
        const auto& o = record.observations[L.order[j]];
        if (o.outcome < 0 || o.outcome >= K)
            throw ValidationError("dimension mismatch: outcome index outside [1, K]");
        if (o.day < 1 || o.day > record.horizon())
            throw ValidationError("observation outside horizon");
        L.day[j] = o.day;
        L.outcome[j] = o.outcome;
        L.replicate[j] = o.replicate;
        L.values(j) = o.value;
        L.last_day[o.outcome] = std::max(L.last_day[o.outcome], o.day);
    }
    return L;
}

/// Sampling-error covariance between two observations: readings on the same
/// day with the same replicate number form one measurement vector.
template <typename Scalar>
Scalar noise_cov_entry(const MatrixX<Scalar>& sigma_eps, int day_a, int rep_a, Index k_a,
                       int day_b, int rep_b, Index k_b) {
    return (day_a == day_b && rep_a == rep_b) ? sigma_eps(k_a, k_b) : Scalar(0);
}

template <typename Scalar>
struct MarginalMoments {
    VectorX<Scalar> mean_full;  ///< K*T, outcome-major (k*T + t-1); includes beta_k x
    MatrixX<Scalar> cov_full;   ///< K*T x K*T latent covariance, block diagonal by outcome
    std::vector<Index> index_map;  ///< canonical observation -> row of the full system
    MatrixX<Scalar> sigma_eps;
    Index horizon = 0;
    Index outcomes = 0;
};

/// Mean vector, covariance (latent + sampling error) and observed values over
/// the observation triples, in canonical order.
template <typename Scalar>
struct ObservedSystem {
    VectorX<Scalar> mean;
    MatrixX<Scalar> cov;
    Eigen::VectorXd values;
};

namespace detail {

template <typename Scalar>
void check_dims(const PatientRecord& record, const Theta<Scalar>& theta) {
    const ModelDims d = theta.dims();
    if (record.covariates_baseline.size() != d.p || record.covariates_dynamic.cols() != d.r ||
        theta.rho.size() != d.K || theta.sigma_nu.size() != d.K || theta.sigma_0.size() != d.K ||
        theta.sigma_eps.rows() != d.K || theta.sigma_eps.cols() != d.K || theta.phi.rows() != d.K)
        throw ValidationError("dimension mismatch between record '" + record.id + "' and theta");
}

template <typename Scalar>
Scalar baseline_shift(const PatientRecord& record, const Theta<Scalar>& theta, Index k) {
    Scalar s(0);
    for (Index j = 0; j < theta.beta.cols(); ++j)
        s += theta.beta(k, j) * Scalar(record.covariates_baseline(j));
    return s;
}

}  // namespace detail

/// Full-grid moments: mean over all K*T (outcome, day) cells and the
/// block-diagonal latent covariance. Sampling error is not included here.
template <typename Scalar>
MarginalMoments<Scalar> assemble_marginal(const PatientRecord& record, const Theta<Scalar>& theta) {
    detail::check_dims(record, theta);
    const Index K = theta.beta.rows(), T = record.horizon();
    MarginalMoments<Scalar> mm;
    mm.horizon = T;
    mm.outcomes = K;
    mm.sigma_eps = theta.sigma_eps;
    mm.mean_full.resize(K * T);
    mm.cov_full = MatrixX<Scalar>::Zero(K * T, K * T);
    for (Index k = 0; k < K; ++k) {
        const VectorX<Scalar> E =
            latent_mean_sequence(theta.rho(k), theta.phi.row(k), record.covariates_dynamic);
        const VectorX<Scalar> V =
            latent_variance_sequence(theta.rho(k), theta.sigma_nu(k), theta.sigma_0(k), T);
        mm.mean_full.segment(k * T, T) =
            E.array() + detail::baseline_shift(record, theta, k);
        mm.cov_full.block(k * T, k * T, T, T) = latent_covariance_matrix(V, theta.rho(k));
    }
    const auto order = canonical_order(record);
    mm.index_map.reserve(order.size());
    for (std::size_t j : order) {
        const auto& o = record.observations[j];
        if (o.outcome < 0 || o.outcome >= K) throw ValidationError("dimension mismatch: outcome index");
        if (o.day < 1 || o.day > T) throw ValidationError("observation outside horizon");
        mm.index_map.push_back(o.outcome * T + (o.day - 1));
    }
    return mm;
}

/// Restricts full-grid moments to the observation triples and adds the
/// sampling-error covariance.
template <typename Scalar>
ObservedSystem<Scalar> subset_to_observations(const MarginalMoments<Scalar>& mm,
                                              const PatientRecord& record) {
    const auto order = canonical_order(record);
    const Index m = static_cast<Index>(order.size());
    if (static_cast<Index>(mm.index_map.size()) != m)
        throw std::invalid_argument("subset_to_observations: moments built for another record");
    ObservedSystem<Scalar> sys;
    sys.mean.resize(m);
    sys.cov.resize(m, m);
    sys.values.resize(m);
    for (Index a = 0; a < m; ++a) {
        const auto& oa = record.observations[order[a]];
        sys.mean(a) = mm.mean_full(mm.index_map[a]);
        sys.values(a) = oa.value;
        for (Index b = 0; b <= a; ++b) {
            const auto& ob = record.observations[order[b]];
            Scalar c = mm.cov_full(mm.index_map[a], mm.index_map[b]) +
                       noise_cov_entry(mm.sigma_eps, oa.day, oa.replicate, oa.outcome, ob.day,
                                       ob.replicate, ob.outcome);
            sys.cov(a, b) = c;
            sys.cov(b, a) = c;
        }
    }
    return sys;
}

/// Builds the observed system directly, materializing only the m x m block.
template <typename Scalar>
ObservedSystem<Scalar> observed_system(const PatientRecord& record, const ObservationLayout& L,
                                       const Theta<Scalar>& theta) {
    detail::check_dims(record, theta);
    const Index K = theta.beta.rows(), m = L.size();
    if (!record.covariates_dynamic.allFinite()) throw ValidationError("invalid covariate");

    std::vector<VectorX<Scalar>> E(K), V(K);
    std::vector<Scalar> shift(K);
    for (Index k = 0; k < K; ++k) {
        const Index last = L.last_day[k];
        if (last == 0) continue;
        E[k] = latent_mean_sequence(theta.rho(k), theta.phi.row(k),
                                    record.covariates_dynamic.topRows(last));
        V[k] = latent_variance_sequence(theta.rho(k), theta.sigma_nu(k), theta.sigma_0(k), last);
        shift[k] = detail::baseline_shift(record, theta, k);
    }

    ObservedSystem<Scalar> sys;
    sys.mean.resize(m);
    sys.cov.resize(m, m);
    sys.values = L.values;
    for (Index a = 0; a < m; ++a) {
        const Index ka = L.outcome[a];
        sys.mean(a) = shift[ka] + E[ka](L.day[a] - 1);
        for (Index b = 0; b <= a; ++b) {
            const Index kb = L.outcome[b];
            Scalar c = noise_cov_entry(theta.sigma_eps, L.day[a], L.replicate[a], ka, L.day[b],
                                       L.replicate[b], kb);
            if (ka == kb) c += latent_cov_entry(V[ka], theta.rho(ka), L.day[a], L.day[b]);
            sys.cov(a, b) = c;
            sys.cov(b, a) = c;
        }
    }
    return sys;
}

template <typename Scalar>
ObservedSystem<Scalar> observed_system(const PatientRecord& record, const Theta<Scalar>& theta) {
    return observed_system(record, observation_layout(record, theta.beta.rows()), theta);
}

/// Cholesky factorization with one bounded retry: on failure the diagonal is
/// shifted by 1e-10 times its largest entry. A second failure throws.
template <typename Scalar>
Eigen::LLT<MatrixX<Scalar>> factorize_with_jitter(const MatrixX<Scalar>& cov,
                                                  bool* jittered = nullptr) {
    if (jittered) *jittered = false;
    Eigen::LLT<MatrixX<Scalar>> llt(cov);
    auto good = [&] {
        if (llt.info() != Eigen::Success) return false;
        const auto d = llt.matrixLLT().diagonal();
        return d.allFinite() && (d.array() > Scalar(0)).all();
    };
    if (good()) return llt;
    if (cov.size() > 0) {
        MatrixX<Scalar> shifted = cov;
        shifted.diagonal().array() += Scalar(1e-10) * cov.diagonal().maxCoeff();
        llt.compute(shifted);
        if (jittered) *jittered = true;
        if (good()) return llt;
    }
    throw NumericError("numerically singular system");
}

/// log N(residual; 0, cov) via a triangular factorization.
template <typename Scalar>
Scalar gaussian_log_density(const VectorX<Scalar>& residual, const MatrixX<Scalar>& cov) {
    using std::log;
    const auto llt = factorize_with_jitter(cov);
    const VectorX<Scalar> z = llt.matrixL().solve(residual);
    Scalar logdet(0);
    for (Index i = 0; i < cov.rows(); ++i) logdet += log(llt.matrixLLT()(i, i));
    const Scalar log2pi = Scalar(std::log(2.0 * std::numbers::pi));
    return Scalar(-0.5) * (Scalar(cov.rows()) * log2pi + z.squaredNorm()) - logdet;
}

template <typename Scalar>
Scalar log_marginal_likelihood(const PatientRecord& record, const ObservationLayout& L,
                               const Theta<Scalar>& theta) {
    if (L.size() == 0) throw ValidationError("record '" + record.id + "' has no observations");
    const auto sys = observed_system(record, L, theta);
    const VectorX<Scalar> resid = sys.values.template cast<Scalar>() - sys.mean;
    return gaussian_log_density(resid, sys.cov);
}

template <typename Scalar>
Scalar log_marginal_likelihood(const PatientRecord& record, const Theta<Scalar>& theta) {
    return log_marginal_likelihood(record, observation_layout(record, theta.beta.rows()), theta);
}

/// Sums per-record log-likelihoods. The per-record terms are reduced in a
/// fixed order (by record id, then value) so the total does not depend on
/// the order of the cohort or on how the terms were evaluated.
template <typename Scalar>
class CohortLikelihood {
public:
    CohortLikelihood(const Cohort& records, Index K, unsigned threads = 1)
        : records_(&records), threads_(std::max(1u, threads)) {
        layouts_.reserve(records.size());
        for (const auto& r : records) layouts_.push_back(observation_layout(r, K));
        std::vector<std::size_t> by_id(records.size());
        std::iota(by_id.begin(), by_id.end(), std::size_t{0});
        std::stable_sort(by_id.begin(), by_id.end(),
                         [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
        id_rank_.assign(records.size(), 0);
        for (std::size_t i = 0, rank = 0; i < by_id.size(); ++i) {
            if (i > 0 && records[by_id[i]].id != records[by_id[i - 1]].id) ++rank;
            id_rank_[by_id[i]] = rank;
        }
    }

    const std::vector<ObservationLayout>& layouts() const { return layouts_; }

    Scalar operator()(const Theta<Scalar>& theta) const {
        const std::size_t n = records_->size();
        std::vector<Scalar> terms(n);
        auto work = [&](std::size_t begin, std::size_t end, std::string* error) {
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    terms[i] = log_marginal_likelihood((*records_)[i], layouts_[i], theta);
                } catch (const std::exception& e) {
                    *error = "record '" + (*records_)[i].id + "': " + e.what();
                    return;
                }
            }
        };
        const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(threads_, n));
        std::vector<std::string> errors(std::max(1u, nt));
        if (nt <= 1) {
            work(0, n, &errors[0]);
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (n + nt - 1) / nt;
            for (unsigned w = 0; w < nt; ++w)
                pool.emplace_back(work, std::min(n, w * chunk), std::min(n, (w + 1) * chunk),
                                  &errors[w]);
            for (auto& th : pool) th.join();
        }
        for (const auto& e : errors)
            if (!e.empty()) {
                if (e.find("numerically singular") != std::string::npos) throw NumericError(e);
                throw ValidationError(e);
            }

        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (id_rank_[a] != id_rank_[b]) return id_rank_[a] < id_rank_[b];
            return terms[a] < terms[b];
        });
        Scalar total(0);
        for (std::size_t i : idx) total += terms[i];
        return total;
    }

private:
    const Cohort* records_;
    unsigned threads_;
    std::vector<ObservationLayout> layouts_;
    std::vector<std::size_t> id_rank_;
};

template <typename Scalar>
Scalar cohort_log_likelihood(const Cohort& records, const Theta<Scalar>& theta,
                             unsigned threads = 1) {
    return CohortLikelihood<Scalar>(records, theta.beta.rows(), threads)(theta);
}

/// Long-run latent shift per unit of sustained covariate: (I - rho)^{-1} phi,
/// K x r.
template <typename Scalar>
MatrixX<Scalar> asymptotic_effect(const Theta<Scalar>& theta) {
    MatrixX<Scalar> out = theta.phi;
    for (Index k = 0; k < out.rows(); ++k) out.row(k) /= (Scalar(1) - theta.rho(k));
    return out;
}

}  // namespace mdlm

#endif  // MDLM_MARGINAL_HPP
