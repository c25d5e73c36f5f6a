#ifndef MDLM_KALMAN_HPP
#define MDLM_KALMAN_HPP

// Sequential state-space computations used as an independent check on the
// marginal and smoother modules: prediction-error likelihood and a
// Rauch-Tung-Striebel fixed-interval smoother. Nothing here may depend on
// marginal.hpp or smoother.hpp.

#include "mdlm/errors.hpp"
#include "mdlm/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>
#include <vector>

namespace mdlm::kalman {

namespace detail {

struct DayObs {
    int replicate;
    Index outcome;
    double value;
};

/// Observations grouped per day; within a day the stacked vector is ordered
/// by (replicate, outcome).
inline std::map<int, std::vector<DayObs>> group_by_day(const PatientRecord& record) {
    std::map<int, std::vector<DayObs>> days;
    for (const auto& o : record.observations) days[o.day].push_back({o.replicate, o.outcome, o.value});
    for (auto& [day, v] : days)
        std::sort(v.begin(), v.end(), [](const DayObs& a, const DayObs& b) {
            return std::tie(a.replicate, a.outcome) < std::tie(b.replicate, b.outcome);
        });
    return days;
}

template <typename Scalar>
struct Model {
    MatrixX<Scalar> transition;  // diag(rho)
    MatrixX<Scalar> drive;       // phi
    MatrixX<Scalar> state_noise; // diag(sigma_nu)
    MatrixX<Scalar> initial;     // diag(sigma_0)
    VectorX<Scalar> level;       // beta x
};

template <typename Scalar>
Model<Scalar> build_model(const PatientRecord& record, const Theta<Scalar>& theta) {
    if (record.covariates_baseline.size() != theta.beta.cols() ||
        record.covariates_dynamic.cols() != theta.phi.cols())
        throw ValidationError("dimension mismatch between record '" + record.id + "' and theta");
    Model<Scalar> m;
    m.transition = theta.rho.asDiagonal();
    m.drive = theta.phi;
    m.state_noise = theta.sigma_nu.asDiagonal();
    m.initial = theta.sigma_0.asDiagonal();
    m.level = theta.beta * record.covariates_baseline.template cast<Scalar>();
    return m;
}

template <typename Scalar>
struct Pass {
    std::vector<VectorX<Scalar>> a_pred, a_filt;
    std::vector<MatrixX<Scalar>> P_pred, P_filt;
    Scalar loglik = Scalar(0);
};

template <typename Scalar>
Pass<Scalar> forward(const PatientRecord& record, const Theta<Scalar>& theta, Index T) {
    const Index K = theta.beta.rows();
    const auto model = build_model(record, theta);
    const auto days = group_by_day(record);
    for (const auto& [d, v] : days)
        if (d < 1 || d > record.horizon()) throw ValidationError("observation outside horizon");
    if (!record.covariates_dynamic.allFinite()) throw ValidationError("invalid covariate");

    Pass<Scalar> pass;
    VectorX<Scalar> a = VectorX<Scalar>::Zero(K);
    MatrixX<Scalar> P = model.initial;
    const Scalar log2pi = Scalar(std::log(2.0 * std::numbers::pi));
    for (Index t = 1; t <= T; ++t) {
        if (t > 1) {
            a = model.transition * a +
                model.drive * record.covariates_dynamic.row(t - 1).transpose().template cast<Scalar>();
            P = model.transition * P * model.transition + model.state_noise;
        }
        pass.a_pred.push_back(a);
        pass.P_pred.push_back(P);

        auto it = days.find(static_cast<int>(t));
        if (it != days.end()) {
            const auto& obs = it->second;
            const Index n = static_cast<Index>(obs.size());
            MatrixX<Scalar> Z = MatrixX<Scalar>::Zero(n, K);
            MatrixX<Scalar> R(n, n);
            VectorX<Scalar> v(n);
            for (Index i = 0; i < n; ++i) {
                Z(i, obs[i].outcome) = Scalar(1);
                v(i) = Scalar(obs[i].value) - model.level(obs[i].outcome) - a(obs[i].outcome);
                for (Index j = 0; j < n; ++j)
                    R(i, j) = obs[i].replicate == obs[j].replicate
                                  ? theta.sigma_eps(obs[i].outcome, obs[j].outcome)
                                  : Scalar(0);
            }
            const MatrixX<Scalar> PZt = P * Z.transpose();
            const MatrixX<Scalar> F = Z * PZt + R;
            Eigen::LLT<MatrixX<Scalar>> llt(F);
            if (llt.info() != Eigen::Success) throw NumericError("numerically singular system");
            const VectorX<Scalar> w = llt.matrixL().solve(v);
            Scalar logdet(0);
            for (Index i = 0; i < n; ++i) logdet += Scalar(2) * std::log(llt.matrixLLT()(i, i));
            pass.loglik += Scalar(-0.5) * (Scalar(n) * log2pi + logdet + w.squaredNorm());
            const MatrixX<Scalar> gain = llt.solve(PZt.transpose()).transpose();
            a = a + gain * v;
            P = P - gain * PZt.transpose();
            P = (Scalar(0.5) * (P + P.transpose())).eval();
        }
        pass.a_filt.push_back(a);
        pass.P_filt.push_back(P);
    }
    return pass;
}

}  // namespace detail

/// Prediction-error decomposition of the log-likelihood, day by day over
/// 1..(last observed day); unobserved days contribute only a prediction step.
template <typename Scalar>
Scalar kalman_loglik(const PatientRecord& record, const Theta<Scalar>& theta) {
    int last = 0;
    for (const auto& o : record.observations) last = std::max(last, o.day);
    if (last == 0) throw ValidationError("record '" + record.id + "' has no observations");
    return detail::forward(record, theta, last).loglik;
}

template <typename Scalar>
struct Smoothed {
    MatrixX<Scalar> mean;              ///< K x T
    std::vector<MatrixX<Scalar>> cov;  ///< T matrices of K x K
};

/// Fixed-interval smoothed moments of alpha_t for every day 1..T.
template <typename Scalar>
Smoothed<Scalar> kalman_smoother(const PatientRecord& record, const Theta<Scalar>& theta) {
    const Index T = record.horizon();
    const Index K = theta.beta.rows();
    auto pass = detail::forward(record, theta, T);
    const MatrixX<Scalar> D = theta.rho.asDiagonal();
    Smoothed<Scalar> out;
    out.mean.resize(K, T);
    out.cov.resize(static_cast<std::size_t>(T));
    VectorX<Scalar> a_s = pass.a_filt[T - 1];
    MatrixX<Scalar> P_s = pass.P_filt[T - 1];
    out.mean.col(T - 1) = a_s;
    out.cov[T - 1] = P_s;
    for (Index t = T - 2; t >= 0; --t) {
        const MatrixX<Scalar>& Pf = pass.P_filt[t];
        const MatrixX<Scalar>& Pp = pass.P_pred[t + 1];
        // J = Pf D' Pp^{-1}
        const MatrixX<Scalar> J = Pp.ldlt().solve(D * Pf).transpose();
        a_s = pass.a_filt[t] + J * (a_s - pass.a_pred[t + 1]);
        P_s = Pf + J * (P_s - Pp) * J.transpose();
        P_s = (Scalar(0.5) * (P_s + P_s.transpose())).eval();
        out.mean.col(t) = a_s;
        out.cov[t] = P_s;
    }
    return out;
}

}  // namespace mdlm::kalman

#endif  // MDLM_KALMAN_HPP
