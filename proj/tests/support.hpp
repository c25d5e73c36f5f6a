#ifndef MDLM_TESTS_SUPPORT_HPP
#define MDLM_TESTS_SUPPORT_HPP

#include "mdlm/rng.hpp"
#include "mdlm/sampler.hpp"
#include "mdlm/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace mdlm::testing {

/// Parameters drawn from the default priors.
inline ThetaParams prior_theta(const ModelDims& d, Rng& rng, const PriorSpec& prior = {}) {
    const auto params = dlm_parameters(d, prior);
    Eigen::VectorXd v(static_cast<Index>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) v(i) = params[i].prior.draw(rng);
    return theta_from_values(d, v);
}

/// Record with random adherence and baseline covariates and `n_visits`
/// random visit days (repeats allowed). Each visit reads a random non-empty
/// subset of outcomes; values are N(level, spread^2).
inline PatientRecord random_record(const ModelDims& d, Index T, int n_visits, Rng& rng,
                                   double level = 100.0, double spread = 30.0) {
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin(0.5), adherent(0.85);
    std::uniform_int_distribution<int> day(1, static_cast<int>(T));
    PatientRecord r;
    r.id = "R" + std::to_string(rng() % 1000000);
    r.covariates_dynamic.resize(T, d.r);
    for (Index i = 0; i < r.covariates_dynamic.size(); ++i) r.covariates_dynamic.data()[i] = adherent(rng) ? 1.0 : -1.0;
    r.covariates_baseline.resize(d.p);
    r.covariates_baseline(0) = 1.0;
    for (Index j = 1; j < d.p; ++j) r.covariates_baseline(j) = normal(rng);
    std::map<std::pair<int, Index>, int> reps;
    for (int v = 0; v < n_visits; ++v) {
        const int t = day(rng);
        bool any = false;
        for (Index k = 0; k < d.K; ++k) {
            if (!coin(rng) && !(k == d.K - 1 && !any)) continue;
            any = true;
            r.observations.push_back({t, k, level + spread * normal(rng), reps[{t, k}]++});
        }
    }
    return r;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

/// Two-sided one-sample Kolmogorov-Smirnov statistic.
template <typename Cdf>
double ks_statistic(std::vector<double> x, Cdf cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - i / n, (i + 1) / n - f});
    }
    return d;
}

/// K = p = r = 1; the last three arguments are variances.
inline ThetaParams scalar_theta(double beta, double rho, double phi, double s_eps, double s_nu, double s0) {
    ThetaParams th = ThetaParams::zeros({1, 1, 1});
    th.beta(0, 0) = beta;
    th.rho(0) = rho;
    th.phi(0, 0) = phi;
    th.sigma_eps(0, 0) = s_eps;
    th.sigma_nu(0) = s_nu;
    th.sigma_0(0) = s0;
    return th;
}

}  // namespace mdlm::testing

#endif  // MDLM_TESTS_SUPPORT_HPP
