#include "mdlm/simkit.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace mdlm {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
}

ThetaParams default_truth(const ModelDims& dims) {
    const Index K = dims.K;
    ThetaParams th = ThetaParams::zeros(dims);
    const double intercepts[] = {130.0, 80.0};
    const double sds[] = {8.0, 5.0};
    for (Index k = 0; k < K; ++k) {
        th.beta(k, 0) = k < 2 ? intercepts[k] : 100.0;
        for (Index j = 1; j < dims.p; ++j) th.beta(k, j) = (j % 2 == 1 ? 2.0 : -1.5) / double(k + 1);
        for (Index j = 0; j < dims.r; ++j) th.phi(k, j) = -0.5 / double(k + 1);
        th.rho(k) = 0.8;
        th.sigma_nu(k) = 1.0;
        th.sigma_0(k) = 9.0;
    }
    Eigen::VectorXd sd(K);
    for (Index k = 0; k < K; ++k) sd(k) = k < 2 ? sds[k] : 6.0;
    for (Index k = 0; k < K; ++k)
        for (Index l = 0; l < K; ++l) th.sigma_eps(k, l) = sd(k) * sd(l) * (k == l ? 1.0 : 0.6);
    return th;
}

SimulatedCohort simulate_cohort(const SimConfig& cfg) {
    if (cfg.horizon_min < 1 || cfg.horizon_max < cfg.horizon_min)
        throw std::invalid_argument("simulate_cohort: invalid horizon range");
    if (cfg.adherence_prob < 0.0 || cfg.adherence_prob > 1.0)
        throw std::invalid_argument("simulate_cohort: adherence probability must be in [0, 1]");
    if (cfg.replicates < 1) throw std::invalid_argument("simulate_cohort: replicates must be >= 1");
    const auto& th = cfg.theta;
    const ModelDims d = cfg.dims;
    if (th.dims() != d) throw std::invalid_argument("simulate_cohort: theta does not match dims");

    const Eigen::MatrixXd eps_root = psd_sqrt(th.sigma_eps);
    const Eigen::ArrayXd nu_sd = th.sigma_nu.array().cwiseMax(0.0).sqrt();
    const Eigen::ArrayXd init_sd = th.sigma_0.array().cwiseMax(0.0).sqrt();

    SimulatedCohort out;
    out.records.reserve(static_cast<std::size_t>(cfg.patients));
    for (int i = 0; i < cfg.patients; ++i) {
        Rng rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(i)});
        std::normal_distribution<double> normal;
        std::bernoulli_distribution adherent(cfg.adherence_prob), visit(cfg.visit_rate);
        std::uniform_int_distribution<int> horizon(cfg.horizon_min, cfg.horizon_max);

        const int T = horizon(rng);
        PatientRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "P%05d", i + 1);
        rec.id = id;
        rec.covariates_dynamic.resize(T, d.r);
        for (int t = 0; t < T; ++t)
            for (Index j = 0; j < d.r; ++j) rec.covariates_dynamic(t, j) = adherent(rng) ? 1.0 : -1.0;
        rec.covariates_baseline.resize(d.p);
        rec.covariates_baseline(0) = 1.0;
        for (Index j = 1; j < d.p; ++j) rec.covariates_baseline(j) = normal(rng);

        Eigen::MatrixXd alpha(d.K, T);
        for (Index k = 0; k < d.K; ++k) alpha(k, 0) = init_sd(k) * normal(rng);
        for (int t = 1; t < T; ++t)
            for (Index k = 0; k < d.K; ++k)
                alpha(k, t) = th.rho(k) * alpha(k, t - 1) +
                              th.phi.row(k).dot(rec.covariates_dynamic.row(t)) + nu_sd(k) * normal(rng);

        std::vector<int> days;
        if (!cfg.visit_days.empty()) {
            for (int v : cfg.visit_days)
                if (v >= 1 && v <= T) days.push_back(v);
            std::sort(days.begin(), days.end());
            days.erase(std::unique(days.begin(), days.end()), days.end());
        } else {
            days.push_back(1);
            for (int t = 2; t <= T; ++t)
                if (visit(rng)) days.push_back(t);
        }
        const Eigen::VectorXd level = th.beta * rec.covariates_baseline;
        for (int day : days)
            for (int rep = 0; rep < cfg.replicates; ++rep) {
                Eigen::VectorXd z(d.K);
                for (Index k = 0; k < d.K; ++k) z(k) = normal(rng);
                const Eigen::VectorXd eps = eps_root * z;
                for (Index k = 0; k < d.K; ++k)
                    rec.observations.push_back({day, k, level(k) + alpha(k, day - 1) + eps(k), rep});
            }
        out.records.push_back(std::move(rec));
        out.latent.push_back(std::move(alpha));
    }
    if (cfg.missing_rate > 0.0) out.records = mask_adherence(out.records, cfg.missing_rate, cfg.seed);
    return out;
}

Cohort mask_adherence(const Cohort& records, double rate, std::uint64_t seed) {
    Cohort out = records;
    for (std::size_t i = 0; i < out.size(); ++i) {
        Rng rng = make_stream(seed, {0x6d61736bULL, i});
        std::bernoulli_distribution drop(rate);
        auto& c = out[i].covariates_dynamic;
        for (Index t = 0; t < c.rows(); ++t)
            for (Index j = 0; j < c.cols(); ++j)
                if (drop(rng)) c(t, j) = kMissing;
    }
    return out;
}

}  // namespace mdlm
