// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
// MDLM_ACCEPTANCE_COHORTS sets the number of recovery cohorts (default 5).
// MDLM_ACCEPTANCE_ONLY restricts the run to a comma-separated list of numbers.

#include "mdlm/baselines.hpp"
#include "mdlm/imputation.hpp"
#include "mdlm/io.hpp"
#include "mdlm/kalman.hpp"
#include "mdlm/marginal.hpp"
#include "mdlm/sampler.hpp"
#include "mdlm/simkit.hpp"
#include "mdlm/smoother.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using namespace mdlm;
using mdlm::testing::ks_statistic;
using mdlm::testing::prior_theta;
using mdlm::testing::random_record;
using mdlm::testing::rel_diff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double sd_of(const Eigen::VectorXd& x) {
    return std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1));
}

double interval_width(const ChainSet& cs, const std::string& name) {
    const Eigen::VectorXd v = cs.pooled(cs.index_of(name));
    const std::vector<double> x(v.data(), v.data() + v.size());
    return quantile(x, 0.95) - quantile(x, 0.05);
}

Outcome likelihood_oracle() {
    Stopwatch sw;
    Rng rng = make_stream(1001);
    std::uniform_int_distribution<int> horizon(1, 50), visits(1, 8), pick_k(1, 3);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ModelDims d{pick_k(rng), 2, 1};
        const auto th = prior_theta(d, rng);
        const auto r = random_record(d, horizon(rng), visits(rng), rng);
        worst = std::max(worst, rel_diff(log_marginal_likelihood(r, th), kalman::kalman_loglik(r, th)));
    }
    const double t = sw.seconds();
    return {worst < 1e-8 && t < 60.0, fmt("max rel err %.2e over 1000 instances (limit 1e-8), %.1f s (limit 60 s)", worst, t)};
}

Outcome smoother_oracle() {
    Stopwatch sw;
    Rng rng = make_stream(1002);
    std::uniform_int_distribution<int> horizon(1, 50), visits(1, 8), pick_k(1, 3);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const ModelDims d{pick_k(rng), 2, 1};
        const auto th = prior_theta(d, rng);
        const auto r = random_record(d, horizon(rng), visits(rng), rng);
        const auto post = latent_conditional(r, th);
        const auto ks = kalman::kalman_smoother(r, th);
        for (Index t = 0; t < r.horizon(); ++t)
            for (Index k = 0; k < d.K; ++k) {
                const Index row = post.row(k, t);
                worst = std::max(worst, rel_diff(post.mean(row), ks.mean(k, t)));
                worst = std::max(worst, rel_diff(post.cov(row, row), ks.cov[t](k, k)));
            }
    }
    const double t = sw.seconds();
    return {worst < 1e-8 && t < 60.0, fmt("max rel err %.2e over 200 instances (limit 1e-8), %.1f s (limit 60 s)", worst, t)};
}

Outcome recursions() {
    Rng rng = make_stream(1003);
    std::uniform_int_distribution<int> horizon(2, 200);
    double mean_err = 0.0, var_err = 0.0;
    for (int i = 0; i < 500; ++i) {
        const ModelDims d{1 + i % 3, 2, 2};
        const auto th = prior_theta(d, rng);
        const auto r = random_record(d, horizon(rng), 2, rng);
        const auto mm = assemble_marginal(r, th);
        const Index T = r.horizon();
        const Eigen::VectorXd shift = th.beta * r.covariates_baseline;
        for (Index k = 0; k < d.K; ++k) {
            const auto V = latent_variance_sequence(th.rho(k), th.sigma_nu(k), th.sigma_0(k), T);
            for (Index t = 1; t < T; ++t) {
                const double prev = mm.mean_full(k * T + t - 1) - shift(k);
                const double cur = mm.mean_full(k * T + t) - shift(k);
                const double drift = th.phi.row(k).dot(r.covariates_dynamic.row(t));
                mean_err = std::max(mean_err, std::abs(cur - (th.rho(k) * prev + drift)) / std::max(1.0, std::abs(cur)));
                const double v = th.rho(k) * th.rho(k) * V(t - 1) + th.sigma_nu(k);
                var_err = std::max(var_err, std::abs(V(t) - v) / std::max(1.0, std::abs(v)));
            }
        }
    }
    return {mean_err < 1e-10 && var_err < 1e-12,
            fmt("mean recursion err %.2e (limit 1e-10), variance recursion err %.2e (limit 1e-12)", mean_err, var_err)};
}

Outcome asymptotics() {
    ThetaParams th = mdlm::testing::scalar_theta(0.0, 0.9, -0.5, 1.0, 1.0, 1.0);
    const double limit = asymptotic_effect(th)(0, 0);
    const auto E = latent_mean_sequence(0.9, th.phi.row(0), Eigen::MatrixXd::Ones(1000, 1));
    double worst = 0.0;
    for (Index t = 199; t < 1000; ++t) worst = std::max(worst, std::abs(E(t) - limit));

    const double rho = 1.0 - 0.48 / 3.87;
    const double anchored = asymptotic_effect(mdlm::testing::scalar_theta(0.0, rho, -0.48, 1.0, 1.0, 1.0))(0, 0);
    const bool three_dp = std::round(anchored * 1000.0) == -3870.0;
    return {worst < 1e-6 && three_dp,
            fmt("max |E_t - phi/(1-rho)| for t >= 200: %.2e (limit 1e-6); phi=-0.48 at rho=%.4f gives %.3f (want -3.870)",
                worst, rho, anchored)};
}

Outcome parameter_recovery() {
    int cohorts = 5;
    if (const char* env = std::getenv("MDLM_ACCEPTANCE_COHORTS")) cohorts = std::max(1, std::atoi(env));
    const ModelDims d{2, 1, 1};
    const auto truth = default_truth(d);
    const Eigen::VectorXd truth_values = values_from_theta(d, truth);
    const auto names = [&] {
        std::vector<std::string> n;
        for (const auto& p : dlm_parameters(d, {})) n.push_back(p.name);
        return n;
    }();
    std::vector<int> covered(names.size(), 0);
    double worst_rhat = 0.0;
    Stopwatch sw;
    for (int c = 0; c < cohorts; ++c) {
        SimConfig sc;
        sc.dims = d;
        sc.theta = truth;
        sc.patients = 200;
        sc.horizon_min = sc.horizon_max = 100;
        sc.visit_rate = 2.0 / 99.0;  // day 1 plus about two more
        sc.seed = 5000 + static_cast<std::uint64_t>(c);
        const auto cohort = simulate_cohort(sc).records;
        SamplerConfig cfg;
        cfg.seed = 7000 + static_cast<std::uint64_t>(c);
        const auto cs = run_chains(cohort, d, {}, cfg);
        const auto summary = summarize(cs, 0.90);
        for (std::size_t j = 0; j < names.size(); ++j) {
            const double v = truth_values(static_cast<Index>(j));
            if (summary[j].lower <= v && v <= summary[j].upper) ++covered[j];
            worst_rhat = std::max(worst_rhat, summary[j].rhat);
        }
        std::printf("    cohort %d done (%.0f s), max R-hat %.3f\n", c + 1, sw.seconds(), cs.rhat.maxCoeff());
        std::fflush(stdout);
    }
    bool ok = worst_rhat < 1.1;
    std::ostringstream os;
    os << "coverage over " << cohorts << " cohorts:";
    for (std::size_t j = 0; j < names.size(); ++j) {
        os << ' ' << names[j] << '=' << covered[j] << '/' << cohorts;
        ok = ok && covered[j] >= 0.8 * cohorts;
    }
    os << fmt("; max R-hat %.3f (limit 1.1); %.0f s", worst_rhat, sw.seconds());
    return {ok, os.str()};
}

Outcome prior_recovery() {
    Rng rng = make_stream(1006);
    const ModelDims d{2, 2, 1};
    const Cohort cohort{random_record(d, 10, 2, rng)};
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.warmup = 5000;
    cfg.draws = 12500;
    cfg.thin = 50;
    cfg.seed = 1006;
    cfg.use_likelihood = false;
    const auto cs = run_chains(cohort, d, {}, cfg);
    const auto params = dlm_parameters(d, {});
    double worst = 0.0;
    std::string worst_name;
    for (Index j = 0; j < cs.n_params(); ++j) {
        const Prior& p = params[j].prior;
        const Eigen::VectorXd v = cs.pooled(j);
        const std::vector<double> x(v.data(), v.data() + v.size());
        const double ks = ks_statistic(x, [&](double t) { return p.cdf(t); });
        if (ks > worst) {
            worst = ks;
            worst_name = cs.names[j];
        }
    }
    return {worst < 0.02, fmt("max KS %.4f at %s over %ld draws (limit 0.02)", worst, worst_name.c_str(),
                              static_cast<long>(cs.n_chains() * cs.n_draws()))};
}

Outcome imputation() {
    // Exact Beta counts for the 29-of-82 patient.
    PatientRecord r;
    r.id = "p";
    r.covariates_dynamic = Eigen::MatrixXd::Constant(82, 1, -1.0);
    r.covariates_dynamic.topRows(29).setOnes();
    r.covariates_baseline = Eigen::VectorXd::Ones(1);
    r.observations = {{1, 0, 130.0, 0}};
    const auto post = adherence_posterior(r);
    const bool counts = post.alpha() == 30.0 && post.beta() == 54.0;

    // Monte Carlo imputed rate.
    PatientRecord g = r;
    g.covariates_dynamic = Eigen::MatrixXd::Constant(102, 1, -1.0);
    g.covariates_dynamic.topRows(40).setOnes();
    g.covariates_dynamic.bottomRows(48).setConstant(kMissing);
    const auto gp = adherence_posterior(g);
    const int M = 10000;
    const auto sets = impute_cohort({g}, M, 1007);
    Eigen::VectorXd frac(M);
    for (int m = 0; m < M; ++m)
        frac(m) = (sets[m][0].covariates_dynamic.col(0).tail(48).array() > 0.0).cast<double>().mean();
    const double se = sd_of(frac) / std::sqrt(static_cast<double>(M));
    const double z = (frac.mean() - gp.mean()) / se;

    // Interval width with 5% of adherence days missing.
    const ModelDims d{2, 1, 1};
    SimConfig sc;
    sc.dims = d;
    sc.theta = default_truth(d);
    sc.patients = 80;
    sc.horizon_min = sc.horizon_max = 60;
    sc.visit_rate = 4.0 / 59.0;
    sc.seed = 1007;
    const auto complete = simulate_cohort(sc).records;
    SamplerConfig cfg;
    cfg.warmup = 2000;
    cfg.draws = 5000;
    const auto masked = mask_adherence(complete, 0.05, 1008);
    const auto imputed = impute_cohort(masked, 20, 1009);
    // The complete-data reference gets the same number of fits and seeds, so
    // both widths carry comparable Monte Carlo error.
    std::vector<ChainSet> fits, reference;
    for (std::size_t m = 0; m < imputed.size(); ++m) {
        cfg.seed = 100 + m;
        fits.push_back(run_chains(imputed[m], d, {}, cfg));
        reference.push_back(run_chains(complete, d, {}, cfg));
    }
    const auto pooled = pool_draws(fits);
    const auto full = pool_draws(reference);
    double worst_ratio = 1.0;
    std::string ratios;
    for (const char* name : {"phi[1,1]", "phi[2,1]"}) {
        const double ratio = interval_width(pooled, name) / interval_width(full, name);
        if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = ratio;
        ratios += fmt(" %s=%.3f", name, ratio);
    }
    return {counts && std::abs(z) < 2.0 && std::abs(worst_ratio - 1.0) < 0.10,
            fmt("Beta(%g,%g) (want Beta(30,54)); imputed rate %.4f vs %.4f, z=%.2f (limit 2); width ratio imputed/complete:%s (limit 10%%)",
                post.alpha(), post.beta(), frac.mean(), gp.mean(), z, ratios.c_str())};
}

double joint_gaussian_baseline(const Cohort& cohort, const ModelDims& d, const BaselineTheta& th,
                               const BaselineModelSpec& spec) {
    std::vector<double> y, mu;
    std::vector<std::tuple<std::size_t, int, int, Index>> who;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const Eigen::VectorXd level = th.beta * cohort[i].covariates_baseline + th.gamma * summarize_adherence(cohort[i], spec);
        for (const auto& o : cohort[i].observations) {
            y.push_back(o.value);
            mu.push_back(level(o.outcome));
            who.emplace_back(i, o.day, o.replicate, o.outcome);
        }
    }
    const Index m = static_cast<Index>(y.size()), q = static_cast<Index>(cohort.size()) * d.K;
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(m, m), Z = Eigen::MatrixXd::Zero(m, q);
    for (Index a = 0; a < m; ++a) {
        const auto [ia, da, ra, ka] = who[a];
        Z(a, static_cast<Index>(ia) * d.K + ka) = 1.0;
        for (Index b = 0; b < m; ++b) {
            const auto [ib, db, rb, kb] = who[b];
            if (ia == ib) noise(a, b) = noise_cov_entry(th.sigma_eps, da, ra, ka, db, rb, kb);
        }
    }
    // Full joint covariance of (y, delta), then the y marginal by block selection.
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(m + q, m + q);
    Eigen::VectorXd D(q);
    for (std::size_t i = 0; i < cohort.size(); ++i) D.segment(static_cast<Index>(i) * d.K, d.K) = th.sigma_delta;
    joint.topLeftCorner(m, m) = noise + Z * D.asDiagonal() * Z.transpose();
    joint.topRightCorner(m, q) = Z * D.asDiagonal();
    joint.bottomLeftCorner(q, m) = D.asDiagonal() * Z.transpose();
    joint.bottomRightCorner(q, q) = D.asDiagonal();
    // log p(y) = log p(y, delta = 0) - log p(delta = 0 | y)
    Eigen::VectorXd point(m + q);
    point << Eigen::Map<Eigen::VectorXd>(y.data(), m) - Eigen::Map<Eigen::VectorXd>(mu.data(), m), Eigen::VectorXd::Zero(q);
    auto logpdf = [](const Eigen::VectorXd& r, const Eigen::MatrixXd& cov) {
        const Eigen::LLT<Eigen::MatrixXd> llt(cov);
        const Eigen::VectorXd z = llt.matrixL().solve(r);
        return -0.5 * z.squaredNorm() - Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum() -
               0.5 * static_cast<double>(r.size()) * std::log(2.0 * M_PI);
    };
    const Eigen::LLT<Eigen::MatrixXd> yy(joint.topLeftCorner(m, m));
    const Eigen::MatrixXd gain = joint.bottomLeftCorner(q, m) * yy.solve(Eigen::MatrixXd::Identity(m, m));
    const Eigen::VectorXd cond_mean = gain * point.head(m);
    const Eigen::MatrixXd cond_cov = joint.bottomRightCorner(q, q) - gain * joint.topRightCorner(m, q);
    return logpdf(point, joint) - logpdf(-cond_mean, cond_cov);
}

Outcome baseline_oracle() {
    Rng rng = make_stream(1008);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.5, 10.0), rr(-0.8, 0.8);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const ModelDims d{1 + rep % 3, 2, 1};
        Cohort cohort;
        for (int i = 0; i < 3; ++i) cohort.push_back(random_record(d, 30, 5, rng));
        BaselineModelSpec spec;
        spec.summary = rep % 2 ? AdherenceSummary::Average : AdherenceSummary::Dichotomized;
        BaselineTheta th;
        th.beta = Eigen::MatrixXd::NullaryExpr(d.K, d.p, [&] { return 100.0 + 20.0 * n(rng); });
        th.gamma = Eigen::MatrixXd::NullaryExpr(d.K, d.r, [&] { return 3.0 * n(rng); });
        Eigen::VectorXd z(d.K * (d.K - 1) / 2), sd(d.K);
        for (Index i = 0; i < z.size(); ++i) z(i) = rr(rng);
        for (Index k = 0; k < d.K; ++k) sd(k) = u(rng);
        th.sigma_eps = sd.asDiagonal() * correlation_from_partials(d.K, z) * sd.asDiagonal();
        th.sigma_delta = Eigen::VectorXd::NullaryExpr(d.K, [&] { return std::pow(u(rng), 2); });
        double analytic = 0.0;
        for (const auto& r : cohort) analytic += baseline_log_likelihood(r, summarize_adherence(r, spec), th);
        worst = std::max(worst, rel_diff(analytic, joint_gaussian_baseline(cohort, d, th, spec)));
    }

    // Flat priors on the mean coefficients with the variances held fixed.
    const ModelDims d{1, 1, 1};
    SimConfig sc;
    sc.dims = d;
    sc.theta = default_truth(d);
    sc.patients = 40;
    sc.horizon_min = 20;
    sc.horizon_max = 80;
    sc.adherence_prob = 0.7;
    sc.visit_rate = 0.08;
    sc.seed = 1018;
    const auto cohort = simulate_cohort(sc).records;
    BaselineModelSpec spec;
    spec.base.overrides = {{"beta[1,1]", Prior::flat()}, {"gamma[1,1]", Prior::flat()}};
    const double s_eps = 6.0, s_delta = 4.0;
    Eigen::Matrix2d XtVX = Eigen::Matrix2d::Zero();
    Eigen::Vector2d XtVy = Eigen::Vector2d::Zero();
    for (const auto& r : cohort) {
        const Index m = static_cast<Index>(r.observations.size());
        const double s = summarize_adherence(r, spec)(0);
        Eigen::MatrixXd X(m, 2);
        Eigen::VectorXd y(m);
        for (Index j = 0; j < m; ++j) {
            X.row(j) << 1.0, s;
            y(j) = r.observations[j].value;
        }
        const Eigen::MatrixXd V = s_eps * s_eps * Eigen::MatrixXd::Identity(m, m) +
                                  s_delta * s_delta * Eigen::MatrixXd::Ones(m, m);
        const Eigen::LLT<Eigen::MatrixXd> llt(V);
        XtVX += X.transpose() * llt.solve(X);
        XtVy += X.transpose() * llt.solve(y);
    }
    const Eigen::Vector2d gls = XtVX.ldlt().solve(XtVy);
    const Eigen::Matrix2d cov = XtVX.inverse();
    SamplerConfig cfg;
    cfg.warmup = 2000;
    cfg.draws = 10000;
    cfg.seed = 1028;
    cfg.fixed = {{"sigma_eps[1]", s_eps}, {"sigma_delta[1]", s_delta}};
    const auto cs = fit_baseline(cohort, d, spec, cfg);
    double worst_z = 0.0;
    for (Index j = 0; j < 2; ++j) {
        // Batch-means Monte Carlo standard error, pooled over chains.
        double se2 = 0.0;
        for (const auto& c : cs.chains_for(j)) {
            const int B = 50;
            const Index len = c.size() / B;
            Eigen::VectorXd bm(B);
            for (int b = 0; b < B; ++b) bm(b) = c.segment(b * len, len).mean();
            se2 += sd_of(bm) * sd_of(bm) / B;
        }
        const double se = std::sqrt(se2) / static_cast<double>(cs.n_chains());
        worst_z = std::max(worst_z, std::abs(cs.pooled(j).mean() - gls(j)) / se);
    }
    return {worst < 1e-8 && worst_z < 3.0,
            fmt("marginalization max rel err %.2e over 200 instances (limit 1e-8); GLS max |z| %.2f (limit 3 MC SE; posterior SDs %.3f, %.3f)",
                worst, worst_z, std::sqrt(cov(0, 0)), std::sqrt(cov(1, 1)))};
}

Outcome measurement_error_echo() {
    const ModelDims d{2, 1, 1};
    ThetaParams truth = default_truth(d);
    truth.rho.setConstant(0.9);
    truth.sigma_nu.setConstant(9.0);  // variance; stationary SD about 6.9
    const int reps = 10;
    Eigen::MatrixXd dlm_sd = Eigen::MatrixXd::Zero(reps, 2), avg_sd = dlm_sd, dich_sd = dlm_sd;
    BaselineModelSpec avg, dich;
    dich.summary = AdherenceSummary::Dichotomized;
    for (int rep = 0; rep < reps; ++rep) {
        SimConfig sc;
        sc.dims = d;
        sc.theta = truth;
        sc.patients = 100;
        sc.horizon_min = sc.horizon_max = 100;
        sc.visit_rate = 5.0 / 99.0;
        sc.seed = 9000 + static_cast<std::uint64_t>(rep);
        const auto cohort = simulate_cohort(sc).records;
        SamplerConfig cfg;
        cfg.warmup = 2000;
        cfg.draws = 3000;
        cfg.seed = 9100 + static_cast<std::uint64_t>(rep);
        const auto dlm = run_chains(cohort, d, {}, cfg);
        const auto a = fit_baseline(cohort, d, avg, cfg);
        const auto b = fit_baseline(cohort, d, dich, cfg);
        for (Index k = 0; k < 2; ++k) {
            const std::string name = "sigma_eps[" + std::to_string(k + 1) + "]";
            dlm_sd(rep, k) = dlm.pooled(dlm.index_of(name)).mean();
            avg_sd(rep, k) = a.pooled(a.index_of(name)).mean();
            dich_sd(rep, k) = b.pooled(b.index_of(name)).mean();
        }
    }
    const Eigen::RowVector2d m_dlm = dlm_sd.colwise().mean(), m_avg = avg_sd.colwise().mean(),
                             m_dich = dich_sd.colwise().mean();
    const bool ok = (m_avg.array() > m_dlm.array()).all() && (m_dich.array() > m_dlm.array()).all();
    return {ok, fmt("mean sigma_eps over %d replications: dlm (%.2f, %.2f), average (%.2f, %.2f), dichotomized (%.2f, %.2f)",
                    reps, m_dlm(0), m_dlm(1), m_avg(0), m_avg(1), m_dich(0), m_dich(1))};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("mdlm_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string cli = MDLM_CLI_PATH;
    auto run_all = [&](const fs::path& dir) {
        const std::string d = dir.string();
        const std::string in = " --adherence " + d + "/sim/adherence.csv --outcomes " + d +
                               "/sim/outcomes.csv --baseline " + d + "/sim/baseline.csv";
        const std::string sampling = " --chains 2 --warmup 200 --draws 100 --imputations 2 --seed 11";
        const std::vector<std::string> commands{
            "simulate --out " + d + "/sim --patients 15 --horizon-min 20 --horizon-max 40 --missing-rate 0.05 --covariates 1 --seed 3",
            "fit" + in + sampling + " --out " + d + "/fit",
            "baseline" + in + sampling + " --model both --out " + d + "/base",
            "smooth" + in + " --draws " + d + "/fit/draws.csv --max-draws 20 --seed 4 --out " + d + "/smooth",
            "impute" + in + " --imputations 3 --seed 5 --out " + d + "/impute",
            "compare --dlm " + d + "/fit/draws.csv --baseline average=" + d + "/base/draws_average.csv --out " + d + "/cmp",
        };
        for (const auto& c : commands) {
            for (const char* sub : {"/sim", "/fit", "/base", "/smooth", "/impute", "/cmp"}) fs::create_directories(d + sub);
            const int rc = std::system((cli + " " + c + " 2>/dev/null").c_str());
            const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
            if (code != 0 && code != 3) return "'" + c.substr(0, c.find(' ')) + "' exited with " + std::to_string(code);
        }
        return std::string();
    };
    const std::string e1 = run_all(root / "a"), e2 = run_all(root / "b");
    if (!e1.empty() || !e2.empty()) {
        fs::remove_all(root);
        return {false, e1.empty() ? e2 : e1};
    }
    int files = 0, differ = 0;
    std::string first_diff;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), root / "a");
        ++files;
        if (slurp(entry.path()) != slurp(root / "b" / rel)) {
            ++differ;
            if (first_diff.empty()) first_diff = rel.string();
        }
    }
    fs::remove_all(root);
    return {files > 0 && differ == 0,
            fmt("%d output files from simulate, fit, baseline, smooth, impute, compare; %d differ%s%s", files, differ,
                first_diff.empty() ? "" : ", first: ", first_diff.c_str())};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"likelihood matches Kalman oracle", likelihood_oracle},
        {"smoother matches fixed-interval oracle", smoother_oracle},
        {"mean and variance recursions", recursions},
        {"asymptotic adherence effect", asymptotics},
        {"parameter recovery", parameter_recovery},
        {"prior recovery", prior_recovery},
        {"imputation", imputation},
        {"baseline model oracle", baseline_oracle},
        {"baseline measurement error exceeds DLM", measurement_error_echo},
        {"determinism", determinism},
    };
    std::set<int> only;
    if (const char* env = std::getenv("MDLM_ACCEPTANCE_ONLY")) {
        std::stringstream ss(env);
        for (std::string item; std::getline(ss, item, ',');)
            if (!item.empty()) only.insert(std::stoi(item));
    }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
