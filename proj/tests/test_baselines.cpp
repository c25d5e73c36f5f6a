#include "doctest.h"

#include "mdlm/baselines.hpp"
#include "mdlm/marginal.hpp"
#include "mdlm/simkit.hpp"
#include "support.hpp"

using namespace mdlm;
using mdlm::testing::random_record;
using mdlm::testing::rel_diff;

namespace {

PatientRecord series(const std::vector<double>& c) {
    PatientRecord r;
    r.id = "s";
    r.covariates_dynamic = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Index>(c.size()));
    r.covariates_baseline = Eigen::VectorXd::Ones(1);
    r.observations = {{1, 0, 100.0, 0}};
    return r;
}

PatientRecord fraction_adherent(int pos, int T) {
    std::vector<double> c(T, -1.0);
    std::fill(c.begin(), c.begin() + pos, 1.0);
    return series(c);
}

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const Eigen::VectorXd r = x - mean;
    return -0.5 * (r.dot(ldlt.solve(r)) + ldlt.vectorD().array().log().sum() +
                   static_cast<double>(x.size()) * std::log(2.0 * M_PI));
}

BaselineTheta random_baseline_theta(const ModelDims& d, Rng& rng) {
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.5, 10.0), r(-0.8, 0.8);
    BaselineTheta th;
    th.beta = Eigen::MatrixXd::NullaryExpr(d.K, d.p, [&] { return 100.0 + 20.0 * n(rng); });
    th.gamma = Eigen::MatrixXd::NullaryExpr(d.K, d.r, [&] { return 3.0 * n(rng); });
    Eigen::VectorXd z(d.K * (d.K - 1) / 2);
    for (Index i = 0; i < z.size(); ++i) z(i) = r(rng);
    Eigen::VectorXd sd(d.K);
    for (Index k = 0; k < d.K; ++k) sd(k) = u(rng);
    th.sigma_eps = sd.asDiagonal() * correlation_from_partials(d.K, z) * sd.asDiagonal();
    th.sigma_delta = Eigen::VectorXd::NullaryExpr(d.K, [&] { return std::pow(u(rng), 2); });
    return th;
}

}  // namespace

TEST_CASE("adherence summaries") {
    BaselineModelSpec avg, dich;
    dich.summary = AdherenceSummary::Dichotomized;

    const auto full = fraction_adherent(50, 50);
    CHECK(summarize_adherence(full, avg)(0) == 1.0);
    CHECK(summarize_adherence(full, dich)(0) == 1.0);

    const auto mostly = fraction_adherent(951, 1000);
    CHECK(summarize_adherence(mostly, avg)(0) == doctest::Approx(0.902).epsilon(1e-12));
    CHECK(summarize_adherence(mostly, dich)(0) == 1.0);

    const auto none = fraction_adherent(0, 10);
    CHECK(summarize_adherence(none, avg)(0) == -1.0);
    CHECK(summarize_adherence(none, dich)(0) == 0.0);

    // Exactly at the threshold is not above it.
    dich.threshold = 0.5;
    CHECK(summarize_adherence(fraction_adherent(5, 10), dich)(0) == 0.0);
    CHECK(summarize_adherence(fraction_adherent(6, 10), dich)(0) == 1.0);

    auto gap = full;
    gap.covariates_dynamic(3, 0) = kMissing;
    CHECK_THROWS(summarize_adherence(gap, avg));

    CHECK(avg.label() == "average");
    CHECK(BaselineModelSpec{AdherenceSummary::Dichotomized}.label() == "dichotomized(0.8)");
}

TEST_CASE("dichotomizing on the 0/1 and +/-1 scales agree") {
    Rng rng = make_stream(41);
    std::uniform_int_distribution<int> T(5, 120);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    BaselineModelSpec spec;
    spec.summary = AdherenceSummary::Dichotomized;
    for (int rep = 0; rep < 500; ++rep) {
        const int t = T(rng);
        std::vector<double> c(t);
        int pos = 0;
        for (auto& v : c) {
            v = std::bernoulli_distribution(0.7)(rng) ? 1.0 : -1.0;
            pos += v > 0;
        }
        spec.threshold = u(rng);
        const bool zero_one = static_cast<double>(pos) / t > spec.threshold;
        CHECK(summarize_adherence(series(c), spec)(0) == (zero_one ? 1.0 : 0.0));
    }
}

TEST_CASE("random intercept marginalization against the joint Gaussian") {
    Rng rng = make_stream(43);
    BaselineModelSpec spec;
    for (int rep = 0; rep < 50; ++rep) {
        const ModelDims d{1 + rep % 3, 2, 1};
        Cohort cohort;
        for (int i = 0; i < 3; ++i) cohort.push_back(random_record(d, 20, 4, rng));
        const auto th = random_baseline_theta(d, rng);

        // Stack all readings; delta has one entry per (patient, outcome).
        std::vector<double> y, mu;
        std::vector<std::tuple<int, int, int, Index>> who;  // patient, day, replicate, outcome
        double analytic = 0.0;
        for (int i = 0; i < 3; ++i) {
            const auto s = summarize_adherence(cohort[i], spec);
            const Eigen::VectorXd level = th.beta * cohort[i].covariates_baseline + th.gamma * s;
            for (const auto& o : cohort[i].observations) {
                y.push_back(o.value);
                mu.push_back(level(o.outcome));
                who.emplace_back(i, o.day, o.replicate, o.outcome);
            }
            analytic += baseline_log_likelihood(cohort[i], s, th);
        }
        const Index m = static_cast<Index>(y.size()), q = 3 * d.K;
        Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(m, m), Z = Eigen::MatrixXd::Zero(m, q);
        for (Index a = 0; a < m; ++a) {
            const auto [ia, da, ra, ka] = who[a];
            Z(a, ia * d.K + ka) = 1.0;
            for (Index b = 0; b < m; ++b) {
                const auto [ib, db, rb, kb] = who[b];
                if (ia == ib) noise(a, b) = noise_cov_entry(th.sigma_eps, da, ra, ka, db, rb, kb);
            }
        }
        Eigen::VectorXd D(q);
        for (int i = 0; i < 3; ++i) D.segment(i * d.K, d.K) = th.sigma_delta;
        const Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), m);
        const Eigen::VectorXd muv = Eigen::Map<Eigen::VectorXd>(mu.data(), m);

        // log p(y) = log p(y | delta = 0) + log p(delta = 0) - log p(delta = 0 | y)
        const Eigen::LLT<Eigen::MatrixXd> nl(noise);
        const Eigen::MatrixXd prec = Eigen::MatrixXd(D.cwiseInverse().asDiagonal()) + Z.transpose() * nl.solve(Z);
        const Eigen::MatrixXd post_cov = prec.inverse();
        const Eigen::VectorXd post_mean = post_cov * (Z.transpose() * nl.solve(Eigen::VectorXd(yv - muv)));
        const double joint = gaussian_logpdf(yv, muv, noise) +
                             gaussian_logpdf(Eigen::VectorXd::Zero(q), Eigen::VectorXd::Zero(q), D.asDiagonal()) -
                             gaussian_logpdf(Eigen::VectorXd::Zero(q), post_mean, post_cov);
        CHECK(rel_diff(analytic, joint) < 1e-8);
    }
}

TEST_CASE("flat-prior posterior means match generalized least squares") {
    Rng rng = make_stream(45);
    const ModelDims d{1, 1, 1};
    SimConfig sc;
    sc.dims = d;
    sc.theta = default_truth(d);
    sc.patients = 30;
    sc.horizon_min = 20;
    sc.horizon_max = 60;
    sc.adherence_prob = 0.7;
    sc.visit_rate = 0.1;
    sc.seed = 47;
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
    cfg.chains = 4;
    cfg.warmup = 2000;
    cfg.draws = 5000;
    cfg.seed = 49;
    cfg.fixed = {{"sigma_eps[1]", s_eps}, {"sigma_delta[1]", s_delta}};
    const auto cs = fit_baseline(cohort, d, spec, cfg);
    CHECK(cs.names == std::vector<std::string>{"beta[1,1]", "gamma[1,1]", "sigma_eps[1]", "sigma_delta[1]"});
    for (Index j = 0; j < 2; ++j) {
        // Posterior SD over sqrt of an effective sample size of at least 1000.
        const double mcse = std::sqrt(cov(j, j) / 1000.0);
        CHECK(std::abs(cs.pooled(j).mean() - gls(j)) < 3.0 * mcse);
    }
}

TEST_CASE("baseline fit with one reading per patient") {
    Rng rng = make_stream(51);
    const ModelDims d{2, 1, 1};
    Cohort cohort;
    for (int i = 0; i < 5; ++i) {
        auto r = random_record(d, 10, 1, rng);
        r.observations.resize(1);
        cohort.push_back(r);
    }
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.warmup = 100;
    cfg.draws = 50;
    const auto cs = fit_baseline(cohort, d, {}, cfg);
    CHECK(cs.n_draws() == 50);
    CHECK(cs.draws[0].allFinite());
}

TEST_CASE("model comparison table") {
    Rng rng = make_stream(53);
    const ModelDims d{1, 1, 1};
    auto chains = [&](const std::vector<std::string>& names, const std::vector<double>& centers) {
        std::normal_distribution<double> n;
        ChainSet cs;
        cs.names = names;
        cs.fixed.assign(names.size(), false);
        for (int c = 0; c < 2; ++c) {
            Eigen::MatrixXd m(200, static_cast<Index>(names.size()));
            for (Index i = 0; i < m.rows(); ++i)
                for (Index j = 0; j < m.cols(); ++j) m(i, j) = centers[j] + 0.01 * n(rng);
            cs.draws.push_back(m);
        }
        cs.compute_rhat();
        return cs;
    };
    const auto dlm = chains({"beta[1,1]", "phi[1,1]", "rho[1]", "sigma_eps[1]", "sigma_nu[1]", "sigma_0[1]"},
                            {120.0, -0.5, 0.8, 5.0, 1.0, 2.0});
    const auto avg = chains({"beta[1,1]", "gamma[1,1]", "sigma_eps[1]", "sigma_delta[1]"}, {121.0, 0.0, 6.0, 3.0});
    const auto dic = chains({"beta[1,1]", "gamma[1,1]", "sigma_eps[1]", "sigma_delta[1]"}, {119.0, -2.0, 6.5, 3.0});
    const auto rep = compare_models(dlm, {{"average", avg}, {"dichotomized(0.8)", dic}}, d);
    CHECK(rep.models == std::vector<std::string>{"dlm", "average", "dichotomized(0.8)"});

    auto row = [&](const std::string& label) -> const ComparisonRow& {
        for (const auto& r : rep.rows)
            if (r.label == label) return r;
        FAIL("missing row " << label);
        return rep.rows.front();
    };
    const auto& adh = row("adherence[1,1]");
    CHECK(adh.cells[0].mean == doctest::Approx(-0.5).epsilon(1e-3));
    CHECK(adh.flags == "⋆‡");
    const auto& asym = row("asymptotic_adherence[1,1]");
    CHECK(asym.cells[0].mean == doctest::Approx(-2.5).epsilon(0.01));
    CHECK(row("sigma_eps[1]").cells[2].mean == doctest::Approx(6.5).epsilon(1e-3));
    CHECK(asymptotic_effect_draws(dlm, 0, 0).size() == 400);
}
