#include "mdlm/baselines.hpp"

#include "mdlm/core.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/marginal.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mdlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string idx1(Index a) { return "[" + std::to_string(a + 1) + "]"; }
std::string idx2(Index a, Index b) { return "[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]"; }

Prior pick(const PriorSpec& spec, const std::string& name, const Prior& fallback) {
    auto it = spec.overrides.find(name);
    return it == spec.overrides.end() ? fallback : it->second;
}

}  // namespace

std::vector<std::string> BaselineModelSpec::validate() const {
    auto errs = base.validate();
    if (!(threshold > 0.0 && threshold < 1.0)) errs.push_back("threshold must be in (0, 1)");
    if (auto e = gamma.check()) errs.push_back("gamma: " + *e);
    if (auto e = sigma_delta.check()) errs.push_back("sigma_delta: " + *e);
    if (sigma_delta.family == PriorFamily::Uniform && sigma_delta.a < 0.0)
        errs.push_back("sigma_delta: support must be positive");
    return errs;
}

std::string BaselineModelSpec::label() const {
    if (summary == AdherenceSummary::Average) return "average";
    std::ostringstream os;
    os << "dichotomized(" << threshold << ")";
    return os.str();
}

Eigen::VectorXd summarize_adherence(const PatientRecord& record, const BaselineModelSpec& spec) {
    const auto& c = record.covariates_dynamic;
    if (c.rows() == 0) throw ValidationError("record '" + record.id + "' has no adherence days");
    if (c.array().isNaN().any())
        throw ValidationError("record '" + record.id + "' has missing adherence; impute first");
    Eigen::VectorXd mean = c.colwise().mean().transpose();
    if (spec.summary == AdherenceSummary::Average) return mean;
    const double cut = 2.0 * spec.threshold - 1.0;
    return (mean.array() > cut).cast<double>();
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> baseline_moments(const PatientRecord& record,
                                                             const Eigen::VectorXd& summary,
                                                             const BaselineTheta& th) {
    const Index K = th.beta.rows();
    if (record.covariates_baseline.size() != th.beta.cols() || summary.size() != th.gamma.cols() ||
        th.gamma.rows() != K || th.sigma_eps.rows() != K || th.sigma_delta.size() != K)
        throw ValidationError("dimension mismatch between record '" + record.id + "' and parameters");
    const auto L = observation_layout(record, K);
    const Eigen::VectorXd level = th.beta * record.covariates_baseline + th.gamma * summary;
    const Index m = L.size();
    Eigen::VectorXd mean(m);
    Eigen::MatrixXd cov(m, m);
    for (Index a = 0; a < m; ++a) {
        mean(a) = level(L.outcome[a]);
        for (Index b = 0; b <= a; ++b) {
            double v = noise_cov_entry(th.sigma_eps, L.day[a], L.replicate[a], L.outcome[a], L.day[b],
                                       L.replicate[b], L.outcome[b]);
            if (L.outcome[a] == L.outcome[b]) v += th.sigma_delta(L.outcome[a]);
            cov(a, b) = v;
            cov(b, a) = v;
        }
    }
    return {mean, cov};
}

double baseline_log_likelihood(const PatientRecord& record, const Eigen::VectorXd& summary,
                               const BaselineTheta& theta) {
    if (record.observations.empty())
        throw ValidationError("record '" + record.id + "' has no observations");
    const auto [mean, cov] = baseline_moments(record, summary, theta);
    const auto L = observation_layout(record, theta.beta.rows());
    return gaussian_log_density<double>(L.values - mean, cov);
}

std::vector<ParamSpec> baseline_parameters(const ModelDims& d, const BaselineModelSpec& spec) {
    const PriorSpec& base = spec.base;
    std::vector<ParamSpec> ps;
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.p; ++j) {
            ParamSpec s;
            s.name = "beta" + idx2(k, j);
            const double m = j == 0 && k < static_cast<Index>(base.intercept_means.size())
                                 ? base.intercept_means[k]
                                 : 0.0;
            s.prior = pick(base, s.name, Prior::normal(m, j == 0 ? base.intercept_variance : base.beta_variance));
            s.block = 0;
            s.step = 1.0;
            if (j == 0) s.init = s.prior.mean();
            ps.push_back(s);
        }
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.r; ++j) {
            ParamSpec s;
            s.name = "gamma" + idx2(k, j);
            s.prior = pick(base, s.name, spec.gamma);
            s.block = 0;
            s.step = 1.0;
            ps.push_back(s);
        }
    auto sd_param = [&](const std::string& name, const Prior& fallback) {
        ParamSpec s;
        s.name = name;
        s.transform = Transform::Log;
        s.prior = pick(base, name, fallback);
        s.block = 2;
        s.step = 0.05;
        if (s.prior.family == PriorFamily::Uniform) s.init = 0.5 * (s.prior.a + s.prior.b);
        return s;
    };
    for (Index k = 0; k < d.K; ++k) ps.push_back(sd_param("sigma_eps" + idx1(k), base.sigma_eps));
    for (Index k = 0; k < d.K; ++k)
        for (Index l = k + 1; l < d.K; ++l) {
            ParamSpec s;
            s.name = "rho_eps" + idx2(k, l);
            s.transform = Transform::Atanh;
            const Prior fallback = d.K == 2 ? base.rho_eps
                                            : Prior::symmetric_beta(0.5 * static_cast<double>(d.K - k - 2));
            s.prior = pick(base, s.name, fallback);
            s.block = 2;
            s.step = 0.05;
            ps.push_back(s);
        }
    for (Index k = 0; k < d.K; ++k) ps.push_back(sd_param("sigma_delta" + idx1(k), spec.sigma_delta));
    return ps;
}

BaselineTheta baseline_theta_from_values(const ModelDims& d, const Eigen::VectorXd& v) {
    const Index npair = d.K * (d.K - 1) / 2;
    if (v.size() != d.K * d.p + d.K * d.r + 2 * d.K + npair)
        throw std::invalid_argument("baseline_theta_from_values: wrong parameter count");
    BaselineTheta th;
    th.beta.resize(d.K, d.p);
    th.gamma.resize(d.K, d.r);
    Index pos = 0;
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.p; ++j) th.beta(k, j) = v(pos++);
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.r; ++j) th.gamma(k, j) = v(pos++);
    const Eigen::VectorXd sd = v.segment(pos, d.K);
    pos += d.K;
    const Eigen::MatrixXd R = correlation_from_partials(d.K, v.segment(pos, npair));
    pos += npair;
    th.sigma_eps = sd.asDiagonal() * R * sd.asDiagonal();
    th.sigma_delta = v.segment(pos, d.K).array().square();
    return th;
}

namespace {

class BaselineTarget final : public Target {
public:
    BaselineTarget(const Cohort& records, const ModelDims& dims, const BaselineModelSpec& spec)
        : records_(records), dims_(dims), params_(baseline_parameters(dims, spec)) {
        for (const auto& r : records) {
            summaries_.push_back(summarize_adherence(r, spec));
            layouts_.push_back(observation_layout(r, dims.K));
        }
    }

    const std::vector<ParamSpec>& params() const override { return params_; }

    double log_likelihood(const Eigen::VectorXd& x) const override {
        const BaselineTheta th = baseline_theta_from_values(dims_, x);
        double total = 0.0;
        try {
            for (std::size_t i = 0; i < records_.size(); ++i) {
                const auto& L = layouts_[i];
                const Eigen::VectorXd level =
                    th.beta * records_[i].covariates_baseline + th.gamma * summaries_[i];
                const Index m = L.size();
                Eigen::VectorXd resid(m);
                Eigen::MatrixXd cov(m, m);
                for (Index a = 0; a < m; ++a) {
                    resid(a) = L.values(a) - level(L.outcome[a]);
                    for (Index b = 0; b <= a; ++b) {
                        double v = noise_cov_entry(th.sigma_eps, L.day[a], L.replicate[a], L.outcome[a],
                                                   L.day[b], L.replicate[b], L.outcome[b]);
                        if (L.outcome[a] == L.outcome[b]) v += th.sigma_delta(L.outcome[a]);
                        cov(a, b) = v;
                        cov(b, a) = v;
                    }
                }
                total += gaussian_log_density<double>(resid, cov);
            }
        } catch (const NumericError&) {
            return kNegInf;
        }
        return total;
    }

private:
    const Cohort& records_;
    ModelDims dims_;
    std::vector<ParamSpec> params_;
    std::vector<Eigen::VectorXd> summaries_;
    std::vector<ObservationLayout> layouts_;
};

}  // namespace

ChainSet fit_baseline(const Cohort& records, const ModelDims& dims, const BaselineModelSpec& spec,
                      const SamplerConfig& config) {
    const auto report = validate_cohort(records, dims);
    if (!report.ok()) throw ValidationError("invalid cohort:\n" + report.describe());
    if (auto errs = spec.validate(); !errs.empty()) throw std::invalid_argument("invalid prior: " + errs.front());
    BaselineTarget target(records, dims, spec);
    return run_sampler(target, config);
}

Eigen::VectorXd asymptotic_effect_draws(const ChainSet& dlm, Index k, Index j) {
    const Index ip = dlm.index_of("phi" + idx2(k, j));
    const Index ir = dlm.index_of("rho" + idx1(k));
    if (ip < 0 || ir < 0) throw std::invalid_argument("chain set has no phi/rho for that outcome");
    const Eigen::VectorXd phi = dlm.pooled(ip), rho = dlm.pooled(ir);
    return phi.array() / (1.0 - rho.array());
}

namespace {

ComparisonCell cell_from(const Eigen::VectorXd& v, double level) {
    ComparisonCell c;
    if (v.size() == 0) return c;
    const std::vector<double> vals(v.data(), v.data() + v.size());
    const double tail = 0.5 * (1.0 - level);
    c.present = true;
    c.mean = v.mean();
    c.lower = quantile(vals, tail);
    c.upper = quantile(vals, 1.0 - tail);
    c.excludes_zero = c.lower > 0.0 || c.upper < 0.0;
    return c;
}

ComparisonCell cell_for(const ChainSet& cs, const std::string& name, double level) {
    const Index i = cs.index_of(name);
    return i < 0 ? ComparisonCell{} : cell_from(cs.pooled(i), level);
}

const char* baseline_mark(std::size_t b) {
    static const char* marks[] = {"†", "‡", "§", "¶"};
    return b < 4 ? marks[b] : "#";
}

}  // namespace

ComparisonReport compare_models(const ChainSet& dlm,
                                const std::vector<std::pair<std::string, ChainSet>>& baselines,
                                const ModelDims& d, double level) {
    ComparisonReport rep;
    rep.models.push_back("dlm");
    for (const auto& [label, cs] : baselines) rep.models.push_back(label);

    auto add_row = [&](const std::string& label, ComparisonCell dlm_cell, const std::string& baseline_name) {
        ComparisonRow row;
        row.label = label;
        row.cells.push_back(dlm_cell);
        if (dlm_cell.present && dlm_cell.excludes_zero) row.flags += "⋆";
        for (std::size_t b = 0; b < baselines.size(); ++b) {
            ComparisonCell c = cell_for(baselines[b].second, baseline_name, level);
            if (c.present && c.excludes_zero) row.flags += baseline_mark(b);
            row.cells.push_back(c);
        }
        rep.rows.push_back(std::move(row));
    };

    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.p; ++j) {
            const std::string name = "beta" + idx2(k, j);
            add_row(name, cell_for(dlm, name, level), name);
        }
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.r; ++j) {
            const std::string gamma = "gamma" + idx2(k, j);
            add_row("adherence" + idx2(k, j), cell_for(dlm, "phi" + idx2(k, j), level), gamma);
            add_row("asymptotic_adherence" + idx2(k, j), cell_from(asymptotic_effect_draws(dlm, k, j), level),
                    gamma);
        }
    for (Index k = 0; k < d.K; ++k) {
        const std::string name = "sigma_eps" + idx1(k);
        add_row(name, cell_for(dlm, name, level), name);
    }
    return rep;
}

}  // namespace mdlm
