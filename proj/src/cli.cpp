#include "mdlm/cli.hpp"

#include "mdlm/baselines.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/imputation.hpp"
#include "mdlm/simkit.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace mdlm::cli {

namespace fs = std::filesystem;

namespace {

// Stream tags keeping the seeds of different analyses apart.
constexpr std::uint64_t kTagFitChains = 0x66697401;
constexpr std::uint64_t kTagFitImpute = 0x66697402;
constexpr std::uint64_t kTagBaseChains = 0x62736c01;
constexpr std::uint64_t kTagBaseImpute = 0x62736c02;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
    Rng rng = make_stream(seed, {tag, index});
    return rng();
}

unsigned default_threads() {
    if (const char* env = std::getenv("MDLM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
    }
    return 1;
}

struct Inputs {
    std::string adherence, outcomes, baseline;

    void add(CLI::App* cmd) {
        cmd->add_option("--adherence", adherence, "Daily adherence CSV")->required()->check(CLI::ExistingFile);
        cmd->add_option("--outcomes", outcomes, "Outcome observations CSV")->required()->check(CLI::ExistingFile);
        cmd->add_option("--baseline", baseline, "Baseline covariates CSV (intercept implied)")
            ->check(CLI::ExistingFile);
    }

    io::CohortData load() const {
        auto data = io::ingest(adherence, outcomes, baseline);
        const auto report = validate_cohort(data.records, data.dims);
        if (!report.ok()) throw ValidationError("cohort failed validation:\n" + report.describe());
        return data;
    }
};

struct Sampling {
    int chains = 4;
    int warmup = 5000;
    int draws = 10000;
    int thin = 1;
    std::uint64_t seed = 1;
    unsigned threads = default_threads();
    int imputations = 20;
    std::vector<std::string> priors;
    std::vector<std::string> fixed;
    bool joint_update = true;

    void add(CLI::App* cmd) {
        cmd->add_option("--chains", chains, "Chains per imputed dataset")->check(CLI::Range(1, 64));
        cmd->add_option("--warmup", warmup, "Warm-up iterations per chain")->check(CLI::Range(0, 10000000));
        cmd->add_option("--draws", draws, "Retained draws per chain")->check(CLI::Range(1, 10000000));
        cmd->add_option("--thin", thin, "Keep every n-th iteration")->check(CLI::Range(1, 10000));
        cmd->add_option("--seed", seed, "Root random seed");
        cmd->add_option("--threads", threads, "Worker threads (default $MDLM_THREADS or 1)")
            ->check(CLI::Range(1u, 1024u));
        cmd->add_option("--imputations", imputations, "Imputed datasets when adherence is missing")
            ->check(CLI::Range(1, 1000));
        cmd->add_option("--prior", priors, "Prior override NAME=PRIOR, e.g. phi=normal(0,25)");
        cmd->add_option("--fix", fixed, "Hold a parameter at a value, NAME=VALUE");
        cmd->add_option("--joint-update", joint_update, "Add a joint move over all parameters each iteration");
    }

    SamplerConfig config(std::uint64_t chain_seed) const {
        SamplerConfig cfg;
        cfg.chains = chains;
        cfg.warmup = warmup;
        cfg.draws = draws;
        cfg.thin = thin;
        cfg.seed = chain_seed;
        cfg.threads = threads;
        cfg.joint_update = joint_update;
        for (const auto& f : fixed) {
            const auto eq = f.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--fix expects NAME=VALUE, got '" + f + "'");
            std::size_t used = 0;
            const std::string v = f.substr(eq + 1);
            double value = 0.0;
            try {
                value = std::stod(v, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != v.size()) throw std::invalid_argument("--fix: bad value in '" + f + "'");
            cfg.fixed[f.substr(0, eq)] = value;
        }
        return cfg;
    }
};

bool has_missing(const Cohort& records) {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.has_missing_covariates(); });
}

void print_summary(const ChainSet& chains, std::ostream& os) {
    for (const auto& s : summarize(chains)) {
        os << "  " << s.name << "  mean " << s.mean << "  90% (" << s.lower << ", " << s.upper << ")";
        if (!s.fixed) os << "  rhat " << s.rhat;
        if (!s.converged) os << "  [not converged]";
        os << '\n';
    }
}

int gate(const ChainSet& chains, const std::string& what) {
    if (converged(chains)) return kOk;
    std::cerr << what << ": R-hat >= 1.1 for some parameters; summary written with '!' flags\n";
    return kConvergence;
}

void checked_overrides(const std::vector<std::string>& overrides, const ModelDims& dims, PriorSpec& prior,
                       BaselineModelSpec* baseline = nullptr) {
    try {
        apply_prior_overrides(overrides, dims, prior, baseline);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("invalid prior: ") + e.what());
    }
}

std::string file_label(std::string s) {
    for (auto& c : s)
        if (c == '(' || c == ')' || c == ',' || c == ' ') c = '_';
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
    std::string out = ".";
    int patients = 100;
    int horizon_min = 100, horizon_max = 100;
    int outcomes = 2, covariates = 0, adherence_columns = 1;
    double adherence_prob = 0.9, visit_rate = 3.0 / 98.0, missing_rate = 0.0;
    int replicates = 1;
    std::uint64_t seed = 1;
    std::optional<double> rho, phi, sigma_nu, sigma_0;

    void add(CLI::App* cmd) {
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--patients", patients)->check(CLI::Range(1, 1000000));
        cmd->add_option("--horizon-min", horizon_min)->check(CLI::Range(1, 100000));
        cmd->add_option("--horizon-max", horizon_max)->check(CLI::Range(1, 100000));
        cmd->add_option("--outcomes", outcomes, "Number of outcomes K")->check(CLI::Range(1, 20));
        cmd->add_option("--covariates", covariates, "Baseline covariates besides the intercept")
            ->check(CLI::Range(0, 100));
        cmd->add_option("--adherence-columns", adherence_columns)->check(CLI::Range(1, 20));
        cmd->add_option("--adherence-prob", adherence_prob)->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--visit-rate", visit_rate, "Daily visit probability after day 1")
            ->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--replicates", replicates, "Readings per visit")->check(CLI::Range(1, 100));
        cmd->add_option("--missing-rate", missing_rate)->check(CLI::Range(0.0, 0.99));
        cmd->add_option("--seed", seed);
        cmd->add_option("--rho", rho, "AR coefficient for every outcome")->check(CLI::Range(-0.999999, 0.999999));
        cmd->add_option("--phi", phi, "Adherence effect for every outcome and column");
        cmd->add_option("--sigma-nu", sigma_nu, "Innovation SD")->check(CLI::Range(0.0, 1e6));
        cmd->add_option("--sigma-0", sigma_0, "Initial-state SD")->check(CLI::Range(0.0, 1e6));
    }

    int operator()() const {
        if (horizon_max < horizon_min) throw std::invalid_argument("--horizon-max must be >= --horizon-min");
        SimConfig cfg;
        cfg.dims = {outcomes, covariates + 1, adherence_columns};
        cfg.theta = default_truth(cfg.dims);
        for (Index k = 0; k < cfg.dims.K; ++k) {
            if (rho) cfg.theta.rho(k) = *rho;
            if (phi) cfg.theta.phi.row(k).setConstant(*phi);
            if (sigma_nu) cfg.theta.sigma_nu(k) = *sigma_nu * *sigma_nu;
            if (sigma_0) cfg.theta.sigma_0(k) = *sigma_0 * *sigma_0;
        }
        cfg.patients = patients;
        cfg.horizon_min = horizon_min;
        cfg.horizon_max = horizon_max;
        cfg.adherence_prob = adherence_prob;
        cfg.visit_rate = visit_rate;
        cfg.replicates = replicates;
        cfg.missing_rate = missing_rate;
        cfg.seed = seed;
        const auto sim = simulate_cohort(cfg);

        io::CohortData data;
        data.records = sim.records;
        data.dims = cfg.dims;
        const char* names[] = {"sbp", "dbp"};
        for (Index k = 0; k < cfg.dims.K; ++k)
            data.outcome_names.push_back(k < 2 ? names[k] : "y" + std::to_string(k + 1));
        for (Index j = 0; j < cfg.dims.r; ++j)
            data.adherence_names.push_back(cfg.dims.r == 1 ? "adherent" : "adherent" + std::to_string(j + 1));
        for (Index j = 1; j < cfg.dims.p; ++j) data.covariate_names.push_back("x" + std::to_string(j));
        io::emit(data, out);

        const auto params = dlm_parameters(cfg.dims, PriorSpec{});
        const Eigen::VectorXd truth = values_from_theta(cfg.dims, cfg.theta);
        {
            std::ofstream f(fs::path(out) / "truth.csv", std::ios::binary);
            f << "parameter,value\n";
            for (std::size_t i = 0; i < params.size(); ++i)
                f << io::csv_field(params[i].name) << ',' << io::format_double(truth(i)) << '\n';
        }
        {
            std::ofstream f(fs::path(out) / "latent.csv", std::ios::binary);
            f << "patient_id,day,outcome,alpha\n";
            for (std::size_t i = 0; i < sim.records.size(); ++i)
                for (Index t = 0; t < sim.latent[i].cols(); ++t)
                    for (Index k = 0; k < sim.latent[i].rows(); ++k)
                        f << io::csv_field(sim.records[i].id) << ',' << t + 1 << ','
                          << io::csv_field(data.outcome_names[k]) << ','
                          << io::format_double(sim.latent[i](k, t)) << '\n';
        }
        std::cerr << "simulated " << patients << " patients into " << out << '\n';
        return kOk;
    }
};

struct FitCmd {
    Inputs inputs;
    Sampling sampling;
    std::string out = ".";

    void add(CLI::App* cmd) {
        inputs.add(cmd);
        sampling.add(cmd);
        cmd->add_option("--out", out, "Output directory");
    }

    int operator()() const {
        const auto data = inputs.load();
        PriorSpec prior;
        checked_overrides(sampling.priors, data.dims, prior);
        std::vector<Cohort> cohorts;
        if (has_missing(data.records))
            cohorts = impute_cohort(data.records, sampling.imputations,
                                    derived_seed(sampling.seed, kTagFitImpute));
        else
            cohorts.push_back(data.records);
        std::vector<ChainSet> sets;
        for (std::size_t m = 0; m < cohorts.size(); ++m)
            sets.push_back(run_chains(cohorts[m], data.dims, prior,
                                      sampling.config(derived_seed(sampling.seed, kTagFitChains, m))));
        const ChainSet pooled = pool_draws(sets);
        io::write_draws(pooled, fs::path(out) / "draws.csv");
        io::write_summary(pooled, fs::path(out) / "summary.csv");
        print_summary(pooled, std::cerr);
        return gate(pooled, "fit");
    }
};

struct BaselineCmd {
    Inputs inputs;
    Sampling sampling;
    std::string out = ".";
    std::string model = "both";
    std::vector<double> thresholds{0.8};

    void add(CLI::App* cmd) {
        inputs.add(cmd);
        sampling.add(cmd);
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--model", model, "average, dichotomized or both")
            ->check(CLI::IsMember({"average", "dichotomized", "both"}));
        cmd->add_option("--threshold", thresholds, "Dichotomization thresholds p")
            ->check(CLI::Range(1e-9, 1.0 - 1e-9));
    }

    int operator()() const {
        const auto data = inputs.load();
        std::vector<BaselineModelSpec> specs;
        BaselineModelSpec base;
        checked_overrides(sampling.priors, data.dims, base.base, &base);
        if (model != "dichotomized") specs.push_back(base);
        if (model != "average")
            for (double p : thresholds) {
                BaselineModelSpec s = base;
                s.summary = AdherenceSummary::Dichotomized;
                s.threshold = p;
                specs.push_back(s);
            }
        std::vector<Cohort> cohorts;
        if (has_missing(data.records))
            cohorts = impute_cohort(data.records, sampling.imputations,
                                    derived_seed(sampling.seed, kTagBaseImpute));
        else
            cohorts.push_back(data.records);
        int rc = kOk;
        for (std::size_t s = 0; s < specs.size(); ++s) {
            std::vector<ChainSet> sets;
            for (std::size_t m = 0; m < cohorts.size(); ++m)
                sets.push_back(fit_baseline(cohorts[m], data.dims, specs[s],
                                            sampling.config(derived_seed(sampling.seed, kTagBaseChains, m))));
            const ChainSet pooled = pool_draws(sets);
            const std::string label = file_label(specs[s].label());
            io::write_draws(pooled, fs::path(out) / ("draws_" + label + ".csv"));
            io::write_summary(pooled, fs::path(out) / ("summary_" + label + ".csv"));
            std::cerr << specs[s].label() << ":\n";
            print_summary(pooled, std::cerr);
            if (gate(pooled, specs[s].label()) != kOk) rc = kConvergence;
        }
        return rc;
    }
};

std::vector<ThetaParams> thetas_from_draws(const ChainSet& cs, const ModelDims& dims, int max_draws) {
    const auto params = dlm_parameters(dims, PriorSpec{});
    std::vector<Index> cols;
    for (const auto& p : params) {
        const Index i = cs.index_of(p.name);
        if (i < 0) throw io::IoError("draws file lacks parameter " + p.name);
        cols.push_back(i);
    }
    const Index per_chain = cs.n_draws(), total = cs.n_chains() * per_chain;
    if (total == 0) throw io::IoError("draws file is empty");
    const Index n = std::min<Index>(total, max_draws);
    std::vector<ThetaParams> out;
    for (Index s = 0; s < n; ++s) {
        const Index flat = s * total / n;
        const auto& d = cs.draws[flat / per_chain];
        Eigen::VectorXd v(static_cast<Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) v(j) = d(flat % per_chain, cols[j]);
        out.push_back(theta_from_values(dims, v));
    }
    return out;
}

struct SmoothCmd {
    Inputs inputs;
    std::string draws, out = ".";
    int max_draws = 200;
    std::uint64_t seed = 1;
    double level = 0.9;

    void add(CLI::App* cmd) {
        inputs.add(cmd);
        cmd->add_option("--draws", draws, "Draws file written by fit")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--max-draws", max_draws, "Parameter draws used, evenly spaced")
            ->check(CLI::Range(1, 1000000));
        cmd->add_option("--seed", seed, "Seed for imputing missing adherence");
        cmd->add_option("--level", level, "Central interval probability")->check(CLI::Range(0.01, 0.999));
    }

    int operator()() const {
        const auto data = inputs.load();
        const auto thetas = thetas_from_draws(io::read_draws(draws), data.dims, max_draws);
        const auto smoothed = smooth_cohort(data.records, thetas, seed, level);
        const fs::path path = fs::path(out) / "smooth.csv";
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) throw io::IoError(path.string() + ": cannot write file");
        f << "patient_id,day,outcome,post_mean,q05,q95\n";
        for (const auto& p : smoothed)
            for (Index t = 0; t < p.mean.cols(); ++t)
                for (Index k = 0; k < p.mean.rows(); ++k)
                    f << io::csv_field(p.id) << ',' << t + 1 << ',' << io::csv_field(data.outcome_names[k]) << ','
                      << io::format_double(p.mean(k, t)) << ',' << io::format_double(p.lower(k, t)) << ','
                      << io::format_double(p.upper(k, t)) << '\n';
        return kOk;
    }
};

struct ImputeCmd {
    Inputs inputs;
    std::string out = ".";
    int imputations = 20;
    std::uint64_t seed = 1;

    void add(CLI::App* cmd) {
        inputs.add(cmd);
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--imputations", imputations)->check(CLI::Range(1, 100000));
        cmd->add_option("--seed", seed);
    }

    int operator()() const {
        const auto data = inputs.load();
        const auto cohorts = impute_cohort(data.records, imputations, seed);
        std::vector<io::CohortData> sets;
        for (const auto& c : cohorts) {
            io::CohortData d = data;
            d.records = c;
            sets.push_back(std::move(d));
        }
        io::write_imputed(sets, fs::path(out) / "imputed_adherence.csv");
        return kOk;
    }
};

ModelDims dims_from_names(const ChainSet& cs) {
    ModelDims d{0, 0, 0};
    while (cs.index_of("rho[" + std::to_string(d.K + 1) + "]") >= 0) ++d.K;
    while (cs.index_of("beta[1," + std::to_string(d.p + 1) + "]") >= 0) ++d.p;
    while (cs.index_of("phi[1," + std::to_string(d.r + 1) + "]") >= 0) ++d.r;
    if (d.K == 0 || d.p == 0 || d.r == 0) throw io::IoError("draws file does not hold DLM parameters");
    return d;
}

struct CompareCmd {
    std::string dlm, out = ".";
    std::vector<std::string> baselines;

    void add(CLI::App* cmd) {
        cmd->add_option("--dlm", dlm, "Draws file written by fit")->required()->check(CLI::ExistingFile);
        cmd->add_option("--baseline", baselines, "LABEL=draws file written by baseline (repeatable)");
        cmd->add_option("--out", out, "Output directory");
    }

    int operator()() const {
        const ChainSet d = io::read_draws(dlm);
        std::vector<std::pair<std::string, ChainSet>> others;
        for (const auto& b : baselines) {
            const auto eq = b.find('=');
            if (eq == std::string::npos || eq == 0)
                throw std::invalid_argument("--baseline expects LABEL=PATH, got '" + b + "'");
            others.emplace_back(b.substr(0, eq), io::read_draws(b.substr(eq + 1)));
        }
        const auto report = compare_models(d, others, dims_from_names(d));
        io::write_comparison(report, fs::path(out) / "comparison.csv");
        return kOk;
    }
};

}  // namespace

void apply_prior_overrides(const std::vector<std::string>& overrides, const ModelDims& dims, PriorSpec& prior,
                           BaselineModelSpec* baseline) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--prior expects NAME=PRIOR, got '" + o + "'");
        const std::string name = o.substr(0, eq);
        const Prior p = Prior::parse(o.substr(eq + 1));
        if (name == "phi") prior.phi = p;
        else if (name == "rho") prior.rho = p;
        else if (name == "sigma_eps") prior.sigma_eps = p;
        else if (name == "rho_eps") prior.rho_eps = p;
        else if (name == "sigma_nu") prior.sigma_nu = p;
        else if (name == "sigma_0") prior.sigma_0 = p;
        else if (baseline && name == "gamma") baseline->gamma = p;
        else if (baseline && name == "sigma_delta") baseline->sigma_delta = p;
        else {
            bool known = false;
            if (baseline) {
                for (const auto& s : baseline_parameters(dims, *baseline)) known = known || s.name == name;
            } else {
                for (const auto& s : dlm_parameters(dims, prior)) known = known || s.name == name;
            }
            if (!known) throw std::invalid_argument("unknown prior name '" + name + "'");
            prior.overrides[name] = p;
        }
    }
}

double normal_mixture_quantile(const Eigen::VectorXd& means, const Eigen::VectorXd& sds, double q) {
    const Index n = means.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    auto cdf = [&](double x) {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (sds(i) > 0.0) s += 0.5 * std::erfc(-(x - means(i)) / (sds(i) * std::sqrt(2.0)));
            else s += x >= means(i) ? 1.0 : 0.0;
        }
        return s / static_cast<double>(n);
    };
    double lo = (means - 10.0 * sds).minCoeff(), hi = (means + 10.0 * sds).maxCoeff();
    if (lo == hi) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < q) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<SmoothedPatient> smooth_cohort(const Cohort& records, const std::vector<ThetaParams>& thetas,
                                           std::uint64_t seed, double level) {
    if (thetas.empty()) throw std::invalid_argument("smooth_cohort: no parameter draws");
    const Index D = static_cast<Index>(thetas.size());
    const double tail = 0.5 * (1.0 - level);
    std::vector<SmoothedPatient> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        const Index K = thetas.front().beta.rows(), T = rec.horizon();
        const bool gaps = rec.has_missing_covariates();
        std::vector<AdherencePosterior> posts;
        if (gaps)
            for (Index j = 0; j < rec.covariates_dynamic.cols(); ++j) posts.push_back(adherence_posterior(rec, j));
        Eigen::MatrixXd means(D, K * T), sds(D, K * T);
        for (Index d = 0; d < D; ++d) {
            const auto& th = thetas[d];
            PatientRecord completed;
            if (gaps) {
                Rng rng = make_stream(seed, {static_cast<std::uint64_t>(d), i});
                Eigen::VectorXd eta(rec.covariates_dynamic.cols());
                for (Index j = 0; j < eta.size(); ++j) eta(j) = draw_beta(posts[j].alpha(), posts[j].beta(), rng);
                completed = impute_record(rec, eta, rng);
            }
            const auto post = latent_conditional(gaps ? completed : rec, th);
            const Eigen::VectorXd shift = th.beta * rec.covariates_baseline;
            for (Index k = 0; k < K; ++k)
                for (Index t = 0; t < T; ++t) {
                    const Index row = post.row(k, t);
                    means(d, k * T + t) = shift(k) + post.mean(row);
                    sds(d, k * T + t) = std::sqrt(std::max(0.0, post.cov(row, row)));
                }
        }
        SmoothedPatient sp;
        sp.id = rec.id;
        sp.mean.resize(K, T);
        sp.lower.resize(K, T);
        sp.upper.resize(K, T);
        for (Index k = 0; k < K; ++k)
            for (Index t = 0; t < T; ++t) {
                const Index c = k * T + t;
                sp.mean(k, t) = means.col(c).mean();
                sp.lower(k, t) = normal_mixture_quantile(means.col(c), sds.col(c), tail);
                sp.upper(k, t) = normal_mixture_quantile(means.col(c), sds.col(c), 1.0 - tail);
            }
        out.push_back(std::move(sp));
    }
    return out;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Bayesian dynamic linear models with sparse outcomes and daily covariates", "mdlm"};
    app.set_config("--config", "", "TOML file; options go under a [<command>] section");
    app.allow_config_extras(false);
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();

    SimulateCmd simulate;
    FitCmd fit;
    BaselineCmd baseline;
    SmoothCmd smooth;
    ImputeCmd impute;
    CompareCmd compare;
    auto* c_sim = app.add_subcommand("simulate", "Simulate a cohort from the generative model");
    auto* c_fit = app.add_subcommand("fit", "Sample the DLM parameters");
    auto* c_base = app.add_subcommand("baseline", "Fit the average / dichotomized adherence models");
    auto* c_smooth = app.add_subcommand("smooth", "Pointwise posterior of the daily mean process");
    auto* c_imp = app.add_subcommand("impute", "Write multiply imputed adherence");
    auto* c_cmp = app.add_subcommand("compare", "Side-by-side table of DLM and baseline fits");
    simulate.add(c_sim);
    fit.add(c_fit);
    baseline.add(c_base);
    smooth.add(c_smooth);
    impute.add(c_imp);
    compare.add(c_cmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (c_sim->parsed()) return simulate();
        if (c_fit->parsed()) return fit();
        if (c_base->parsed()) return baseline();
        if (c_smooth->parsed()) return smooth();
        if (c_imp->parsed()) return impute();
        if (c_cmp->parsed()) return compare();
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const io::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace mdlm::cli
