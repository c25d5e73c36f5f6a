#ifndef MDLM_SAMPLER_HPP
#define MDLM_SAMPLER_HPP

#include "mdlm/rng.hpp"
#include "mdlm/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdlm {

enum class PriorFamily { Normal, Uniform, Flat, SymmetricBeta };

/// Scalar prior. Normal takes (mean, variance); Uniform takes (lower, upper);
/// SymmetricBeta is the density proportional to (1 - x^2)^exponent on (-1, 1).
struct Prior {
    PriorFamily family = PriorFamily::Flat;
    double a = 0.0;
    double b = 0.0;

    static Prior normal(double mean, double variance) { return {PriorFamily::Normal, mean, variance}; }
    static Prior uniform(double lower, double upper) { return {PriorFamily::Uniform, lower, upper}; }
    static Prior flat() { return {PriorFamily::Flat, 0.0, 0.0}; }
    static Prior symmetric_beta(double exponent) { return {PriorFamily::SymmetricBeta, exponent, 0.0}; }

    /// Normalized log density; -inf outside the support. Flat returns 0.
    double log_density(double x) const;
    bool in_support(double x) const;
    /// Throws std::logic_error for Flat.
    double draw(Rng& rng) const;
    /// Normal and Uniform only.
    double cdf(double x) const;
    std::optional<double> mean() const;
    std::string describe() const;
    /// Problems with the hyperparameters; empty when valid.
    std::optional<std::string> check() const;

    /// Parses "normal(m,v)", "uniform(lo,hi)", "flat" or "symbeta(e)".
    static Prior parse(const std::string& text);

    bool operator==(const Prior&) const = default;
};

enum class Transform { Identity, Log, Atanh };

double to_constrained(Transform t, double u);
double to_unconstrained(Transform t, double x);
/// log |dx/du| at u.
double log_abs_jacobian(Transform t, double u);

/// One scalar coordinate of a sampling target.
struct ParamSpec {
    std::string name;
    Transform transform = Transform::Identity;
    Prior prior;
    int block = 0;
    /// Starting value in constrained space; when absent the start is drawn
    /// from the prior.
    std::optional<double> init;
    /// Initial random-walk step in unconstrained space.
    double step = 0.1;
};

/// Density the sampler targets: the prior comes from `params()`, the
/// likelihood from `log_likelihood` evaluated on constrained values.
class Target {
public:
    virtual ~Target() = default;
    virtual const std::vector<ParamSpec>& params() const = 0;
    virtual double log_likelihood(const Eigen::VectorXd& constrained) const = 0;
};

struct SamplerConfig {
    int chains = 4;
    int warmup = 5000;
    int draws = 10000;  ///< retained draws per chain
    int thin = 1;
    std::uint64_t seed = 1;
    double target_accept = 0.3;
    bool use_likelihood = true;
    /// Parameters held at a constrained value.
    std::map<std::string, double> fixed;
    unsigned threads = 1;
    /// After the per-block updates, also propose all free parameters jointly.
    bool joint_update = true;
};

struct ChainSet {
    std::vector<std::string> names;
    std::vector<Eigen::MatrixXd> draws;  ///< per chain, draws x params
    Eigen::MatrixXd acceptance;          ///< chains x blocks, post warm-up
    Eigen::MatrixXd proposal_scale;      ///< chains x blocks, frozen after warm-up
    Eigen::VectorXd rhat;                ///< NaN for fixed parameters
    std::vector<bool> fixed;
    std::vector<int> imputation;         ///< imputed-dataset index per chain
    std::uint64_t seed = 0;
    int warmup = 0;
    int thin = 1;

    Index n_chains() const { return static_cast<Index>(draws.size()); }
    Index n_draws() const { return draws.empty() ? 0 : draws.front().rows(); }
    Index n_params() const { return static_cast<Index>(names.size()); }
    /// -1 when absent.
    Index index_of(const std::string& name) const;
    std::vector<Eigen::VectorXd> chains_for(Index param) const;
    Eigen::VectorXd pooled(Index param) const;
    void compute_rhat();
};

/// Adaptive blocked random-walk Metropolis in unconstrained space. Chains
/// use streams derived from (seed, chain); results do not depend on threads.
ChainSet run_sampler(const Target& target, const SamplerConfig& config);

/// Split-R-hat. Requires >= 2 chains with >= 10 draws; +inf when the
/// within-chain variance is zero.
double gelman_rubin(const std::vector<Eigen::VectorXd>& chains);

struct ParamSummary {
    std::string name;
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double rhat = 0.0;
    bool fixed = false;
    bool excludes_zero = false;
    bool converged = true;  ///< rhat < 1.1 (fixed parameters count as converged)
};

/// Equal-tailed quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

std::vector<ParamSummary> summarize(const ChainSet& chains, double level = 0.90);

/// True when every free parameter has R-hat < 1.1.
bool converged(const ChainSet& chains);

// ---------------------------------------------------------------------------
// Dynamic linear model target

struct PriorSpec {
    /// Prior means of the intercepts by outcome; outcomes past the list use 0.
    std::vector<double> intercept_means{120.0, 80.0};
    double intercept_variance = 400.0;
    double beta_variance = 400.0;
    Prior phi = Prior::normal(0.0, 25.0);
    Prior rho = Prior::uniform(-1.0, 1.0);
    Prior sigma_eps = Prior::uniform(0.0, 30.0);
    /// Used for K = 2. For K > 2 the partial correlations get the priors that
    /// make the correlation matrix uniform.
    Prior rho_eps = Prior::uniform(-1.0, 1.0);
    Prior sigma_nu = Prior::uniform(0.0, 10.0);
    Prior sigma_0 = Prior::uniform(0.0, 30.0);
    /// Per-parameter replacements keyed by parameter name, e.g. "beta[1,2]".
    std::map<std::string, Prior> overrides;

    std::vector<std::string> validate() const;
};

/// Parameter layout for the DLM. Names: beta[k,j], phi[k,j], rho[k],
/// sigma_eps[k], rho_eps[k,l], sigma_nu[k], sigma_0[k] (1-based, standard
/// deviations for the sigma_* entries). Blocks: {beta}, {phi, rho},
/// {variance and correlation parameters}.
std::vector<ParamSpec> dlm_parameters(const ModelDims& dims, const PriorSpec& prior);

ThetaParams theta_from_values(const ModelDims& dims, const Eigen::VectorXd& values);
Eigen::VectorXd values_from_theta(const ModelDims& dims, const ThetaParams& theta);

/// Correlation matrix from canonical partial correlations (row-major over
/// pairs k < l) and back.
Eigen::MatrixXd correlation_from_partials(Index K, const Eigen::VectorXd& partials);
Eigen::VectorXd partials_from_correlation(const Eigen::MatrixXd& corr);

/// Log prior of a constrained value vector under `params`.
double log_prior(const std::vector<ParamSpec>& params, const Eigen::VectorXd& values);

/// log p(theta) + cohort log-likelihood; -inf outside the prior support.
double log_posterior(const ThetaParams& theta, const Cohort& records, const PriorSpec& prior);

/// Fits the DLM. Throws ValidationError on an invalid cohort.
ChainSet run_chains(const Cohort& records, const ModelDims& dims, const PriorSpec& prior,
                    const SamplerConfig& config);

}  // namespace mdlm

#endif  // MDLM_SAMPLER_HPP
