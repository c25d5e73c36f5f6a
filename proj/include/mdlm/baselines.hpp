#ifndef MDLM_BASELINES_HPP
#define MDLM_BASELINES_HPP

// Non-dynamic comparison models: outcomes depend on a per-patient adherence
// summary (average or dichotomized) plus a patient random intercept per
// outcome, which is integrated out analytically.

#include "mdlm/sampler.hpp"
#include "mdlm/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mdlm {

enum class AdherenceSummary { Average, Dichotomized };

struct BaselineModelSpec {
    AdherenceSummary summary = AdherenceSummary::Average;
    /// Fraction of adherent days above which a patient counts as adherent.
    double threshold = 0.8;
    /// Supplies the beta, sigma_eps and rho_eps priors and any per-name
    /// overrides (which may also name gamma[k,j] or sigma_delta[k]).
    PriorSpec base;
    Prior gamma = Prior::normal(0.0, 25.0);
    Prior sigma_delta = Prior::uniform(0.0, 30.0);

    std::vector<std::string> validate() const;
    /// "average" or "dichotomized(p)".
    std::string label() const;
};

/// Per-column summary of the +/-1 adherence series: the mean in [-1, 1], or
/// 1 when that mean exceeds 2p - 1 (strictly) and 0 otherwise.
Eigen::VectorXd summarize_adherence(const PatientRecord& record, const BaselineModelSpec& spec);

struct BaselineTheta {
    Eigen::MatrixXd beta;         ///< K x p
    Eigen::MatrixXd gamma;        ///< K x r
    Eigen::MatrixXd sigma_eps;    ///< K x K
    Eigen::VectorXd sigma_delta;  ///< K random-intercept variances
};

/// Observation mean and covariance for one patient with the random
/// intercepts integrated out, in canonical observation order.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> baseline_moments(const PatientRecord& record,
                                                             const Eigen::VectorXd& summary,
                                                             const BaselineTheta& theta);

double baseline_log_likelihood(const PatientRecord& record, const Eigen::VectorXd& summary,
                               const BaselineTheta& theta);

/// Parameter names: beta[k,j], gamma[k,j], sigma_eps[k], rho_eps[k,l],
/// sigma_delta[k]. Blocks: {beta, gamma}, {variance and correlation
/// parameters}.
std::vector<ParamSpec> baseline_parameters(const ModelDims& dims, const BaselineModelSpec& spec);

BaselineTheta baseline_theta_from_values(const ModelDims& dims, const Eigen::VectorXd& values);

/// Requires complete adherence (impute first).
ChainSet fit_baseline(const Cohort& records, const ModelDims& dims, const BaselineModelSpec& spec,
                      const SamplerConfig& config);

struct ComparisonCell {
    bool present = false;
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool excludes_zero = false;
};

struct ComparisonRow {
    std::string label;
    /// Index 0 is the DLM, then one entry per baseline model.
    std::vector<ComparisonCell> cells;
    /// "⋆" when the DLM interval excludes zero, then one mark per baseline
    /// ("†" for the first, "‡" for the second, ...) when its interval does.
    std::string flags;
};

struct ComparisonReport {
    std::vector<std::string> models;
    std::vector<ComparisonRow> rows;
};

/// Side-by-side posterior means and 90% intervals. Rows cover the shared
/// beta coefficients and sampling SDs, the DLM phi next to each baseline
/// gamma, and the DLM asymptotic effect phi / (1 - rho) summarized over draws.
ComparisonReport compare_models(const ChainSet& dlm,
                                const std::vector<std::pair<std::string, ChainSet>>& baselines,
                                const ModelDims& dims, double level = 0.90);

/// Per-draw asymptotic effect phi[k,j] / (1 - rho[k]) pooled over chains.
Eigen::VectorXd asymptotic_effect_draws(const ChainSet& dlm, Index k, Index j);

}  // namespace mdlm

#endif  // MDLM_BASELINES_HPP
