#ifndef MDLM_CLI_HPP
#define MDLM_CLI_HPP

#include "mdlm/io.hpp"
#include "mdlm/sampler.hpp"
#include "mdlm/smoother.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mdlm::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,       ///< bad arguments, unreadable or malformed files
    kValidation = 2,  ///< cohort or prior failed validation
    kConvergence = 3, ///< some free parameter has R-hat >= 1.1
    kNumeric = 4,     ///< numerical failure
};

/// Parses `argv` (subcommand plus options, optional --config file) and runs
/// the command. Messages go to stderr; returns the exit code.
int run(int argc, const char* const* argv);

/// Applies "name=prior" overrides. Group names (phi, rho, sigma_eps, rho_eps,
/// sigma_nu, sigma_0, gamma, sigma_delta) replace the default for the whole
/// group; any other name must be a parameter name. Throws
/// std::invalid_argument on unknown names or unparsable priors.
void apply_prior_overrides(const std::vector<std::string>& overrides, const ModelDims& dims,
                           PriorSpec& prior, BaselineModelSpec* baseline = nullptr);

/// Pointwise summary of the mean process beta_k x + alpha_kt on days 1..T:
/// the posterior mean averages the conditional means over theta draws and
/// the interval inverts the mixture of the per-draw conditional normals.
struct SmoothedPatient {
    std::string id;
    Eigen::MatrixXd mean, lower, upper;  ///< K x T
};

/// Missing adherence is imputed afresh for each theta draw from streams
/// (seed, draw, patient).
std::vector<SmoothedPatient> smooth_cohort(const Cohort& records, const std::vector<ThetaParams>& thetas,
                                           std::uint64_t seed, double level = 0.90);

/// Quantile of an equally weighted mixture of normals (sd may be zero).
double normal_mixture_quantile(const Eigen::VectorXd& means, const Eigen::VectorXd& sds, double q);

}  // namespace mdlm::cli

#endif  // MDLM_CLI_HPP
