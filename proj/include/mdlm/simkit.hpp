#ifndef MDLM_SIMKIT_HPP
#define MDLM_SIMKIT_HPP

#include "mdlm/rng.hpp"
#include "mdlm/types.hpp"

#include <cstdint>
#include <vector>

namespace mdlm {

struct SimConfig {
    ModelDims dims;
    ThetaParams theta;
    int patients = 100;
    /// Horizons are drawn uniformly from [horizon_min, horizon_max].
    int horizon_min = 100;
    int horizon_max = 100;
    /// Daily probability of adherence (+1); otherwise -1.
    double adherence_prob = 0.9;
    /// Day 1 is always a visit; later days are visits independently with this
    /// probability. Ignored when `visit_days` is non-empty.
    double visit_rate = 3.0 / 98.0;
    /// Fixed visit days (1-based); days beyond a patient's horizon are dropped.
    std::vector<int> visit_days;
    /// Readings of the full outcome vector taken per visit.
    int replicates = 1;
    /// Probability that a day's adherence is recorded as missing after the
    /// outcomes have been generated from the complete series.
    double missing_rate = 0.0;
    std::uint64_t seed = 1;
};

struct SimulatedCohort {
    Cohort records;
    /// Per patient, K x T true latent states.
    std::vector<Eigen::MatrixXd> latent;
};

/// Draws adherence, latent AR(1) states and observations from the generative
/// model. Deterministic given `config.seed`. Zero variances are allowed.
SimulatedCohort simulate_cohort(const SimConfig& config);

/// Marks each adherence entry missing with probability `rate`.
Cohort mask_adherence(const Cohort& records, double rate, std::uint64_t seed);

/// Parameter values used by default for simulation: blood-pressure-like
/// intercepts, rho = 0.8, phi = -0.5, sampling SDs 8 and 5 with correlation 0.6.
ThetaParams default_truth(const ModelDims& dims);

/// Symmetric square root with negative eigenvalues clamped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov);

}  // namespace mdlm

#endif  // MDLM_SIMKIT_HPP
