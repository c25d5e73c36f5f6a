#ifndef MDLM_IMPUTATION_HPP
#define MDLM_IMPUTATION_HPP

// Beta-Bernoulli multiple imputation of missing daily adherence.

#include "mdlm/rng.hpp"
#include "mdlm/sampler.hpp"
#include "mdlm/types.hpp"

#include <cstdint>
#include <vector>

namespace mdlm {

/// Observed adherent / non-adherent day counts for one covariate column; the
/// rate posterior under a uniform prior is Beta(n_pos + 1, n_neg + 1).
struct AdherencePosterior {
    int n_pos = 0;
    int n_neg = 0;

    double alpha() const { return n_pos + 1.0; }
    double beta() const { return n_neg + 1.0; }
    double mean() const { return alpha() / (alpha() + beta()); }
};

/// Counts over the non-missing entries of `column`. Throws ValidationError
/// "no observed adherence" when every day is missing.
AdherencePosterior adherence_posterior(const PatientRecord& record, Index column = 0);

/// One draw from Beta(a, b).
double draw_beta(double a, double b, Rng& rng);

/// Fills the missing entries of each column j with +1 (probability eta(j)) or
/// -1. Observed entries are copied unchanged.
PatientRecord impute_record(const PatientRecord& record, const Eigen::VectorXd& eta, Rng& rng);

/// M completed copies of the cohort. For each dataset and patient a fresh
/// eta is drawn from the posterior of every column with missing days.
/// Streams are derived from (seed, dataset, patient).
std::vector<Cohort> impute_cohort(const Cohort& records, int M, std::uint64_t seed);

/// Concatenates chain sets fitted on different imputed datasets. The
/// imputation index of each chain is kept; R-hat is recomputed over all
/// pooled chains.
ChainSet pool_draws(const std::vector<ChainSet>& sets);

}  // namespace mdlm

#endif  // MDLM_IMPUTATION_HPP
