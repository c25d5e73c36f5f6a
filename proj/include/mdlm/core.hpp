#ifndef MDLM_CORE_HPP
#define MDLM_CORE_HPP

#include "mdlm/types.hpp"

#include <string>
#include <vector>

namespace mdlm {

struct RecordCheck {
    std::string id;
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

struct ValidationReport {
    std::vector<RecordCheck> records;

    bool ok() const;
    /// One line per failure, "<id>: <reason>".
    std::string describe() const;
};

/// Checks every record invariant and shape against `dims`. Never throws.
ValidationReport validate_cohort(const Cohort& records, const ModelDims& dims);

RecordCheck validate_record(const PatientRecord& record, const ModelDims& dims);

/// Parameter-space checks: |rho| < 1, positive variances, positive-definite
/// sampling covariance, shapes matching `dims`. Empty on success.
std::vector<std::string> validate_theta(const ThetaParams& theta, const ModelDims& dims);

/// Observation indices sorted by (day, replicate, outcome). All likelihood and
/// smoothing code assembles its systems in this order.
std::vector<std::size_t> canonical_order(const PatientRecord& record);

}  // namespace mdlm

#endif  // MDLM_CORE_HPP
