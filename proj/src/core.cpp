#include "mdlm/core.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace mdlm {

bool ValidationReport::ok() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.ok(); });
}

std::string ValidationReport::describe() const {
    std::ostringstream os;
    for (const auto& r : records)
        for (const auto& f : r.failures) os << r.id << ": " << f << '\n';
    return os.str();
}

RecordCheck validate_record(const PatientRecord& record, const ModelDims& dims) {
    RecordCheck check{record.id, {}};
    auto fail = [&](std::string why) { check.failures.push_back(std::move(why)); };

    const Index T = record.horizon();
    if (T < 1) fail("horizon must be at least 1 day");
    if (record.covariates_dynamic.cols() != dims.r)
        fail("dynamic covariate count " + std::to_string(record.covariates_dynamic.cols()) +
             " does not match r=" + std::to_string(dims.r));
    if (record.covariates_baseline.size() != dims.p)
        fail("baseline covariate count " + std::to_string(record.covariates_baseline.size()) +
             " does not match p=" + std::to_string(dims.p));
    else if (dims.p >= 1 && record.covariates_baseline(0) != 1.0)
        fail("first baseline covariate must be the intercept 1");
    if (record.covariates_baseline.size() > 0 && !record.covariates_baseline.allFinite())
        fail("non-finite baseline covariate");

    bool bad_adherence = false;
    for (Index i = 0; i < record.covariates_dynamic.size(); ++i) {
        const double v = record.covariates_dynamic.data()[i];
        if (!is_missing(v) && v != 1.0 && v != -1.0) bad_adherence = true;
    }
    if (bad_adherence) fail("adherence not in {-1,+1}");

    if (record.observations.empty()) fail("no observations");
    bool outside = false, bad_outcome = false, bad_value = false;
    std::set<std::tuple<int, Index, int>> seen;
    bool duplicate = false;
    for (const auto& o : record.observations) {
        if (o.day < 1 || o.day > T) outside = true;
        if (o.outcome < 0 || o.outcome >= dims.K) bad_outcome = true;
        if (!std::isfinite(o.value)) bad_value = true;
        if (!seen.insert({o.day, o.outcome, o.replicate}).second) duplicate = true;
    }
    if (outside) fail("observation outside horizon");
    if (bad_outcome) fail("outcome index outside [1, K]");
    if (bad_value) fail("non-finite outcome value");
    if (duplicate) fail("duplicate (day, outcome, replicate) observation");
    return check;
}

ValidationReport validate_cohort(const Cohort& records, const ModelDims& dims) {
    ValidationReport report;
    if (dims.K < 1 || dims.p < 1 || dims.r < 1) {
        report.records.push_back({"<dims>", {"model dimensions must all be >= 1"}});
        return report;
    }
    report.records.reserve(records.size());
    for (const auto& r : records) report.records.push_back(validate_record(r, dims));
    return report;
}

std::vector<std::string> validate_theta(const ThetaParams& theta, const ModelDims& dims) {
    std::vector<std::string> errs;
    if (theta.beta.rows() != dims.K || theta.beta.cols() != dims.p) errs.push_back("beta must be K x p");
    if (theta.phi.rows() != dims.K || theta.phi.cols() != dims.r) errs.push_back("phi must be K x r");
    if (theta.rho.size() != dims.K) errs.push_back("rho must have length K");
    if (theta.sigma_nu.size() != dims.K) errs.push_back("sigma_nu must have length K");
    if (theta.sigma_0.size() != dims.K) errs.push_back("sigma_0 must have length K");
    if (theta.sigma_eps.rows() != dims.K || theta.sigma_eps.cols() != dims.K)
        errs.push_back("sigma_eps must be K x K");
    if (!errs.empty()) return errs;

    if (!theta.beta.allFinite() || !theta.phi.allFinite()) errs.push_back("non-finite coefficient");
    if ((theta.rho.array().abs() >= 1.0).any() || !theta.rho.allFinite())
        errs.push_back("|rho_k| must be < 1");
    if (!(theta.sigma_nu.array() > 0.0).all()) errs.push_back("sigma_nu entries must be > 0");
    if (!(theta.sigma_0.array() > 0.0).all()) errs.push_back("sigma_0 entries must be > 0");
    if (!theta.sigma_eps.isApprox(theta.sigma_eps.transpose(), 1e-12))
        errs.push_back("sigma_eps must be symmetric");
    else if (Eigen::LLT<Eigen::MatrixXd>(theta.sigma_eps).info() != Eigen::Success ||
             !theta.sigma_eps.allFinite())
        errs.push_back("sigma_eps must be positive definite");
    return errs;
}

std::vector<std::size_t> canonical_order(const PatientRecord& record) {
    std::vector<std::size_t> idx(record.observations.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto& obs = record.observations;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(obs[a].day, obs[a].replicate, obs[a].outcome) <
               std::tie(obs[b].day, obs[b].replicate, obs[b].outcome);
    });
    return idx;
}

}  // namespace mdlm
