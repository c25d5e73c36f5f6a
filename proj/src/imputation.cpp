#include "mdlm/imputation.hpp"

#include "mdlm/errors.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace mdlm {

AdherencePosterior adherence_posterior(const PatientRecord& record, Index column) {
    if (column < 0 || column >= record.covariates_dynamic.cols())
        throw std::out_of_range("adherence column out of range");
    AdherencePosterior post;
    for (Index t = 0; t < record.horizon(); ++t) {
        const double c = record.covariates_dynamic(t, column);
        if (is_missing(c)) continue;
        if (c > 0) ++post.n_pos;
        else ++post.n_neg;
    }
    if (post.n_pos + post.n_neg == 0)
        throw ValidationError("record '" + record.id + "': no observed adherence");
    return post;
}

double draw_beta(double a, double b, Rng& rng) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

PatientRecord impute_record(const PatientRecord& record, const Eigen::VectorXd& eta, Rng& rng) {
    if (eta.size() != record.covariates_dynamic.cols())
        throw std::invalid_argument("impute_record: one rate per covariate column required");
    PatientRecord out = record;
    auto& c = out.covariates_dynamic;
    for (Index j = 0; j < c.cols(); ++j) {
        std::bernoulli_distribution adherent(std::clamp(eta(j), 0.0, 1.0));
        for (Index t = 0; t < c.rows(); ++t)
            if (is_missing(c(t, j))) c(t, j) = adherent(rng) ? 1.0 : -1.0;
    }
    return out;
}

std::vector<Cohort> impute_cohort(const Cohort& records, int M, std::uint64_t seed) {
    if (M < 1) throw std::invalid_argument("number of imputations must be >= 1");
    std::vector<std::vector<Index>> gaps(records.size());
    std::vector<std::vector<AdherencePosterior>> by_record(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& c = records[i].covariates_dynamic;
        for (Index j = 0; j < c.cols(); ++j)
            if (c.col(j).array().isNaN().any()) {
                gaps[i].push_back(j);
                by_record[i].push_back(adherence_posterior(records[i], j));
            }
    }
    std::vector<Cohort> out(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        out[m].reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (gaps[i].empty()) {
                out[m].push_back(records[i]);
                continue;
            }
            Rng rng = make_stream(seed, {static_cast<std::uint64_t>(m), i});
            Eigen::VectorXd eta = Eigen::VectorXd::Ones(records[i].covariates_dynamic.cols());
            for (std::size_t g = 0; g < gaps[i].size(); ++g)
                eta(gaps[i][g]) = draw_beta(by_record[i][g].alpha(), by_record[i][g].beta(), rng);
            out[m].push_back(impute_record(records[i], eta, rng));
        }
    }
    return out;
}

ChainSet pool_draws(const std::vector<ChainSet>& sets) {
    if (sets.empty()) throw std::invalid_argument("pool_draws: nothing to pool");
    ChainSet out = sets.front();
    out.draws.clear();
    out.imputation.clear();
    const Index nb = sets.front().acceptance.cols();
    Index rows = 0;
    for (const auto& s : sets) rows += s.acceptance.rows();
    out.acceptance.resize(rows, nb);
    out.proposal_scale.resize(rows, nb);
    Index row = 0;
    for (std::size_t m = 0; m < sets.size(); ++m) {
        const auto& s = sets[m];
        if (s.names != out.names) throw std::invalid_argument("pool_draws: mismatched parameter sets");
        if (s.fixed != out.fixed) throw std::invalid_argument("pool_draws: mismatched fixed parameters");
        if (s.n_draws() != sets.front().n_draws())
            throw std::invalid_argument("pool_draws: unequal draw counts");
        if (s.acceptance.cols() != nb) throw std::invalid_argument("pool_draws: mismatched block layout");
        for (Index c = 0; c < s.n_chains(); ++c) {
            out.draws.push_back(s.draws[c]);
            out.imputation.push_back(sets.size() == 1 && c < static_cast<Index>(s.imputation.size())
                                         ? s.imputation[c]
                                         : static_cast<int>(m));
        }
        out.acceptance.middleRows(row, s.acceptance.rows()) = s.acceptance;
        out.proposal_scale.middleRows(row, s.proposal_scale.rows()) = s.proposal_scale;
        row += s.acceptance.rows();
    }
    out.compute_rhat();
    return out;
}

}  // namespace mdlm
