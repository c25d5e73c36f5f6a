#ifndef MDLM_IO_HPP
#define MDLM_IO_HPP

// CSV formats shared by the command-line tools.
//
//   adherence: patient_id,day,<col>[,<col>...]    values 0, 1 or NA
//   outcomes:  "# outcomes: <name>[,<name>...]" manifest line, then
//              patient_id,day,outcome,value
//   baseline:  patient_id,<covariate>[,<covariate>...]  (intercept implied)
//   draws:     chain,iteration,parameter,value
//   summary:   parameter,mean,q05,q95,rhat,flag
//   smooth:    patient_id,day,outcome,post_mean,q05,q95

#include "mdlm/baselines.hpp"
#include "mdlm/core.hpp"
#include "mdlm/sampler.hpp"
#include "mdlm/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdlm::io {

/// Unreadable file or malformed row; the message carries file and line.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CohortData {
    Cohort records;
    ModelDims dims;
    std::vector<std::string> outcome_names;
    std::vector<std::string> adherence_names;
    /// Baseline covariates after the implied intercept.
    std::vector<std::string> covariate_names;

    bool operator==(const CohortData&) const = default;
};

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_field(const std::string& s);
/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Reads the three input files into records. The baseline path may be empty,
/// in which case every record gets the intercept only. Same-day readings of
/// one outcome get replicate numbers in order of appearance. Throws IoError;
/// record invariants are checked separately by validate_cohort.
CohortData ingest(const std::filesystem::path& adherence, const std::filesystem::path& outcomes,
                  const std::filesystem::path& baseline);

void write_adherence(const CohortData& data, const std::filesystem::path& path);
void write_outcomes(const CohortData& data, const std::filesystem::path& path);
void write_baseline(const CohortData& data, const std::filesystem::path& path);

/// Writes adherence.csv, outcomes.csv and baseline.csv into `dir`.
void emit(const CohortData& data, const std::filesystem::path& dir);

/// Imputed adherence: imputation,patient_id,day,<cols...>.
void write_imputed(const std::vector<CohortData>& datasets, const std::filesystem::path& path);

void write_draws(const ChainSet& chains, const std::filesystem::path& path);

/// Reads a draws file back; chain and parameter order follow first
/// appearance. The imputation index is not recoverable and is set to 0.
ChainSet read_draws(const std::filesystem::path& path);

void write_summary(const ChainSet& chains, const std::filesystem::path& path, double level = 0.90);

void write_comparison(const ComparisonReport& report, const std::filesystem::path& path);

}  // namespace mdlm::io

#endif  // MDLM_IO_HPP
