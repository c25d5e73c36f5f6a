#ifndef MDLM_TYPES_HPP
#define MDLM_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mdlm {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Outcome count K, baseline covariate count p (intercept included), and
/// dynamic covariate count r.
struct ModelDims {
    Index K = 1;
    Index p = 1;
    Index r = 1;

    bool operator==(const ModelDims&) const = default;
};

/// A single outcome measurement. `day` is 1-based (1..T), `outcome` is a
/// 0-based row index into the outcome dimension. `replicate` numbers the
/// readings of one outcome taken on the same day; readings of different
/// outcomes sharing (day, replicate) belong to the same measurement vector
/// and share the correlated part of the sampling error.
struct Observation {
    int day = 1;
    Index outcome = 0;
    double value = 0.0;
    int replicate = 0;

    bool operator==(const Observation&) const = default;
};

/// Missing dynamic covariates are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

struct PatientRecord {
    std::string id;
    /// T x r, rows are days 1..T. Adherence is coded +1 / -1.
    Eigen::MatrixXd covariates_dynamic;
    /// Length p, first entry is the intercept (1).
    Eigen::VectorXd covariates_baseline;
    std::vector<Observation> observations;

    Index horizon() const { return covariates_dynamic.rows(); }

    bool has_missing_covariates() const {
        return covariates_dynamic.array().isNaN().any();
    }

    bool operator==(const PatientRecord& o) const {
        auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
            if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
            for (Index i = 0; i < a.size(); ++i) {
                const double x = a.data()[i], y = b.data()[i];
                if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
            }
            return true;
        };
        return id == o.id && same(covariates_dynamic, o.covariates_dynamic) &&
               same(covariates_baseline, o.covariates_baseline) &&
               observations == o.observations;
    }
};

using Cohort = std::vector<PatientRecord>;

/// Non-dynamic parameters of the dynamic linear model.
///
/// Variances are stored as variances (not standard deviations); the sampler
/// works on standard deviations and converts at the boundary.
template <typename Scalar>
struct Theta {
    MatrixX<Scalar> beta;       ///< K x p
    VectorX<Scalar> rho;        ///< K, AR(1) coefficients
    MatrixX<Scalar> phi;        ///< K x r
    MatrixX<Scalar> sigma_eps;  ///< K x K sampling covariance
    VectorX<Scalar> sigma_nu;   ///< K innovation variances
    VectorX<Scalar> sigma_0;    ///< K initial-state variances

    ModelDims dims() const { return {beta.rows(), beta.cols(), phi.cols()}; }

    template <typename NewScalar>
    Theta<NewScalar> cast() const {
        return {beta.template cast<NewScalar>(),      rho.template cast<NewScalar>(),
                phi.template cast<NewScalar>(),       sigma_eps.template cast<NewScalar>(),
                sigma_nu.template cast<NewScalar>(),  sigma_0.template cast<NewScalar>()};
    }

    static Theta zeros(const ModelDims& d) {
        return {MatrixX<Scalar>::Zero(d.K, d.p), VectorX<Scalar>::Zero(d.K),
                MatrixX<Scalar>::Zero(d.K, d.r), MatrixX<Scalar>::Identity(d.K, d.K),
                VectorX<Scalar>::Ones(d.K),      VectorX<Scalar>::Ones(d.K)};
    }
};

using ThetaParams = Theta<double>;

}  // namespace mdlm

#endif  // MDLM_TYPES_HPP
