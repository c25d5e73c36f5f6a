#include "mdlm/sampler.hpp"

#include "mdlm/core.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mdlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Prior

bool Prior::in_support(double x) const {
    if (!std::isfinite(x)) return false;
    switch (family) {
        case PriorFamily::Normal:
        case PriorFamily::Flat: return true;
        case PriorFamily::Uniform: return x > a && x < b;
        case PriorFamily::SymmetricBeta: return x > -1.0 && x < 1.0;
    }
    return false;
}

double Prior::log_density(double x) const {
    if (!in_support(x)) return kNegInf;
    switch (family) {
        case PriorFamily::Normal:
            return -0.5 * std::log(2.0 * std::numbers::pi * b) - 0.5 * (x - a) * (x - a) / b;
        case PriorFamily::Uniform: return -std::log(b - a);
        case PriorFamily::Flat: return 0.0;
        case PriorFamily::SymmetricBeta:
            return a * std::log1p(-x * x) - ((2.0 * a + 1.0) * std::numbers::ln2 + log_beta_fn(a + 1.0, a + 1.0));
    }
    return kNegInf;
}

double Prior::draw(Rng& rng) const {
    switch (family) {
        case PriorFamily::Normal: return a + std::sqrt(b) * std::normal_distribution<double>()(rng);
        case PriorFamily::Uniform: {
            double x;
            do x = std::uniform_real_distribution<double>(a, b)(rng);
            while (!(x > a && x < b));
            return x;
        }
        case PriorFamily::SymmetricBeta: {
            std::gamma_distribution<double> g(a + 1.0, 1.0);
            double x;
            do {
                const double g1 = g(rng), g2 = g(rng);
                x = 2.0 * g1 / (g1 + g2) - 1.0;
            } while (!(x > -1.0 && x < 1.0));
            return x;
        }
        case PriorFamily::Flat: break;
    }
    throw std::logic_error("cannot draw from a flat prior");
}

double Prior::cdf(double x) const {
    switch (family) {
        case PriorFamily::Normal: return 0.5 * std::erfc(-(x - a) / std::sqrt(2.0 * b));
        case PriorFamily::Uniform: return std::clamp((x - a) / (b - a), 0.0, 1.0);
        default: throw std::logic_error("cdf only available for normal and uniform priors");
    }
}

std::optional<double> Prior::mean() const {
    switch (family) {
        case PriorFamily::Normal: return a;
        case PriorFamily::Uniform: return 0.5 * (a + b);
        case PriorFamily::SymmetricBeta: return 0.0;
        case PriorFamily::Flat: return std::nullopt;
    }
    return std::nullopt;
}

std::string Prior::describe() const {
    switch (family) {
        case PriorFamily::Normal: return "normal(" + fmt_num(a) + "," + fmt_num(b) + ")";
        case PriorFamily::Uniform: return "uniform(" + fmt_num(a) + "," + fmt_num(b) + ")";
        case PriorFamily::Flat: return "flat";
        case PriorFamily::SymmetricBeta: return "symbeta(" + fmt_num(a) + ")";
    }
    return "?";
}

std::optional<std::string> Prior::check() const {
    switch (family) {
        case PriorFamily::Normal:
            if (!std::isfinite(a) || !(b > 0.0) || !std::isfinite(b)) return "normal prior needs finite mean and variance > 0";
            break;
        case PriorFamily::Uniform:
            if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) return "uniform prior needs finite lower < upper";
            break;
        case PriorFamily::SymmetricBeta:
            if (!(a > -1.0) || !std::isfinite(a)) return "symbeta exponent must be > -1";
            break;
        case PriorFamily::Flat: break;
    }
    return std::nullopt;
}

Prior Prior::parse(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(c));
    if (s == "flat") return flat();
    const auto open = s.find('('), close = s.rfind(')');
    if (open == std::string::npos || close != s.size() - 1)
        throw std::invalid_argument("cannot parse prior '" + text + "'");
    const std::string family = s.substr(0, open);
    std::vector<double> args;
    std::stringstream inner(s.substr(open + 1, close - open - 1));
    for (std::string item; std::getline(inner, item, ',');) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || item.empty()) throw std::invalid_argument("cannot parse prior '" + text + "'");
        args.push_back(v);
    }
    Prior p;
    if (family == "normal" && args.size() == 2) p = normal(args[0], args[1]);
    else if (family == "uniform" && args.size() == 2) p = uniform(args[0], args[1]);
    else if (family == "symbeta" && args.size() == 1) p = symmetric_beta(args[0]);
    else throw std::invalid_argument("cannot parse prior '" + text + "'");
    if (auto err = p.check()) throw std::invalid_argument(*err);
    return p;
}

// ---------------------------------------------------------------------------
// Transforms

double to_constrained(Transform t, double u) {
    switch (t) {
        case Transform::Identity: return u;
        case Transform::Log: return std::exp(u);
        case Transform::Atanh: return std::tanh(u);
    }
    return u;
}

double to_unconstrained(Transform t, double x) {
    switch (t) {
        case Transform::Identity: return x;
        case Transform::Log: return std::log(x);
        case Transform::Atanh: return std::atanh(x);
    }
    return x;
}

double log_abs_jacobian(Transform t, double u) {
    switch (t) {
        case Transform::Identity: return 0.0;
        case Transform::Log: return u;
        case Transform::Atanh: {
            const double a = std::abs(u);
            return 2.0 * std::numbers::ln2 - 2.0 * a - 2.0 * std::log1p(std::exp(-2.0 * a));
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// ChainSet and diagnostics

Index ChainSet::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}

std::vector<Eigen::VectorXd> ChainSet::chains_for(Index param) const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(draws.size());
    for (const auto& d : draws) out.emplace_back(d.col(param));
    return out;
}

Eigen::VectorXd ChainSet::pooled(Index param) const {
    Eigen::VectorXd out(n_chains() * n_draws());
    Index pos = 0;
    for (const auto& d : draws) {
        out.segment(pos, d.rows()) = d.col(param);
        pos += d.rows();
    }
    return out;
}

void ChainSet::compute_rhat() {
    rhat = Eigen::VectorXd::Constant(n_params(), std::numeric_limits<double>::quiet_NaN());
    if (n_chains() < 2 || n_draws() < 10) return;
    for (Index p = 0; p < n_params(); ++p)
        if (!(p < static_cast<Index>(fixed.size()) && fixed[p])) rhat(p) = gelman_rubin(chains_for(p));
}

double gelman_rubin(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.size() < 2) throw std::invalid_argument("gelman_rubin needs at least 2 chains");
    Index n_min = std::numeric_limits<Index>::max();
    for (const auto& c : chains) n_min = std::min(n_min, c.size());
    if (n_min < 10) throw std::invalid_argument("gelman_rubin needs at least 10 draws per chain");

    // Split each chain into two halves (the middle draw is dropped when odd).
    const Index half = n_min / 2;
    std::vector<Eigen::VectorXd> parts;
    for (const auto& c : chains) {
        parts.emplace_back(c.head(half));
        parts.emplace_back(c.segment(n_min - half, half));
    }
    const double m = static_cast<double>(parts.size()), n = static_cast<double>(half);
    Eigen::VectorXd means(parts.size()), vars(parts.size());
    for (std::size_t j = 0; j < parts.size(); ++j) {
        means(j) = parts[j].mean();
        vars(j) = (parts[j].array() - means(j)).square().sum() / (n - 1.0);
    }
    const double W = vars.mean();
    const double B = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
    if (!(W > 0.0)) return std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(values.size() - 1, lo + 1);
    const double h = pos - static_cast<double>(lo);
    return values[lo] + h * (values[hi] - values[lo]);
}

std::vector<ParamSummary> summarize(const ChainSet& chains, double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("summary level must be in (0, 1)");
    std::vector<ParamSummary> out;
    const double tail = 0.5 * (1.0 - level);
    for (Index p = 0; p < chains.n_params(); ++p) {
        const Eigen::VectorXd v = chains.pooled(p);
        std::vector<double> vals(v.data(), v.data() + v.size());
        ParamSummary s;
        s.name = chains.names[p];
        s.mean = v.size() ? v.mean() : std::numeric_limits<double>::quiet_NaN();
        s.lower = quantile(vals, tail);
        s.upper = quantile(vals, 1.0 - tail);
        s.fixed = p < static_cast<Index>(chains.fixed.size()) && chains.fixed[p];
        s.rhat = p < chains.rhat.size() ? chains.rhat(p) : std::numeric_limits<double>::quiet_NaN();
        s.excludes_zero = s.lower > 0.0 || s.upper < 0.0;
        s.converged = s.fixed || (std::isfinite(s.rhat) && s.rhat < 1.1);
        out.push_back(s);
    }
    return out;
}

bool converged(const ChainSet& chains) {
    for (const auto& s : summarize(chains)) if (!s.converged) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

struct Block {
    std::vector<Index> members;
    Eigen::MatrixXd chol;  // proposal shape
    double log_scale = 0.0;
};

struct ChainResult {
    Eigen::MatrixXd draws;
    Eigen::VectorXd acceptance;
    Eigen::VectorXd scale;
};

/// Warm-up windows for proposal-covariance estimation: an initial buffer
/// with scale-only adaptation, then doubling windows, then a terminal
/// buffer. Returns the iteration at which each window closes.
std::vector<int> window_ends(int warmup) {
    std::vector<int> ends;
    if (warmup < 20) return ends;
    int init = 75, term = 50, base = 25;
    if (init + term + base > warmup) {
        init = static_cast<int>(0.15 * warmup);
        term = static_cast<int>(0.1 * warmup);
        base = warmup - init - term;
    }
    int start = init, size = base;
    const int last = warmup - term;
    while (start < last) {
        int end = start + size;
        if (end + 2 * size > last) end = last;
        ends.push_back(end);
        start = end;
        size *= 2;
    }
    return ends;
}

class Chain {
public:
    Chain(const Target& target, const SamplerConfig& cfg, const std::vector<bool>& fixed,
          const Eigen::VectorXd& fixed_values, int chain)
        : target_(target), params_(target.params()), cfg_(cfg), fixed_(fixed), fixed_values_(fixed_values),
          rng_(make_stream(cfg.seed, {static_cast<std::uint64_t>(chain)})) {
        const Index P = static_cast<Index>(params_.size());
        std::map<int, std::vector<Index>> by_block;
        for (Index i = 0; i < P; ++i)
            if (!fixed_[i]) by_block[params_[i].block].push_back(i);
        for (auto& [id, members] : by_block) {
            Block b;
            b.members = members;
            b.chol = Eigen::MatrixXd::Zero(members.size(), members.size());
            for (std::size_t j = 0; j < members.size(); ++j) b.chol(j, j) = params_[members[j]].step;
            blocks_.push_back(std::move(b));
        }
        if (cfg_.joint_update && blocks_.size() > 1) {
            Block all;
            for (Index i = 0; i < P; ++i)
                if (!fixed_[i]) all.members.push_back(i);
            all.chol = Eigen::MatrixXd::Zero(all.members.size(), all.members.size());
            for (std::size_t j = 0; j < all.members.size(); ++j) all.chol(j, j) = params_[all.members[j]].step;
            all.log_scale = std::log(0.5);
            blocks_.push_back(std::move(all));
        }
        u_ = Eigen::VectorXd::Zero(P);
        for (Index i = 0; i < P; ++i)
            if (fixed_[i]) u_(i) = to_unconstrained(params_[i].transform, fixed_values(i));
        initialize();
    }

    ChainResult run() {
        const int W = cfg_.warmup;
        const auto ends = window_ends(W);
        std::size_t next_window = 0;
        const int window_open = ends.empty() ? W : (W < 150 ? static_cast<int>(0.15 * W) : 75);
        int window_start = window_open;
        Eigen::MatrixXd window_sum, window_outer;
        int window_n = 0;
        auto reset_window = [&] {
            const Index P = u_.size();
            window_sum = Eigen::VectorXd::Zero(P);
            window_outer = Eigen::MatrixXd::Zero(P, P);
            window_n = 0;
        };
        reset_window();
        std::vector<int> rm_count(blocks_.size(), 0);

        for (int it = 0; it < W; ++it) {
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                const double a = step(blocks_[b]);
                ++rm_count[b];
                blocks_[b].log_scale += std::pow(rm_count[b], -0.6) * (a - cfg_.target_accept);
                blocks_[b].log_scale = std::clamp(blocks_[b].log_scale, -30.0, 10.0);
            }
            if (it >= window_start && next_window < ends.size()) {
                window_sum += u_;
                window_outer.noalias() += u_ * u_.transpose();
                ++window_n;
                if (it + 1 == ends[next_window]) {
                    refit_proposals(window_sum, window_outer, window_n);
                    std::fill(rm_count.begin(), rm_count.end(), 0);
                    reset_window();
                    window_start = it + 1;
                    ++next_window;
                }
            }
        }

        ChainResult res;
        const Index P = u_.size();
        res.draws.resize(cfg_.draws, P);
        res.acceptance = Eigen::VectorXd::Zero(static_cast<Index>(blocks_.size()));
        res.scale.resize(static_cast<Index>(blocks_.size()));
        for (std::size_t b = 0; b < blocks_.size(); ++b) res.scale(b) = std::exp(blocks_[b].log_scale);
        const long total = static_cast<long>(cfg_.draws) * cfg_.thin;
        Index kept = 0;
        for (long it = 0; it < total; ++it) {
            for (std::size_t b = 0; b < blocks_.size(); ++b) {
                step(blocks_[b]);
                if (last_accepted_) res.acceptance(b) += 1.0;
            }
            if ((it + 1) % cfg_.thin == 0) res.draws.row(kept++) = constrained().transpose();
        }
        if (total > 0) res.acceptance /= static_cast<double>(total);
        return res;
    }

private:
    Eigen::VectorXd constrained() const {
        Eigen::VectorXd x(u_.size());
        for (Index i = 0; i < u_.size(); ++i) x(i) = value_of(i, u_(i));
        return x;
    }

    double value_of(Index i, double u) const {
        return fixed_[i] ? fixed_values_(i) : to_constrained(params_[i].transform, u);
    }

    double log_target(const Eigen::VectorXd& u) const {
        Eigen::VectorXd x(u.size());
        double lp = 0.0;
        for (Index i = 0; i < u.size(); ++i) {
            x(i) = value_of(i, u(i));
            if (fixed_[i]) continue;
            lp += params_[i].prior.log_density(x(i)) + log_abs_jacobian(params_[i].transform, u(i));
        }
        if (!std::isfinite(lp)) return kNegInf;
        if (!cfg_.use_likelihood) return lp;
        const double ll = target_.log_likelihood(x);
        return std::isfinite(ll) ? lp + ll : kNegInf;
    }

    void initialize() {
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (Index i = 0; i < u_.size(); ++i) {
                if (fixed_[i]) continue;
                const auto& p = params_[i];
                double x;
                if (p.init) x = *p.init;
                else if (p.prior.family == PriorFamily::Flat) x = 0.0;
                else x = p.prior.draw(rng_);
                u_(i) = to_unconstrained(p.transform, x);
            }
            current_ = log_target(u_);
            if (std::isfinite(current_)) return;
        }
        throw NumericError("cannot initialize");
    }

    /// One Metropolis update of a block; returns the acceptance probability.
    double step(Block& b) {
        const Index d = static_cast<Index>(b.members.size());
        Eigen::VectorXd z(d);
        for (Index j = 0; j < d; ++j) z(j) = normal_(rng_);
        const Eigen::VectorXd delta = std::exp(b.log_scale) * (b.chol * z);
        Eigen::VectorXd prop = u_;
        for (Index j = 0; j < d; ++j) prop(b.members[j]) += delta(j);
        const double lp = log_target(prop);
        const double log_ratio = lp - current_;
        const double accept_prob = std::isfinite(lp) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
        last_accepted_ = std::isfinite(lp) && std::log(uniform_(rng_)) < log_ratio;
        if (last_accepted_) {
            u_ = std::move(prop);
            current_ = lp;
        }
        return accept_prob;
    }

    void refit_proposals(const Eigen::VectorXd& sum, const Eigen::MatrixXd& outer, int n) {
        if (n < 3) return;
        const Eigen::VectorXd mean = sum / n;
        const Eigen::MatrixXd cov = (outer - n * mean * mean.transpose()) / (n - 1);
        for (auto& b : blocks_) {
            const Index d = static_cast<Index>(b.members.size());
            Eigen::MatrixXd c(d, d);
            for (Index i = 0; i < d; ++i)
                for (Index j = 0; j < d; ++j) c(i, j) = cov(b.members[i], b.members[j]);
            const double w = static_cast<double>(n) / (n + 5.0);
            Eigen::MatrixXd reg = w * c;
            reg.diagonal().array() += 1e-3 * (1.0 - w);
            Eigen::LLT<Eigen::MatrixXd> llt(reg);
            if (llt.info() != Eigen::Success || !llt.matrixL().toDenseMatrix().allFinite()) continue;
            b.chol = llt.matrixL();
            b.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
        }
    }

    const Target& target_;
    const std::vector<ParamSpec>& params_;
    const SamplerConfig& cfg_;
    const std::vector<bool>& fixed_;
    const Eigen::VectorXd& fixed_values_;
    Rng rng_;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::vector<Block> blocks_;
    Eigen::VectorXd u_;
    double current_ = kNegInf;
    bool last_accepted_ = false;
};

}  // namespace

ChainSet run_sampler(const Target& target, const SamplerConfig& cfg) {
    if (cfg.chains < 1) throw std::invalid_argument("chains must be >= 1");
    if (cfg.warmup < 0 || cfg.draws < 1 || cfg.thin < 1) throw std::invalid_argument("invalid draw counts");
    if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0))
        throw std::invalid_argument("target acceptance must be in (0, 1)");
    const auto& params = target.params();
    const Index P = static_cast<Index>(params.size());
    std::vector<bool> fixed(P, false);
    Eigen::VectorXd fixed_values = Eigen::VectorXd::Zero(P);
    for (const auto& [name, value] : cfg.fixed) {
        auto it = std::find_if(params.begin(), params.end(), [&](const ParamSpec& p) { return p.name == name; });
        if (it == params.end()) throw std::invalid_argument("unknown fixed parameter '" + name + "'");
        const Index i = it - params.begin();
        fixed[i] = true;
        fixed_values(i) = value;
    }

    std::vector<ChainResult> results(cfg.chains);
    std::vector<std::exception_ptr> errors(cfg.chains);
    auto run_one = [&](int c) {
        try {
            Chain chain(target, cfg, fixed, fixed_values, c);
            results[c] = chain.run();
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.chains)));
    if (nt == 1) {
        for (int c = 0; c < cfg.chains; ++c) run_one(c);
    } else {
        for (int first = 0; first < cfg.chains; first += static_cast<int>(nt)) {
            std::vector<std::thread> pool;
            for (int c = first; c < std::min(cfg.chains, first + static_cast<int>(nt)); ++c)
                pool.emplace_back(run_one, c);
            for (auto& t : pool) t.join();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ChainSet out;
    for (const auto& p : params) out.names.push_back(p.name);
    out.fixed = fixed;
    out.seed = cfg.seed;
    out.warmup = cfg.warmup;
    out.thin = cfg.thin;
    out.imputation.assign(cfg.chains, 0);
    const Index nb = results.front().acceptance.size();
    out.acceptance.resize(cfg.chains, nb);
    out.proposal_scale.resize(cfg.chains, nb);
    for (int c = 0; c < cfg.chains; ++c) {
        out.acceptance.row(c) = results[c].acceptance.transpose();
        out.proposal_scale.row(c) = results[c].scale.transpose();
        out.draws.push_back(std::move(results[c].draws));
    }
    out.compute_rhat();
    return out;
}

// ---------------------------------------------------------------------------
// DLM layout and target

namespace {

std::string idx1(Index a) { return "[" + std::to_string(a + 1) + "]"; }
std::string idx2(Index a, Index b) { return "[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]"; }

Prior with_override(const PriorSpec& spec, const std::string& name, const Prior& fallback) {
    auto it = spec.overrides.find(name);
    return it == spec.overrides.end() ? fallback : it->second;
}

std::optional<double> mid_support(const Prior& p) {
    if (p.family == PriorFamily::Uniform) return 0.5 * (p.a + p.b);
    return std::nullopt;
}

}  // namespace

std::vector<std::string> PriorSpec::validate() const {
    std::vector<std::string> errs;
    auto check = [&](const std::string& what, const Prior& p) {
        if (auto e = p.check()) errs.push_back(what + ": " + *e);
    };
    if (!(intercept_variance > 0.0)) errs.push_back("intercept variance must be > 0");
    if (!(beta_variance > 0.0)) errs.push_back("beta variance must be > 0");
    check("phi", phi);
    check("rho", rho);
    check("sigma_eps", sigma_eps);
    check("rho_eps", rho_eps);
    check("sigma_nu", sigma_nu);
    check("sigma_0", sigma_0);
    for (const auto& [name, p] : overrides) check(name, p);
    auto positive = [&](const std::string& what, const Prior& p) {
        if (p.family == PriorFamily::Uniform && p.a < 0.0) errs.push_back(what + ": support must be positive");
    };
    positive("sigma_eps", sigma_eps);
    positive("sigma_nu", sigma_nu);
    positive("sigma_0", sigma_0);
    return errs;
}

std::vector<ParamSpec> dlm_parameters(const ModelDims& d, const PriorSpec& prior) {
    std::vector<ParamSpec> ps;
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.p; ++j) {
            ParamSpec s;
            s.name = "beta" + idx2(k, j);
            const double m = j == 0 && k < static_cast<Index>(prior.intercept_means.size())
                                 ? prior.intercept_means[k]
                                 : 0.0;
            s.prior = with_override(prior, s.name, Prior::normal(m, j == 0 ? prior.intercept_variance : prior.beta_variance));
            s.block = 0;
            s.step = 1.0;
            if (j == 0) s.init = s.prior.mean();
            ps.push_back(s);
        }
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.r; ++j) {
            ParamSpec s;
            s.name = "phi" + idx2(k, j);
            s.prior = with_override(prior, s.name, prior.phi);
            s.block = 1;
            s.step = 0.05;
            ps.push_back(s);
        }
    for (Index k = 0; k < d.K; ++k) {
        ParamSpec s;
        s.name = "rho" + idx1(k);
        s.transform = Transform::Atanh;
        s.prior = with_override(prior, s.name, prior.rho);
        s.block = 1;
        s.step = 0.05;
        ps.push_back(s);
    }
    auto sd_param = [&](const std::string& name, const Prior& base) {
        ParamSpec s;
        s.name = name;
        s.transform = Transform::Log;
        s.prior = with_override(prior, name, base);
        s.block = 2;
        s.step = 0.05;
        s.init = mid_support(s.prior);
        return s;
    };
    for (Index k = 0; k < d.K; ++k) ps.push_back(sd_param("sigma_eps" + idx1(k), prior.sigma_eps));
    for (Index k = 0; k < d.K; ++k)
        for (Index l = k + 1; l < d.K; ++l) {
            ParamSpec s;
            s.name = "rho_eps" + idx2(k, l);
            s.transform = Transform::Atanh;
            const Prior base = d.K == 2 ? prior.rho_eps
                                        : Prior::symmetric_beta(0.5 * static_cast<double>(d.K - k - 2));
            s.prior = with_override(prior, s.name, base);
            s.block = 2;
            s.step = 0.05;
            ps.push_back(s);
        }
    for (Index k = 0; k < d.K; ++k) ps.push_back(sd_param("sigma_nu" + idx1(k), prior.sigma_nu));
    for (Index k = 0; k < d.K; ++k) ps.push_back(sd_param("sigma_0" + idx1(k), prior.sigma_0));
    return ps;
}

Eigen::MatrixXd correlation_from_partials(Index K, const Eigen::VectorXd& z) {
    if (z.size() != K * (K - 1) / 2) throw std::invalid_argument("wrong number of partial correlations");
    // Lower Cholesky factor built row by row; z is ordered (0,1),(0,2),...,(1,2),...
    auto pair = [K](Index k, Index l) { return k * K - k * (k + 1) / 2 + (l - k - 1); };
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(K, K);
    L(0, 0) = 1.0;
    for (Index i = 1; i < K; ++i) {
        double used = 0.0;
        for (Index j = 0; j < i; ++j) {
            L(i, j) = z(pair(j, i)) * std::sqrt(std::max(0.0, 1.0 - used));
            used += L(i, j) * L(i, j);
        }
        L(i, i) = std::sqrt(std::max(0.0, 1.0 - used));
    }
    Eigen::MatrixXd R = L * L.transpose();
    R.diagonal().setOnes();
    return R;
}

Eigen::VectorXd partials_from_correlation(const Eigen::MatrixXd& corr) {
    const Index K = corr.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("correlation matrix not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd z(K * (K - 1) / 2);
    Index pos = 0;
    for (Index k = 0; k < K; ++k)
        for (Index l = k + 1; l < K; ++l) {
            double used = 0.0;
            for (Index j = 0; j < k; ++j) used += L(l, j) * L(l, j);
            z(pos++) = L(l, k) / std::sqrt(1.0 - used);
        }
    return z;
}

ThetaParams theta_from_values(const ModelDims& d, const Eigen::VectorXd& v) {
    const Index npair = d.K * (d.K - 1) / 2;
    if (v.size() != d.K * d.p + d.K * d.r + d.K * 4 + npair)
        throw std::invalid_argument("theta_from_values: wrong parameter count");
    ThetaParams th = ThetaParams::zeros(d);
    Index pos = 0;
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.p; ++j) th.beta(k, j) = v(pos++);
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.r; ++j) th.phi(k, j) = v(pos++);
    for (Index k = 0; k < d.K; ++k) th.rho(k) = v(pos++);
    const Eigen::VectorXd sd = v.segment(pos, d.K);
    pos += d.K;
    const Eigen::MatrixXd R = correlation_from_partials(d.K, v.segment(pos, npair));
    pos += npair;
    th.sigma_eps = sd.asDiagonal() * R * sd.asDiagonal();
    for (Index k = 0; k < d.K; ++k) th.sigma_nu(k) = v(pos + k) * v(pos + k);
    pos += d.K;
    for (Index k = 0; k < d.K; ++k) th.sigma_0(k) = v(pos + k) * v(pos + k);
    return th;
}

Eigen::VectorXd values_from_theta(const ModelDims& d, const ThetaParams& th) {
    const Index npair = d.K * (d.K - 1) / 2;
    Eigen::VectorXd v(d.K * d.p + d.K * d.r + d.K * 4 + npair);
    Index pos = 0;
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.p; ++j) v(pos++) = th.beta(k, j);
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.r; ++j) v(pos++) = th.phi(k, j);
    for (Index k = 0; k < d.K; ++k) v(pos++) = th.rho(k);
    const Eigen::VectorXd sd = th.sigma_eps.diagonal().cwiseSqrt();
    v.segment(pos, d.K) = sd;
    pos += d.K;
    if (npair > 0) {
        const Eigen::MatrixXd R = sd.cwiseInverse().asDiagonal() * th.sigma_eps * sd.cwiseInverse().asDiagonal();
        v.segment(pos, npair) = partials_from_correlation(R);
    }
    pos += npair;
    v.segment(pos, d.K) = th.sigma_nu.cwiseSqrt();
    pos += d.K;
    v.segment(pos, d.K) = th.sigma_0.cwiseSqrt();
    return v;
}

double log_prior(const std::vector<ParamSpec>& params, const Eigen::VectorXd& values) {
    if (values.size() != static_cast<Index>(params.size()))
        throw std::invalid_argument("log_prior: wrong parameter count");
    double lp = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) lp += params[i].prior.log_density(values(i));
    return lp;
}

namespace {

class DlmTarget final : public Target {
public:
    DlmTarget(const Cohort& records, const ModelDims& dims, const PriorSpec& prior, unsigned threads)
        : dims_(dims), params_(dlm_parameters(dims, prior)), likelihood_(records, dims.K, threads) {}

    const std::vector<ParamSpec>& params() const override { return params_; }

    double log_likelihood(const Eigen::VectorXd& x) const override {
        const ThetaParams th = theta_from_values(dims_, x);
        if (!((th.rho.array().abs() < 1.0).all())) return kNegInf;
        try {
            return likelihood_(th);
        } catch (const NumericError&) {
            return kNegInf;
        }
    }

private:
    ModelDims dims_;
    std::vector<ParamSpec> params_;
    CohortLikelihood<double> likelihood_;
};

}  // namespace

double log_posterior(const ThetaParams& theta, const Cohort& records, const PriorSpec& prior) {
    const ModelDims d = theta.dims();
    if (!validate_theta(theta, d).empty()) return kNegInf;
    const double lp = log_prior(dlm_parameters(d, prior), values_from_theta(d, theta));
    if (!std::isfinite(lp)) return kNegInf;
    return lp + cohort_log_likelihood(records, theta);
}

ChainSet run_chains(const Cohort& records, const ModelDims& dims, const PriorSpec& prior,
                    const SamplerConfig& config) {
    const auto report = validate_cohort(records, dims);
    if (!report.ok()) throw ValidationError("invalid cohort:\n" + report.describe());
    for (const auto& r : records)
        if (r.has_missing_covariates())
            throw ValidationError("record '" + r.id + "' has missing covariates; impute first");
    if (auto errs = prior.validate(); !errs.empty()) throw std::invalid_argument("invalid prior: " + errs.front());
    SamplerConfig cfg = config;
    // Patient-level threads only when chains cannot use them.
    const unsigned lik_threads = cfg.threads > static_cast<unsigned>(cfg.chains) ? cfg.threads / cfg.chains : 1;
    DlmTarget target(records, dims, prior, lik_threads);
    return run_sampler(target, cfg);
}

}  // namespace mdlm
