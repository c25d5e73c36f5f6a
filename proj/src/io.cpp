#include "mdlm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

namespace mdlm::io {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

class Reader {
public:
    explicit Reader(const fs::path& path) : path_(path), in_(path) {
        if (!in_) throw IoError(path.string() + ": cannot open file");
    }

    /// Next non-blank line; false at end of file.
    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!trim(line).empty()) return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw IoError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
    }

    double number(const std::string& field, const char* what) const {
        double v = 0.0;
        const std::string s = trim(field);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
            fail(std::string("invalid ") + what + " '" + field + "'");
        return v;
    }

    int integer(const std::string& field, const char* what) const {
        int v = 0;
        const std::string s = trim(field);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
            fail(std::string("invalid ") + what + " '" + field + "'");
        return v;
    }

    std::vector<std::string> row(const std::string& line, std::size_t expected) const {
        auto f = split_csv_line(line);
        if (f.size() != expected)
            fail("expected " + std::to_string(expected) + " fields, found " + std::to_string(f.size()));
        return f;
    }

private:
    fs::path path_;
    std::ifstream in_;
    long line_no_ = 0;
};

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot write file");
    return out;
}

bool is_na(const std::string& s) {
    const std::string t = trim(s);
    return t == "NA" || t == "na" || t == "NaN" || t.empty();
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

CohortData ingest(const fs::path& adherence, const fs::path& outcomes, const fs::path& baseline) {
    CohortData data;
    std::map<std::string, std::size_t> index;
    std::string line;

    {
        Reader in(adherence);
        if (!in.next(line)) in.fail("empty file");
        auto header = split_csv_line(line);
        if (header.size() < 3 || header[0] != "patient_id" || header[1] != "day")
            in.fail("header must be patient_id,day,<adherence column>...");
        data.adherence_names.assign(header.begin() + 2, header.end());
        const std::size_t r = data.adherence_names.size();
        std::vector<std::map<int, Eigen::RowVectorXd>> days;
        while (in.next(line)) {
            auto f = in.row(line, header.size());
            const int day = in.integer(f[1], "day");
            if (day < 1) in.fail("day must be >= 1");
            Eigen::RowVectorXd v(r);
            for (std::size_t j = 0; j < r; ++j) {
                if (is_na(f[2 + j])) {
                    v(j) = kMissing;
                    continue;
                }
                const int a = in.integer(f[2 + j], "adherence value");
                if (a != 0 && a != 1) in.fail("adherence must be 0, 1 or NA");
                v(j) = a == 1 ? 1.0 : -1.0;
            }
            auto [it, fresh] = index.emplace(f[0], data.records.size());
            if (fresh) {
                data.records.emplace_back();
                data.records.back().id = f[0];
                days.emplace_back();
            }
            if (!days[it->second].emplace(day, v).second)
                in.fail("duplicate adherence day " + std::to_string(day) + " for patient '" + f[0] + "'");
        }
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            const auto& d = days[i];
            const int T = d.rbegin()->first;
            if (static_cast<std::size_t>(T) != d.size())
                throw IoError(adherence.string() + ": inconsistent horizon for patient '" +
                              data.records[i].id + "': days must run 1.." + std::to_string(T) +
                              " without gaps");
            auto& c = data.records[i].covariates_dynamic;
            c.resize(T, static_cast<Index>(r));
            for (const auto& [day, v] : d) c.row(day - 1) = v;
        }
    }

    {
        Reader in(outcomes);
        if (!in.next(line)) in.fail("empty file");
        const std::string manifest = trim(line);
        const std::string tag = "# outcomes:";
        if (manifest.rfind(tag, 0) != 0) in.fail("first line must be '# outcomes: <name>,...'");
        data.outcome_names = split_csv_line(manifest.substr(tag.size()));
        for (const auto& n : data.outcome_names)
            if (n.empty()) in.fail("empty outcome name in manifest");
        if (!in.next(line)) in.fail("missing header");
        auto header = split_csv_line(line);
        if (header != std::vector<std::string>{"patient_id", "day", "outcome", "value"})
            in.fail("header must be patient_id,day,outcome,value");
        std::map<std::tuple<std::size_t, int, Index>, int> replicate;
        while (in.next(line)) {
            auto f = in.row(line, 4);
            auto it = index.find(f[0]);
            if (it == index.end()) in.fail("patient '" + f[0] + "' has no adherence rows");
            const int day = in.integer(f[1], "day");
            auto name = std::find(data.outcome_names.begin(), data.outcome_names.end(), f[2]);
            if (name == data.outcome_names.end()) in.fail("outcome '" + f[2] + "' not in manifest");
            const Index k = name - data.outcome_names.begin();
            if (is_na(f[3])) continue;
            const double value = in.number(f[3], "value");
            const int rep = replicate[{it->second, day, k}]++;
            data.records[it->second].observations.push_back({day, k, value, rep});
        }
    }

    if (baseline.empty()) {
        for (auto& r : data.records) r.covariates_baseline = Eigen::VectorXd::Ones(1);
    } else {
        Reader in(baseline);
        if (!in.next(line)) in.fail("empty file");
        auto header = split_csv_line(line);
        if (header.empty() || header[0] != "patient_id") in.fail("header must start with patient_id");
        data.covariate_names.assign(header.begin() + 1, header.end());
        std::vector<bool> seen(data.records.size(), false);
        while (in.next(line)) {
            auto f = in.row(line, header.size());
            auto it = index.find(f[0]);
            if (it == index.end()) in.fail("patient '" + f[0] + "' has no adherence rows");
            if (seen[it->second]) in.fail("duplicate baseline row for patient '" + f[0] + "'");
            seen[it->second] = true;
            Eigen::VectorXd x(static_cast<Index>(header.size()));
            x(0) = 1.0;
            for (std::size_t j = 1; j < header.size(); ++j) x(j) = in.number(f[j], "covariate");
            data.records[it->second].covariates_baseline = x;
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i])
                throw IoError(baseline.string() + ": no baseline row for patient '" + data.records[i].id + "'");
    }

    data.dims = {static_cast<Index>(data.outcome_names.size()),
                 static_cast<Index>(data.covariate_names.size() + 1),
                 static_cast<Index>(data.adherence_names.size())};
    return data;
}

void write_adherence(const CohortData& data, const fs::path& path) {
    auto out = open_out(path);
    out << "patient_id,day";
    for (const auto& n : data.adherence_names) out << ',' << csv_field(n);
    out << '\n';
    for (const auto& r : data.records)
        for (Index t = 0; t < r.horizon(); ++t) {
            out << csv_field(r.id) << ',' << t + 1;
            for (Index j = 0; j < r.covariates_dynamic.cols(); ++j) {
                const double c = r.covariates_dynamic(t, j);
                out << ',' << (is_missing(c) ? "NA" : (c > 0 ? "1" : "0"));
            }
            out << '\n';
        }
}

void write_outcomes(const CohortData& data, const fs::path& path) {
    auto out = open_out(path);
    out << "# outcomes: ";
    for (std::size_t k = 0; k < data.outcome_names.size(); ++k)
        out << (k ? "," : "") << csv_field(data.outcome_names[k]);
    out << "\npatient_id,day,outcome,value\n";
    for (const auto& r : data.records)
        for (const auto& o : r.observations)
            out << csv_field(r.id) << ',' << o.day << ',' << csv_field(data.outcome_names.at(o.outcome)) << ','
                << format_double(o.value) << '\n';
}

void write_baseline(const CohortData& data, const fs::path& path) {
    auto out = open_out(path);
    out << "patient_id";
    for (const auto& n : data.covariate_names) out << ',' << csv_field(n);
    out << '\n';
    for (const auto& r : data.records) {
        out << csv_field(r.id);
        for (Index j = 1; j < r.covariates_baseline.size(); ++j) out << ',' << format_double(r.covariates_baseline(j));
        out << '\n';
    }
}

void emit(const CohortData& data, const fs::path& dir) {
    write_adherence(data, dir / "adherence.csv");
    write_outcomes(data, dir / "outcomes.csv");
    write_baseline(data, dir / "baseline.csv");
}

void write_imputed(const std::vector<CohortData>& datasets, const fs::path& path) {
    auto out = open_out(path);
    out << "imputation,patient_id,day";
    if (!datasets.empty())
        for (const auto& n : datasets.front().adherence_names) out << ',' << csv_field(n);
    out << '\n';
    for (std::size_t m = 0; m < datasets.size(); ++m)
        for (const auto& r : datasets[m].records)
            for (Index t = 0; t < r.horizon(); ++t) {
                out << m + 1 << ',' << csv_field(r.id) << ',' << t + 1;
                for (Index j = 0; j < r.covariates_dynamic.cols(); ++j) {
                    const double c = r.covariates_dynamic(t, j);
                    out << ',' << (is_missing(c) ? "NA" : (c > 0 ? "1" : "0"));
                }
                out << '\n';
            }
}

void write_draws(const ChainSet& chains, const fs::path& path) {
    auto out = open_out(path);
    out << "chain,iteration,parameter,value\n";
    std::vector<std::string> names;
    for (const auto& n : chains.names) names.push_back(csv_field(n));
    for (Index c = 0; c < chains.n_chains(); ++c) {
        const auto& d = chains.draws[c];
        for (Index i = 0; i < d.rows(); ++i)
            for (Index p = 0; p < d.cols(); ++p)
                out << c + 1 << ',' << i + 1 << ',' << names[p] << ',' << format_double(d(i, p)) << '\n';
    }
}

ChainSet read_draws(const fs::path& path) {
    Reader in(path);
    std::string line;
    if (!in.next(line)) in.fail("empty file");
    if (split_csv_line(line) != std::vector<std::string>{"chain", "iteration", "parameter", "value"})
        in.fail("header must be chain,iteration,parameter,value");
    std::map<std::string, Index> pindex;
    std::vector<std::string> names;
    std::map<int, std::map<int, std::vector<std::pair<Index, double>>>> rows;
    while (in.next(line)) {
        auto f = in.row(line, 4);
        const int chain = in.integer(f[0], "chain"), iter = in.integer(f[1], "iteration");
        if (chain < 1 || iter < 1) in.fail("chain and iteration are 1-based");
        auto [it, fresh] = pindex.emplace(f[2], static_cast<Index>(names.size()));
        if (fresh) names.push_back(f[2]);
        rows[chain][iter].push_back({it->second, in.number(f[3], "value")});
    }
    ChainSet cs;
    cs.names = names;
    cs.fixed.assign(names.size(), false);
    std::size_t n_iter = 0;
    for (const auto& [chain, iters] : rows) {
        if (n_iter == 0) n_iter = iters.size();
        if (iters.size() != n_iter || static_cast<std::size_t>(iters.rbegin()->first) != n_iter)
            throw IoError(path.string() + ": chain " + std::to_string(chain) + " has missing iterations");
        Eigen::MatrixXd d = Eigen::MatrixXd::Constant(static_cast<Index>(n_iter), static_cast<Index>(names.size()),
                                                      std::numeric_limits<double>::quiet_NaN());
        for (const auto& [iter, vals] : iters)
            for (const auto& [p, v] : vals) d(iter - 1, p) = v;
        if (d.array().isNaN().any())
            throw IoError(path.string() + ": chain " + std::to_string(chain) + " has missing parameters");
        cs.draws.push_back(std::move(d));
        cs.imputation.push_back(0);
    }
    for (Index p = 0; p < cs.n_params(); ++p) {
        bool constant = cs.n_draws() > 0;
        for (const auto& d : cs.draws) constant = constant && (d.col(p).array() == d(0, p)).all();
        cs.fixed[p] = constant && cs.n_draws() > 1;
    }
    cs.compute_rhat();
    return cs;
}

void write_summary(const ChainSet& chains, const fs::path& path, double level) {
    auto out = open_out(path);
    out << "parameter,mean,q05,q95,rhat,flag\n";
    for (const auto& s : summarize(chains, level)) {
        std::string flag;
        if (s.excludes_zero) flag += '*';
        if (!s.converged) flag += '!';
        out << csv_field(s.name) << ',' << format_double(s.mean) << ',' << format_double(s.lower) << ','
            << format_double(s.upper) << ',' << (s.fixed ? "NA" : format_double(s.rhat)) << ',' << flag << '\n';
    }
}

void write_comparison(const ComparisonReport& report, const fs::path& path) {
    auto out = open_out(path);
    out << "parameter";
    for (const auto& m : report.models) out << ',' << csv_field(m + "_mean") << ',' << csv_field(m + "_q05") << ','
                                            << csv_field(m + "_q95");
    out << ",flags\n";
    for (const auto& row : report.rows) {
        out << csv_field(row.label);
        for (const auto& c : row.cells) {
            if (c.present)
                out << ',' << format_double(c.mean) << ',' << format_double(c.lower) << ',' << format_double(c.upper);
            else
                out << ",,,";
        }
        out << ',' << row.flags << '\n';
    }
}

}  // namespace mdlm::io
