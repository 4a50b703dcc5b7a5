#include <grpdesc/sim.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace grpdesc::sim {

const char* to_string(ScenarioKind k)
{
    switch (k) {
    case ScenarioKind::Basic: return "basic";
    case ScenarioKind::Semiparametric: return "semiparametric";
    case ScenarioKind::SNP: return "snp";
    }
    return "?";
}

ScenarioKind parse_kind(const std::string& s)
{
    if (s == "basic") return ScenarioKind::Basic;
    if (s == "semiparametric" || s == "semi") return ScenarioKind::Semiparametric;
    if (s == "snp") return ScenarioKind::SNP;
    throw ConfigError("kind: unknown scenario '" + s + "'");
}

Scenario Scenario::defaults(ScenarioKind kind)
{
    Scenario s;
    s.kind = kind;
    switch (kind) {
    case ScenarioKind::Basic: s.n = 100; s.J = 100; s.K = 4; break;
    case ScenarioKind::Semiparametric: s.n = 200; s.J = 100; s.K = 6; break;
    case ScenarioKind::SNP: s.n = 250; s.J = 500; s.K = 2; break;
    }
    return s;
}

void Scenario::validate() const
{
    if (n < 2) throw ConfigError("n: must be at least 2");
    if (J < 1) throw ConfigError("J: must be at least 1");
    switch (kind) {
    case ScenarioKind::Basic:
        if (K < 1) throw ConfigError("K: must be at least 1");
        if (signal_groups < 0 || signal_groups > J) throw ConfigError("signal_groups: must lie in [0, J]");
        if (!std::isfinite(effect)) throw ConfigError("beta: must be finite");
        break;
    case ScenarioKind::Semiparametric:
        if (K != 6) throw ConfigError("K: semiparametric scenario uses a 6-term spline basis");
        if (J < 6) throw ConfigError("J: semiparametric scenario needs at least 6 variables");
        if (n < 8) throw ConfigError("n: semiparametric scenario needs at least 8 observations");
        break;
    case ScenarioKind::SNP:
        if (K != 2) throw ConfigError("K: SNP scenario uses 2 indicators per SNP");
        if (!(maf > 0 && maf < 1)) throw ConfigError("maf: must lie in (0, 1)");
        if (!(snp_effect_variance >= 0)) throw ConfigError("snp_effect_variance: must be non-negative");
        if (causal_snps.size() != causal_effects.size())
            throw ConfigError("causal_snps: need one effect type per causal SNP");
        for (int c : causal_snps)
            if (c < 0 || c >= J) throw ConfigError("causal_snps: index out of range");
        break;
    }
}

double semiparametric_effect(int k, double x)
{
    const double e10 = std::exp(-10.0);
    switch (k) {
    case 1: return 2.0 * (std::exp(-10.0 * x) - e10) / (1.0 - e10) - 1.0;
    case 2: return -2.0 * (std::exp(-10.0 * x) - e10) / (1.0 - e10) + 1.0;
    case 3: return 2.0 * x - 1.0;
    case 4: return -2.0 * x + 1.0;
    case 5: return 8.0 * (x - 0.5) * (x - 0.5) - 1.0;
    case 6: return -8.0 * (x - 0.5) * (x - 0.5) + 1.0;
    default: throw ConfigError("semiparametric_effect: k must lie in 1..6");
    }
}

namespace {

// Linear-interpolation sample quantile (type 7).
double quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Cox-de Boor recursion for all order-4 basis functions at x.
std::vector<double> bspline_row(double x, const std::vector<double>& knots, int degree)
{
    const std::size_t m = knots.size();
    const std::size_t nb = m - static_cast<std::size_t>(degree) - 1;
    std::vector<double> b(m - 1, 0.0);
    // Degree 0: half-open spans, except the last non-empty span is closed.
    const double right = knots[m - 1 - static_cast<std::size_t>(degree)];
    for (std::size_t i = 0; i + 1 < m; ++i) {
        if (knots[i] < knots[i + 1]) {
            if ((x >= knots[i] && x < knots[i + 1]) || (x == right && knots[i + 1] == right)) b[i] = 1.0;
        }
    }
    for (int d = 1; d <= degree; ++d) {
        for (std::size_t i = 0; i + static_cast<std::size_t>(d) + 1 < m; ++i) {
            double val = 0.0;
            const double l = knots[i + static_cast<std::size_t>(d)] - knots[i];
            if (l > 0) val += (x - knots[i]) / l * b[i];
            const double r = knots[i + static_cast<std::size_t>(d) + 1] - knots[i + 1];
            if (r > 0) val += (knots[i + static_cast<std::size_t>(d) + 1] - x) / r * b[i + 1];
            b[i] = val;
        }
    }
    b.resize(nb);
    return b;
}

std::uint64_t replicate_seed(std::uint64_t seed, int replicate)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), 0x9e3779b9u};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

} // namespace

Matrix<double> bspline_basis(const Vector<double>& x)
{
    constexpr int degree = 3;
    std::vector<double> v(x.data(), x.data() + x.size());
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    std::vector<double> knots(degree + 1, lo);
    for (double q : {0.25, 0.5, 0.75}) knots.push_back(quantile(v, q));
    knots.insert(knots.end(), degree + 1, hi);

    Matrix<double> basis(x.size(), 6);
    for (Index i = 0; i < x.size(); ++i) {
        const auto row = bspline_row(x(i), knots, degree);   // 7 functions
        for (Index c = 0; c < 6; ++c) basis(i, c) = row[static_cast<std::size_t>(c) + 1];
    }
    return basis;
}

double snp_mean_shift(SnpEffect effect, int genotype, double size)
{
    switch (effect) {
    case SnpEffect::Dominant: return genotype >= 1 ? size : 0.0;
    case SnpEffect::Recessive: return genotype == 2 ? size : 0.0;
    case SnpEffect::Additive: return size * genotype;
    }
    return 0.0;
}

namespace {

// Effect size giving the requested variance of the mean shift under
// Hardy-Weinberg genotype frequencies.
double snp_effect_size(SnpEffect effect, double maf, double variance)
{
    const double q = maf;
    const double p0 = (1 - q) * (1 - q), p1 = 2 * q * (1 - q), p2 = q * q;
    double unit_var = 0;
    switch (effect) {
    case SnpEffect::Dominant: unit_var = (p1 + p2) * p0; break;
    case SnpEffect::Recessive: unit_var = p2 * (1 - p2); break;
    case SnpEffect::Additive: {
        const double mean = p1 + 2 * p2;
        unit_var = p1 + 4 * p2 - mean * mean;
        break;
    }
    }
    return std::sqrt(variance / unit_var);
}

} // namespace

SimData generate(const Scenario& sc)
{
    sc.validate();
    std::mt19937_64 rng(sc.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SimData out;
    auto& d = out.design;
    const Index n = sc.n;

    switch (sc.kind) {
    case ScenarioKind::Basic: {
        const Index p = static_cast<Index>(sc.J) * sc.K;
        d.X.resize(n, p);
        for (Index j = 0; j < p; ++j)
            for (Index i = 0; i < n; ++i) d.X(i, j) = gauss(rng);
        Vector<double> beta = Vector<double>::Zero(p);
        for (int g = 0; g < sc.signal_groups; ++g)
            for (int k = 0; k < sc.K; ++k) beta(g * sc.K + k) = (k % 2 == 0 ? 1.0 : -1.0) * sc.effect;
        out.true_mean = d.X * beta;
        out.true_coefficients = beta;
        for (int g = 0; g < sc.J; ++g) {
            d.group_labels.push_back("G" + std::to_string(g + 1));
            for (int k = 0; k < sc.K; ++k) {
                d.group_of.push_back(g);
                d.column_names.push_back("G" + std::to_string(g + 1) + "_" + std::to_string(k + 1));
            }
            out.causal_group.push_back(g < sc.signal_groups && sc.effect != 0.0);
        }
        break;
    }
    case ScenarioKind::Semiparametric: {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Matrix<double> raw(n, sc.J);
        for (Index j = 0; j < sc.J; ++j)
            for (Index i = 0; i < n; ++i) raw(i, j) = unif(rng);
        out.true_mean = Vector<double>::Zero(n);
        for (int k = 1; k <= 6; ++k)
            for (Index i = 0; i < n; ++i) out.true_mean(i) += semiparametric_effect(k, raw(i, k - 1));
        d.X.resize(n, static_cast<Index>(sc.J) * 6);
        for (int j = 0; j < sc.J; ++j) {
            d.X.middleCols(j * 6, 6) = bspline_basis(raw.col(j));
            d.group_labels.push_back("V" + std::to_string(j + 1));
            for (int k = 0; k < 6; ++k) {
                d.group_of.push_back(j);
                d.column_names.push_back("V" + std::to_string(j + 1) + "_bs" + std::to_string(k + 1));
            }
            out.causal_group.push_back(j < 6);
        }
        break;
    }
    case ScenarioKind::SNP: {
        std::binomial_distribution<int> allele(2, sc.maf);
        std::vector<int> geno(static_cast<std::size_t>(n) * static_cast<std::size_t>(sc.J));
        for (int j = 0; j < sc.J; ++j)
            for (Index i = 0; i < n; ++i) geno[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = allele(rng);
        d.X = Matrix<double>::Zero(n, static_cast<Index>(sc.J) * 2);
        out.true_mean = Vector<double>::Zero(n);
        out.causal_group.assign(static_cast<std::size_t>(sc.J), false);
        for (std::size_t c = 0; c < sc.causal_snps.size(); ++c) {
            const int j = sc.causal_snps[c];
            out.causal_group[static_cast<std::size_t>(j)] = sc.snp_effect_variance > 0;
            const double size = snp_effect_size(sc.causal_effects[c], sc.maf, sc.snp_effect_variance);
            for (Index i = 0; i < n; ++i)
                out.true_mean(i) += snp_mean_shift(sc.causal_effects[c], geno[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)], size);
        }
        for (int j = 0; j < sc.J; ++j) {
            for (Index i = 0; i < n; ++i) {
                const int g = geno[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
                d.X(i, 2 * j) = g == 1 ? 1.0 : 0.0;
                d.X(i, 2 * j + 1) = g == 2 ? 1.0 : 0.0;
            }
            d.group_labels.push_back("SNP" + std::to_string(j + 1));
            d.group_of.push_back(j);
            d.group_of.push_back(j);
            d.column_names.push_back("SNP" + std::to_string(j + 1) + "_het");
            d.column_names.push_back("SNP" + std::to_string(j + 1) + "_hom");
        }
        break;
    }
    }

    d.y.resize(n);
    for (Index i = 0; i < n; ++i) d.y(i) = out.true_mean(i) + gauss(rng);
    return out;
}

Score score(const SimData& data, double intercept, const Vector<double>& coefficients)
{
    const auto& d = data.design;
    if (coefficients.size() != d.p()) throw ConfigError("score: coefficient dimension mismatch");
    Score s;
    if (data.true_coefficients) {
        s.rmse = std::sqrt((*data.true_coefficients - coefficients).squaredNorm() / static_cast<double>(d.p()));
    } else {
        s.rmse = std::numeric_limits<double>::quiet_NaN();
    }
    const Vector<double> fitted = (d.X * coefficients).array() + intercept;
    s.rme = std::sqrt((data.true_mean - fitted).squaredNorm() / static_cast<double>(d.n()));

    std::vector<bool> selected(static_cast<std::size_t>(d.J()), false);
    for (std::size_t k = 0; k < d.group_of.size(); ++k)
        if (coefficients(static_cast<Index>(k)) != 0.0) selected[static_cast<std::size_t>(d.group_of[k])] = true;
    for (std::size_t j = 0; j < selected.size(); ++j) {
        if (!selected[j]) continue;
        ++s.model_size_groups;
        if (data.causal_group[j]) ++s.true_discoveries;
        else ++s.false_discoveries;
    }
    return s;
}

double oracle_rmse(const Scenario& sc)
{
    if (sc.kind != ScenarioKind::Basic) return std::numeric_limits<double>::quiet_NaN();
    const double s = static_cast<double>(sc.signal_groups) / static_cast<double>(sc.J);
    return std::sqrt(s / static_cast<double>(sc.n));
}

namespace {

struct Accumulator {
    double sum = 0, sumsq = 0;
    int count = 0;
    void add(double x)
    {
        sum += x;
        sumsq += x * x;
        ++count;
    }
    double mean() const { return count ? sum / count : std::numeric_limits<double>::quiet_NaN(); }
    double se() const
    {
        if (count < 2) return std::numeric_limits<double>::quiet_NaN();
        const double m = mean();
        const double var = std::max(0.0, (sumsq - count * m * m) / (count - 1));
        return std::sqrt(var / count);
    }
};

} // namespace

SimulationResult run_simulation(const Scenario& scenario, const SimControl& control)
{
    scenario.validate();
    if (control.replicates < 1) throw ConfigError("replicates: must be at least 1");
    if (control.families.empty()) throw ConfigError("families: need at least one penalty");

    SimulationResult result;
    result.scenario = scenario;
    const int R = control.replicates;
    const auto M = control.families.size();
    result.records.resize(static_cast<std::size_t>(R) * M);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(R));

    grpdesc::detail::parallel_for(R, control.threads, [&](int r) {
        try {
            Scenario sc = scenario;
            sc.seed = replicate_seed(scenario.seed, r);
            const SimData data = generate(sc);
            for (std::size_t m = 0; m < M; ++m) {
                PenaltySpec<double> spec;
                spec.family = control.families[m];
                spec.gamma = control.gamma.value_or(PenaltySpec<double>::default_gamma(spec.family));
                spec.loss = LossKind::Linear;
                CVControl cvc;
                cvc.folds = control.folds;
                cvc.seed = sc.seed ^ 0x5bd1e995ULL;
                cvc.path = control.path;
                const auto cv = cross_validate(data.design, spec, cvc);
                const Index k = cv.lambda_min_index;
                auto& rec = result.records[static_cast<std::size_t>(r) * M + m];
                rec.replicate = r;
                rec.family = spec.family;
                rec.lambda = cv.lambda_min();
                rec.score = score(data, cv.fit.intercepts[static_cast<std::size_t>(k)], cv.fit.coefficients.col(k));
            }
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (std::size_t m = 0; m < M; ++m) {
        Accumulator rmse, rme, groups, td, fd, lam;
        for (int r = 0; r < R; ++r) {
            const auto& rec = result.records[static_cast<std::size_t>(r) * M + m];
            rmse.add(rec.score.rmse);
            rme.add(rec.score.rme);
            groups.add(static_cast<double>(rec.score.model_size_groups));
            td.add(static_cast<double>(rec.score.true_discoveries));
            fd.add(static_cast<double>(rec.score.false_discoveries));
            lam.add(rec.lambda);
        }
        MethodSummary s;
        s.family = control.families[m];
        s.replicates = R;
        s.rmse_mean = rmse.mean();
        s.rmse_se = rmse.se();
        s.rme_mean = rme.mean();
        s.rme_se = rme.se();
        s.groups_mean = groups.mean();
        s.groups_se = groups.se();
        s.true_disc_mean = td.mean();
        s.false_disc_mean = fd.mean();
        s.lambda_mean = lam.mean();
        result.methods.push_back(s);
    }
    return result;
}

} // namespace grpdesc::sim
