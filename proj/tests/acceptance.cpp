// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <grpdesc/io.hpp>
#include <grpdesc/oracle.hpp>
#include <grpdesc/ortho.hpp>
#include <grpdesc/path.hpp>
#include <grpdesc/selfcheck.hpp>
#include <grpdesc/sim.hpp>
#include <grpdesc/solver_linear.hpp>
#include <grpdesc/solver_logistic.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>

using namespace grpdesc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Settings {
    std::string cli;
    fs::path work;
};

const PenaltyFamily families[] = {PenaltyFamily::GroupLasso, PenaltyFamily::GroupMCP, PenaltyFamily::GroupSCAD};
const LossKind losses[] = {LossKind::Linear, LossKind::Logistic};

PenaltySpec<double> make_spec(PenaltyFamily f, LossKind loss)
{
    PenaltySpec<double> spec;
    spec.family = f;
    spec.loss = loss;
    spec.gamma = PenaltySpec<double>::default_gamma(f);
    return spec;
}

double logit_mean(const Vector<double>& y)
{
    const double m = y.mean();
    return std::log(m / (1 - m));
}

Verdict descent()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0;
    int fits = 0;
    for (LossKind loss : losses)
        for (PenaltyFamily f : families)
            for (int t = 0; t < 200; ++t) {
                const auto d = selfcheck::random_instance(rng, 50, 6, 4, loss);
                const auto o = orthonormalize(d, loss);
                const auto spec = resolve_multipliers(make_spec(f, loss), o.design);
                const double lam = u(rng) * lambda_max(o.design, spec);
                Vector<double> init(o.design.cols());
                for (Index k = 0; k < init.size(); ++k) init(k) = 0.5 * g(rng);
                SolverControl c;
                c.record_objective = true;
                const auto trace = loss == LossKind::Linear
                                       ? fit_linear(o.design, lam, spec, init, c).objective_trace
                                       : fit_logistic(o.design, lam, spec, logit_mean(d.y), init, c).objective_trace;
                for (std::size_t k = 1; k < trace.size(); ++k) worst = std::max(worst, trace[k] - trace[k - 1]);
                ++fits;
            }
    const double secs = seconds_since(t0);
    return {worst <= 1e-10 && secs < 60,
            fmt::format("{} fits, largest per-cycle increase {:.3g} (tol 1e-10), {:.1f} s (limit 60)", fits, worst, secs)};
}

Verdict oracle_equivalence()
{
    std::mt19937_64 rng(1002);
    double worst_linear = 0, worst_logistic = 0;
    for (int t = 0; t < 50; ++t)
        for (LossKind loss : losses) {
            const auto d = selfcheck::random_instance(rng, 20, 2, 3, loss);
            const auto spec = make_spec(PenaltyFamily::GroupLasso, loss);
            PathControl pc;
            pc.n_lambda = 10;
            pc.min_ratio = 0.05;
            const auto path = fit_path(d, spec, pc);
            const Index k = path.size() / 2;
            const double lam = path.lambdas[static_cast<std::size_t>(k)];
            const double solver = oracle::naive_objective(d, path.intercepts[static_cast<std::size_t>(k)],
                                                          Vector<double>(path.coefficients.col(k)), lam, spec);
            const auto ref = oracle::brute_minimize(d, lam, spec, 16, 500 + static_cast<std::uint64_t>(t));
            const double rel = std::abs(solver - ref.objective) / std::abs(ref.objective);
            (loss == LossKind::Linear ? worst_linear : worst_logistic) = std::max(
                loss == LossKind::Linear ? worst_linear : worst_logistic, rel);
        }
    return {worst_linear <= 1e-6 && worst_logistic <= 1e-4,
            fmt::format("50 instances per loss, worst relative gap linear {:.3g} (tol 1e-6), logistic {:.3g} (tol 1e-4)",
                        worst_linear, worst_logistic)};
}

Verdict stationarity()
{
    std::mt19937_64 rng(1003);
    double worst = std::numeric_limits<double>::infinity();
    int checked = 0;
    for (PenaltyFamily f : {PenaltyFamily::GroupMCP, PenaltyFamily::GroupSCAD})
        for (LossKind loss : losses)
            for (int t = 0; t < 50; ++t) {
                const auto d = selfcheck::random_instance(rng, 40, 4, 3, loss);
                const auto spec = make_spec(f, loss);
                PathControl pc;
                pc.n_lambda = 10;
                pc.min_ratio = 0.05;
                const auto path = fit_path(d, spec, pc);
                for (Index k : {Index(1), path.size() / 2, path.size() - 1}) {
                    if (!path.converged[static_cast<std::size_t>(k)]) continue;
                    const double change = oracle::finite_difference_descent(
                        d, path.intercepts[static_cast<std::size_t>(k)], Vector<double>(path.coefficients.col(k)),
                        path.lambdas[static_cast<std::size_t>(k)], spec, 20, 1e-5, 900 + static_cast<std::uint64_t>(t));
                    worst = std::min(worst, change);
                    ++checked;
                }
            }
    return {worst >= -1e-8 && checked >= 300,
            fmt::format("{} converged MCP/SCAD points, most negative directional change {:.3g} (tol -1e-8)", checked,
                        worst)};
}

Verdict limiting_cases()
{
    std::mt19937_64 rng(1004);
    double worst_path = 0;
    for (LossKind loss : losses)
        for (int t = 0; t < 10; ++t) {
            const auto d = selfcheck::random_instance(rng, 100, 8, 3, loss);
            PathControl pc;
            pc.n_lambda = 30;
            pc.solver.tol = 1e-10;
            const auto lasso = fit_path(d, make_spec(PenaltyFamily::GroupLasso, loss), pc);
            auto mspec = make_spec(PenaltyFamily::GroupMCP, loss);
            mspec.gamma = 1e8;
            pc.lambdas = lasso.lambdas;
            const auto mcp = fit_path(d, mspec, pc);
            const Index L = std::min(lasso.size(), mcp.size());
            worst_path = std::max(worst_path, (lasso.coefficients.leftCols(L) - mcp.coefficients.leftCols(L))
                                                  .cwiseAbs()
                                                  .maxCoeff());
            if (lasso.size() != mcp.size()) worst_path = std::numeric_limits<double>::infinity();
        }
    double worst_hard = 0;
    for (double lam : {0.1, 0.5, 1.0, 3.0})
        for (int i = -2000; i <= 2000; ++i) {
            const double z = lam * i / 400.0;
            if (std::abs(z) > 0.99 * lam && std::abs(z) < 1.01 * lam) continue;
            const double hard = std::abs(z) > lam ? z : 0.0;
            worst_hard = std::max(worst_hard, std::abs(firm_mcp(z, lam, 1.0001) - hard));
        }
    return {worst_path <= 1e-5 && worst_hard == 0.0,
            fmt::format("gamma=1e8 vs lasso max coefficient gap {:.3g} (tol 1e-5); gamma=1.0001 vs hard threshold {:.3g}",
                        worst_path, worst_hard)};
}

Verdict orthonormalization()
{
    std::mt19937_64 rng(1005);
    std::uniform_int_distribution<int> width(1, 6);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0;
    int deficient = 0;
    for (int t = 0; t < 100; ++t) {
        const int K = width(rng);
        const Index n = 40;
        GroupedDesign<double> d;
        d.X.resize(n, K);
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < K; ++k) d.X(i, k) = g(rng);
        if (K >= 2 && t % 3 == 0) {
            // last column a combination of the others
            d.X.col(K - 1) = d.X.leftCols(K - 1).rowwise().sum() * 0.5;
            ++deficient;
        }
        d.y = Vector<double>::NullaryExpr(n, [&] { return g(rng); });
        d.group_of.assign(static_cast<std::size_t>(K), 0);
        d.group_labels = {"g"};
        for (int k = 0; k < K; ++k) d.column_names.push_back(fmt::format("x{}", k));
        d.unpenalized = {false};
        const auto o = orthonormalize(d, LossKind::Linear);
        const auto B = o.design.block(0);
        const Matrix<double> gram = (B.transpose() * B) / static_cast<double>(n);
        worst = std::max(worst, (gram - Matrix<double>::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
    }

    double worst_dup = 0;
    for (LossKind loss : losses)
        for (PenaltyFamily f : families) {
            auto d = selfcheck::random_instance(rng, 60, 4, 2, loss);
            // duplicate the first column of the first group inside that group
            Matrix<double> X(d.X.rows(), d.X.cols() + 1);
            X << d.X.col(0), d.X;
            d.X = X;
            d.group_of.insert(d.group_of.begin(), 0);
            d.column_names.insert(d.column_names.begin(), "dup");
            Vector<double> signal = d.X.col(0);
            if (loss == LossKind::Linear) d.y += 2 * signal;
            PathControl pc;
            pc.n_lambda = 25;
            const auto path = fit_path(d, make_spec(f, loss), pc);
            for (Index k = 0; k < path.size(); ++k) {
                const double a = path.coefficients(0, k), b = path.coefficients(1, k);
                worst_dup = std::max(worst_dup, std::abs(a - b) / std::max(1.0, std::abs(a)));
            }
        }
    return {worst <= 1e-10 && worst_dup <= 1e-10,
            fmt::format("100 groups ({} rank-deficient), max |G - I| {:.3g} (tol 1e-10); duplicated columns max gap {:.3g}",
                        deficient, worst, worst_dup)};
}

Verdict reproduction()
{
    const auto t0 = Clock::now();
    auto sc = sim::Scenario::defaults(sim::ScenarioKind::Basic);
    sc.effect = 1.0;
    sim::SimControl control;
    control.replicates = 100;
    control.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto result = sim::run_simulation(sc, control);
    const double secs = seconds_since(t0);
    const auto find = [&](PenaltyFamily f) {
        return *std::find_if(result.methods.begin(), result.methods.end(), [&](const auto& m) { return m.family == f; });
    };
    const auto lasso = find(PenaltyFamily::GroupLasso), mcp = find(PenaltyFamily::GroupMCP),
               scad = find(PenaltyFamily::GroupSCAD);
    const double oracle = sim::oracle_rmse(sc);
    const bool ratio = mcp.rmse_mean <= 0.6 * lasso.rmse_mean && scad.rmse_mean <= 0.6 * lasso.rmse_mean;
    const bool near_oracle = mcp.rmse_mean <= 2 * oracle && scad.rmse_mean <= 2 * oracle;
    const bool order = mcp.groups_mean <= scad.groups_mean && scad.groups_mean <= lasso.groups_mean;
    return {ratio && near_oracle && order && secs < 600,
            fmt::format("RMSE lasso {:.4f} mcp {:.4f} scad {:.4f} (ratios {:.2f}, {:.2f}; limit 0.6), oracle {:.4f} "
                        "(limit {:.4f}); groups mcp {:.2f} scad {:.2f} lasso {:.2f}; {:.0f} s (limit 600)",
                        lasso.rmse_mean, mcp.rmse_mean, scad.rmse_mean, mcp.rmse_mean / lasso.rmse_mean,
                        scad.rmse_mean / lasso.rmse_mean, oracle, 2 * oracle, mcp.groups_mean, scad.groups_mean,
                        lasso.groups_mean, secs)};
}

Verdict lambda_max_exactness()
{
    std::mt19937_64 rng(1007);
    std::uniform_int_distribution<int> ngroups(2, 8);
    int good = 0;
    for (int t = 0; t < 100; ++t) {
        const LossKind loss = losses[t % 2];
        const PenaltyFamily f = families[t % 3];
        const auto d = selfcheck::random_instance(rng, 40, ngroups(rng), 4, loss);
        const auto spec = make_spec(f, loss);
        const auto o = orthonormalize(d, loss);
        const double lmax = lambda_max(o.design, resolve_multipliers(spec, o.design));
        PathControl pc;
        pc.lambdas = {lmax, 0.999 * lmax};
        const auto path = fit_path(d, spec, pc);
        good += path.df_groups[0] == 0 && path.coefficients.col(0).isZero(0) && path.df_groups[1] >= 1;
    }
    return {good == 100, fmt::format("{} of 100 instances null at lambda_max and non-null at 0.999 lambda_max", good)};
}

Verdict saturation()
{
    std::mt19937_64 rng(1008);
    std::normal_distribution<double> g(0.0, 1.0);
    GroupedDesign<double> d;
    const Index n = 30, J = 20;
    d.X.resize(n, 3 * J);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < 3 * J; ++k) d.X(i, k) = g(rng);
    for (Index j = 0; j < J; ++j) {
        d.group_labels.push_back(fmt::format("G{}", j + 1));
        for (int k = 0; k < 3; ++k) {
            d.group_of.push_back(static_cast<int>(j));
            d.column_names.push_back(fmt::format("G{}_{}", j + 1, k + 1));
        }
    }
    d.unpenalized.assign(J, false);
    // labels from a noiseless linear rule in the first two groups
    const Vector<double> eta = d.X.leftCols(6) * Vector<double>::Ones(6);
    d.y = (eta.array() > 0).cast<double>();
    PathControl pc;
    pc.min_ratio = 0.001;
    const auto path = fit_path(d, make_spec(PenaltyFamily::GroupLasso, LossKind::Logistic), pc);
    bool retained_ok = true;
    for (Index k = 0; k < path.size(); ++k) {
        const Vector<double> pi = path.predict_response(d.X, k);
        retained_ok = retained_ok && !check_saturation(binomial_deviance(d.y, pi), path.null_deviance);
    }
    const bool set = path.saturated_at.has_value() && *path.saturated_at == path.size() && path.size() < 100;
    return {set && retained_ok,
            fmt::format("n=30 p=60, min ratio 0.001: saturated_at {}, {} of 100 lambda values kept, retained fits below 99% {}",
                        path.saturated_at ? std::to_string(*path.saturated_at) : "unset", path.size(),
                        retained_ok ? "yes" : "no")};
}

double cycle_seconds(Index n, Index J, std::mt19937_64& rng)
{
    GroupedDesign<double> d;
    std::normal_distribution<double> g(0.0, 1.0);
    d.X.resize(n, 4 * J);
    for (Index k = 0; k < 4 * J; ++k)
        for (Index i = 0; i < n; ++i) d.X(i, k) = g(rng);
    for (Index j = 0; j < J; ++j) {
        d.group_labels.push_back(fmt::format("G{}", j));
        for (int k = 0; k < 4; ++k) {
            d.group_of.push_back(static_cast<int>(j));
            d.column_names.push_back(fmt::format("G{}_{}", j, k));
        }
    }
    d.unpenalized.assign(static_cast<std::size_t>(J), false);
    d.y = d.X.leftCols(8) * Vector<double>::Ones(8) + Vector<double>::NullaryExpr(n, [&] { return g(rng); });
    const auto o = orthonormalize(d, LossKind::Linear);
    const auto spec = resolve_multipliers(make_spec(PenaltyFamily::GroupLasso, LossKind::Linear), o.design);
    const double lam = 0.2 * lambda_max(o.design, spec);
    auto state = initial_linear_state(o.design, Vector<double>::Zero(o.design.cols()).eval());
    // each timed cycle starts from a cold cache, so both sizes stream the design from memory
    std::vector<double> flush(std::size_t(64) << 20, 1.0);
    volatile double sink = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int b = 0; b < 15; ++b) {
        for (double& v : flush) v += 1.0;
        sink = sink + flush[static_cast<std::size_t>(b)];
        const auto t0 = Clock::now();
        for (Index j = 0; j < o.design.J(); ++j) group_update(o.design, state, j, lam, spec);
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

Verdict scaling()
{
    std::mt19937_64 rng(1009);
    const double small = cycle_seconds(1000, 50, rng);
    const double large = cycle_seconds(1000, 500, rng);
    const double ratio = large / small;
    return {ratio >= 5 && ratio <= 15,
            fmt::format("cycle {:.3g} ms at p=200, {:.3g} ms at p=2000, ratio {:.2f} (range [5, 15])",
                        small * 1e3, large * 1e3, ratio)};
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

int run_cli(const Settings& s, const std::string& args)
{
    const std::string cmd = shell_quote(s.cli) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why)
{
    std::set<std::string> names_a, names_b;
    for (const auto& e : fs::directory_iterator(a)) names_a.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename().string());
    if (names_a != names_b || names_a.empty()) {
        why = "file sets differ";
        return false;
    }
    for (const auto& name : names_a)
        if (io::read_file(a / name) != io::read_file(b / name)) {
            why = name + " differs";
            return false;
        }
    return true;
}

Verdict determinism(const Settings& s)
{
    if (s.cli.empty()) return {false, "no --cli binary given"};
    fs::remove_all(s.work);
    fs::create_directories(s.work);

    auto sc = sim::Scenario::defaults(sim::ScenarioKind::Basic);
    sc.n = 120;
    sc.J = 15;
    sc.seed = 42;
    const auto data = sim::generate(sc);
    std::string csv;
    for (const auto& name : data.design.column_names) csv += name + ",";
    csv += "y\n";
    for (Index i = 0; i < data.design.n(); ++i) {
        for (Index k = 0; k < data.design.p(); ++k) csv += fmt::format("{},", data.design.X(i, k));
        csv += fmt::format("{}\n", data.design.y(i));
    }
    std::string groups;
    for (Index k = 0; k < data.design.p(); ++k)
        groups += data.design.column_names[static_cast<std::size_t>(k)] + " "
                + data.design.group_labels[static_cast<std::size_t>(data.design.group_of[static_cast<std::size_t>(k)])]
                + "\n";
    io::write_file(s.work / "data.csv", csv);
    io::write_file(s.work / "groups.txt", groups);

    const std::string in = "--data " + shell_quote((s.work / "data.csv").string()) + " --groups "
                         + shell_quote((s.work / "groups.txt").string());
    std::vector<std::string> problems;
    const auto twice = [&](const std::string& label, const std::string& args) {
        for (const char* run : {"a", "b"}) {
            const auto out = s.work / (label + "_" + run);
            if (run_cli(s, args + " --out " + shell_quote(out.string())) != 0) problems.push_back(label + " run failed");
        }
        std::string why;
        if (!same_tree(s.work / (label + "_a"), s.work / (label + "_b"), why)) problems.push_back(label + ": " + why);
    };
    twice("fit", "fit " + in + " --family grmcp --plots");
    twice("cv", "cv " + in + " --family grscad --folds 5 --seed 7 --plots");

    int round_trips = 0;
    for (const char* dir : {"fit_a", "cv_a"}) {
        const auto text = io::read_file(s.work / dir / "path.json");
        if (io::serialize(io::parse_artifact(text)) == text)
            ++round_trips;
        else
            problems.push_back(std::string(dir) + "/path.json does not round-trip");
    }
    std::string detail = fmt::format("fit and cv outputs byte-identical across runs, {} artifacts round-trip", round_trips);
    if (!problems.empty()) {
        detail = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i) detail += "; " + problems[i];
    }
    return {problems.empty(), detail};
}

} // namespace

int main(int argc, char** argv)
{
    Settings settings;
    std::vector<int> only;
    CLI::App app{"grpdesc acceptance suite"};
    app.add_option("--cli", settings.cli, "grpdesc executable");
    app.add_option("--work", settings.work, "Scratch directory")->default_val(fs::temp_directory_path() / "grpdesc_acceptance");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"descent property", descent},
        {"oracle equivalence", oracle_equivalence},
        {"nonconvex stationarity", stationarity},
        {"limiting cases", limiting_cases},
        {"orthonormalization", orthonormalization},
        {"basic scenario reproduction", reproduction},
        {"lambda_max exactness", lambda_max_exactness},
        {"saturation rule", saturation},
        {"cycle cost scaling", scaling},
        {"determinism and round trip", [&] { return determinism(settings); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << fmt::format("AC{:<2} {} {}: {}", id, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail)
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
