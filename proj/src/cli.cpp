#include <grpdesc/cli.hpp>

#include <grpdesc/cv.hpp>
#include <grpdesc/io.hpp>
#include <grpdesc/path.hpp>
#include <grpdesc/selfcheck.hpp>
#include <grpdesc/sim.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <thread>

#ifndef GRPDESC_VERSION
#define GRPDESC_VERSION "0.0.0"
#endif

namespace grpdesc::cli {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger()
{
    if (auto existing = spdlog::get("grpdesc")) return existing;
    auto lg = spdlog::stderr_logger_mt("grpdesc");
    lg->set_pattern("grpdesc %l: %v");
    lg->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("GRPDESC_LOG")) lg->set_level(spdlog::level::from_str(env));
    return lg;
}

bool needs_dataset(Command c) { return c == Command::Fit || c == Command::CV; }

PenaltySpec<double> penalty_from(const RunConfig& c)
{
    PenaltySpec<double> spec;
    spec.family = parse_family(c.family);
    spec.loss = parse_loss(c.loss);
    spec.gamma = c.gamma.value_or(PenaltySpec<double>::default_gamma(spec.family));
    return spec;
}

PathControl path_control_from(const RunConfig& c)
{
    PathControl pc;
    pc.n_lambda = c.n_lambda;
    pc.min_ratio = c.min_ratio;
    pc.solver.tol = c.tol;
    pc.solver.max_iter = c.max_iter;
    return pc;
}

void log_warnings(const FitPath<double>& path)
{
    for (const auto& w : path.warnings) logger()->warn("{}", w);
}

std::string input_digest(const RunConfig& c)
{
    return io::sha256_hex(io::read_file(c.data) + '\0' + io::read_file(c.groups) + '\0' + c.response);
}

void write_path_outputs(const RunConfig& c, const FitPath<double>& path, const fs::path& out)
{
    io::PathArtifact artifact{path, GRPDESC_VERSION, input_digest(c)};
    io::write_file(out / "path.json", io::serialize(artifact));
    io::write_file(out / "coefficients.csv", io::coefficient_table(path));
    io::write_file(out / "path_summary.csv", io::path_summary_table(path));
    if (c.plots) io::write_file(out / "coefficient_path.svg", io::coefficient_path_svg(path));
}

void run_fit(const RunConfig& c, std::ostream& report)
{
    const auto data = io::load_dataset(c.data, c.groups, c.response);
    logger()->info("loaded n={} p={} J={}", data.n(), data.p(), data.J());
    const auto path = fit_path(data, penalty_from(c), path_control_from(c));
    log_warnings(path);
    write_path_outputs(c, path, c.out);
    report << fmt::format("fit: {} lambda values, lambda_max={}, lambda_min={}", path.size(), path.lambdas.front(),
                          path.lambdas.back());
    if (path.saturated_at) report << fmt::format(", saturated at index {}", *path.saturated_at);
    report << "\n";
}

void run_cv(const RunConfig& c, std::ostream& report)
{
    const auto data = io::load_dataset(c.data, c.groups, c.response);
    logger()->info("loaded n={} p={} J={}", data.n(), data.p(), data.J());
    CVControl control;
    control.folds = c.folds;
    control.seed = c.seed;
    if (c.metric) control.metric = parse_metric(*c.metric);
    control.path = path_control_from(c);
    control.threads = c.resolved_threads();
    const auto cv = cross_validate(data, penalty_from(c), control);
    log_warnings(cv.fit);
    const fs::path out = c.out;
    write_path_outputs(c, cv.fit, out);
    io::write_file(out / "cv.csv", io::cv_table(cv));
    io::write_file(out / "folds.csv", io::fold_table(cv));
    if (c.plots) io::write_file(out / "cv_curve.svg", io::cv_curve_svg(cv));
    const auto k = static_cast<std::size_t>(cv.lambda_min_index);
    report << fmt::format("cv: lambda_min={} index={} {}={} se={} groups={}\n", cv.lambda_min(), cv.lambda_min_index,
                          to_string(cv.metric), cv.cve[k], cv.cvse[k], cv.fit.df_groups[k]);
}

Index choose_index(const FitPath<double>& path, const RunConfig& c)
{
    if (c.index) {
        if (*c.index < 0 || *c.index >= path.size())
            throw ConfigError(fmt::format("index: must lie in [0, {}]", path.size() - 1));
        return static_cast<Index>(*c.index);
    }
    // nearest grid point on the log scale
    const double target = std::log(*c.lambda);
    Index best = 0;
    for (Index k = 1; k < path.size(); ++k)
        if (std::abs(std::log(path.lambdas[static_cast<std::size_t>(k)]) - target)
            < std::abs(std::log(path.lambdas[static_cast<std::size_t>(best)]) - target))
            best = k;
    return best;
}

void run_predict(const RunConfig& c, std::ostream& report)
{
    const auto artifact = io::parse_artifact(io::read_file(c.model));
    const auto& path = artifact.path;
    if (path.size() == 0) throw DataError("model file: empty path");
    const Index k = choose_index(path, c);
    const auto table = io::read_table(c.data);
    const Matrix<double> X = io::select_columns(table, path.column_names, c.data);
    const Vector<double> link = path.predict_link(X, k);
    const Vector<double> resp = path.predict_response(X, k);
    std::string csv = "row,link,response\n";
    for (Index i = 0; i < X.rows(); ++i) csv += fmt::format("{},{},{}\n", i + 1, link(i), resp(i));
    io::write_file(fs::path(c.out) / "predictions.csv", csv);
    report << fmt::format("predict: {} rows at lambda={} (index {})\n", X.rows(), path.lambdas[static_cast<std::size_t>(k)],
                          k);
}

void run_simulate(const RunConfig& c, std::ostream& report)
{
    auto scenario = sim::Scenario::defaults(sim::parse_kind(c.kind));
    if (c.n) scenario.n = *c.n;
    if (c.J) scenario.J = *c.J;
    if (c.beta) scenario.effect = *c.beta;
    scenario.seed = c.seed;
    scenario.validate();
    sim::SimControl control;
    control.replicates = c.replicates;
    control.folds = c.folds;
    control.threads = c.resolved_threads();
    control.path = path_control_from(c);
    if (c.gamma) control.gamma = c.gamma;
    if (c.family != "all") control.families = {parse_family(c.family)};
    const auto result = sim::run_simulation(scenario, control);
    const fs::path out = c.out;
    io::write_file(out / "simulation_summary.csv", io::simulation_summary_table(result));
    io::write_file(out / "simulation_replicates.csv", io::simulation_replicate_table(result));
    report << fmt::format("simulate: {} scenario, n={} J={}, {} replicates\n", sim::to_string(scenario.kind), scenario.n,
                          scenario.J, control.replicates);
    report << fmt::format("{:<8} {:>10} {:>10} {:>10} {:>10}\n", "method", "rmse", "rme", "groups", "false");
    for (const auto& m : result.methods)
        report << fmt::format("{:<8} {:>10.4f} {:>10.4f} {:>10.2f} {:>10.2f}\n", to_string(m.family), m.rmse_mean,
                              m.rme_mean, m.groups_mean, m.false_disc_mean);
    if (scenario.kind == sim::ScenarioKind::Basic)
        report << fmt::format("oracle rmse {:.4f}\n", sim::oracle_rmse(scenario));
}

void run_selfcheck(const RunConfig& c, std::ostream& report)
{
    const auto cases = selfcheck::run(c.instances, c.seed);
    int failed = 0;
    for (const auto& r : cases) {
        report << fmt::format("{} {} solver={:.12g} reference={:.12g} gap={:.3g} tol={:.1g}\n",
                              r.passed ? "PASS" : "FAIL", r.name, r.solver_value, r.reference_value, r.discrepancy,
                              r.tolerance);
        if (!r.passed) ++failed;
    }
    report << fmt::format("selfcheck: {} of {} cases passed\n", cases.size() - static_cast<std::size_t>(failed),
                          cases.size());
    if (failed > 0) throw NumericalError(fmt::format("selfcheck: {} cases failed", failed));
}

std::string one_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

} // namespace

int RunConfig::resolved_threads() const
{
    if (threads > 0) return threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void RunConfig::validate() const
{
    try {
        if (needs_dataset(command)) {
            if (data.empty()) throw ConfigError("--data: required");
            if (groups.empty()) throw ConfigError("--groups: required");
            if (response.empty()) throw ConfigError("--response: must not be empty");
        }
        if (command == Command::Predict) {
            if (model.empty()) throw ConfigError("--model: required");
            if (data.empty()) throw ConfigError("--data: required");
            if (lambda && index) throw ConfigError("--lambda: give either --lambda or --index, not both");
            if (!lambda && !index) throw ConfigError("--lambda: one of --lambda or --index is required");
            if (lambda && !(*lambda > 0)) throw ConfigError("--lambda: must be positive");
        }
        if (command != Command::Simulate || family != "all") {
            const auto f = parse_family(family);
            PenaltySpec<double> spec;
            spec.family = f;
            spec.loss = parse_loss(loss);
            spec.gamma = gamma.value_or(PenaltySpec<double>::default_gamma(f));
            (void)grpdesc::validate(spec);
        }
        (void)parse_loss(loss);
        if (n_lambda < 2) throw ConfigError("--nlambda: must be at least 2");
        if (min_ratio && !(*min_ratio > 0 && *min_ratio < 1)) throw ConfigError("--min-ratio: must lie in (0, 1)");
        if (!(tol > 0)) throw ConfigError("--tol: must be positive");
        if (max_iter < 1) throw ConfigError("--max-iter: must be positive");
        if (folds < 2) throw ConfigError("--folds: need at least 2");
        if (metric) {
            const auto m = parse_metric(*metric);
            const auto l = parse_loss(loss);
            if (l == LossKind::Linear && m == CVMetric::Misclassification)
                throw ConfigError("--metric: misclass requires --loss logistic");
            if (l == LossKind::Logistic && m == CVMetric::RootPredictionError)
                throw ConfigError("--metric: rmspe requires --loss linear");
        }
        if (threads < 0) throw ConfigError("--threads: must be non-negative");
        if (out.empty()) throw ConfigError("--out: must not be empty");
        if (command == Command::Simulate) {
            const auto k = sim::parse_kind(kind);
            if (beta && k != sim::ScenarioKind::Basic) throw ConfigError("--beta: only applies to --kind basic");
            if (replicates < 1) throw ConfigError("--replicates: must be positive");
            if (n && *n < folds) throw ConfigError("--n: must be at least the number of folds");
            if (J && *J < 1) throw ConfigError("--J: must be positive");
            if (parse_loss(loss) != LossKind::Linear) throw ConfigError("--loss: simulations use linear loss");
        }
        if (command == Command::Selfcheck && instances < 1) throw ConfigError("--instances: must be positive");
    } catch (const ConfigError& e) {
        // parser messages name the option without its dashes
        const std::string msg = e.what();
        if (msg.rfind("--", 0) == 0) throw;
        throw ConfigError("--" + msg);
    }
}

void run(const RunConfig& config, std::ostream& report)
{
    config.validate();
    switch (config.command) {
    case Command::Fit: run_fit(config, report); break;
    case Command::CV: run_cv(config, report); break;
    case Command::Predict: run_predict(config, report); break;
    case Command::Simulate: run_simulate(config, report); break;
    case Command::Selfcheck: run_selfcheck(config, report); break;
    }
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    if (dynamic_cast<const DataError*>(&e)) return 2;
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
    return 3;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig config;
    CLI::App app{"Group descent for group lasso, group MCP and group SCAD", "grpdesc"};
    app.set_version_flag("--version", GRPDESC_VERSION);
    app.require_subcommand(1);

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", config.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", config.seed, "Random seed")->capture_default_str();
        sub->add_option("--threads", config.threads, "Worker threads (0: all processors)")->capture_default_str();
    };
    auto model_opts = [&](CLI::App* sub) {
        sub->add_option("--data", config.data, "Delimited data file with header");
        sub->add_option("--groups", config.groups, "Column to group map");
        sub->add_option("--response", config.response, "Response column")->capture_default_str();
        sub->add_option("--loss", config.loss, "linear or logistic")->capture_default_str();
        sub->add_option("--family", config.family, "grlasso, grmcp or grscad")->capture_default_str();
        sub->add_option("--gamma", config.gamma, "Concavity (default 3 for grmcp, 4 for grscad)");
        sub->add_option("--nlambda", config.n_lambda, "Grid length")->capture_default_str();
        sub->add_option("--min-ratio", config.min_ratio, "Smallest lambda as a fraction of lambda_max");
        sub->add_option("--tol", config.tol, "Convergence tolerance")->capture_default_str();
        sub->add_option("--max-iter", config.max_iter, "Cycle limit per lambda")->capture_default_str();
        sub->add_flag("--plots", config.plots, "Write SVG figures");
        common(sub);
    };

    auto* fit = app.add_subcommand("fit", "Fit a regularization path");
    model_opts(fit);
    auto* cv = app.add_subcommand("cv", "Cross-validate a regularization path");
    model_opts(cv);
    cv->add_option("--folds", config.folds, "Number of folds")->capture_default_str();
    cv->add_option("--metric", config.metric, "rmspe, misclass or deviance");

    auto* predict = app.add_subcommand("predict", "Apply a stored path to new data");
    predict->add_option("--model", config.model, "path.json written by fit or cv");
    predict->add_option("--data", config.data, "Delimited data file with header");
    predict->add_option("--lambda", config.lambda, "Use the grid point nearest this lambda");
    predict->add_option("--index", config.index, "Use this grid index");
    predict->add_option("--out", config.out, "Output directory")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
    simulate->add_option("--kind", config.kind, "basic, semiparametric or snp")->capture_default_str();
    simulate->add_option("--beta", config.beta, "Signal magnitude (basic)");
    simulate->add_option("--replicates", config.replicates, "Replicates")->capture_default_str();
    simulate->add_option("--n", config.n, "Observations");
    simulate->add_option("--J", config.J, "Groups, variables or SNPs");
    simulate->add_option("--family", config.family, "grlasso, grmcp, grscad or all");
    simulate->add_option("--gamma", config.gamma, "Concavity for grmcp/grscad");
    simulate->add_option("--folds", config.folds, "Folds for lambda selection")->capture_default_str();
    simulate->add_option("--nlambda", config.n_lambda, "Grid length")->capture_default_str();
    simulate->add_option("--min-ratio", config.min_ratio, "Smallest lambda as a fraction of lambda_max");
    common(simulate);

    auto* check = app.add_subcommand("selfcheck", "Compare solver against brute-force oracle on small problems");
    check->add_option("--instances", config.instances, "Instances per check")->capture_default_str();
    check->add_option("--seed", config.seed, "Random seed")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();   // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << GRPDESC_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "grpdesc: error[usage]: " << one_line(e.what()) << "\n";
        return 1;
    }

    if (fit->parsed()) config.command = Command::Fit;
    else if (cv->parsed()) config.command = Command::CV;
    else if (predict->parsed()) config.command = Command::Predict;
    else if (simulate->parsed()) {
        config.command = Command::Simulate;
        if (simulate->count("--family") == 0) config.family = "all";
    } else config.command = Command::Selfcheck;

    try {
        logger();
        run(config, out);
        return 0;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        const char* kind = code == 1 ? "usage" : code == 2 ? "data" : "numerical";
        err << "grpdesc: error[" << kind << "]: " << one_line(e.what()) << "\n";
        return code;
    }
}

} // namespace grpdesc::cli
