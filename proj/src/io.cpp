#include <grpdesc/io.hpp>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace grpdesc::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& contents)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << contents;
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256 digest failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(b, e - b + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split(const std::string& line, char delim)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

bool is_missing(const std::string& cell)
{
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" || cell == ".";
}

} // namespace

Table read_table(const fs::path& path)
{
    const auto lines = lines_of(read_file(path));
    const std::string where = path.string();
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw DataError(where + ": file is empty");
    const char delim = lines[first].find('\t') != std::string::npos ? '\t' : ',';

    Table t;
    t.header = split(lines[first], delim);
    std::set<std::string> seen;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c].empty()) throw DataError(fmt::format("{}:{}:{}: empty column name", where, first + 1, c + 1));
        if (!seen.insert(t.header[c]).second)
            throw DataError(fmt::format("{}:{}:{}: duplicate column name '{}'", where, first + 1, c + 1, t.header[c]));
    }
    for (std::size_t r = first + 1; r < lines.size(); ++r) {
        if (trim(lines[r]).empty()) continue;
        const auto cells = split(lines[r], delim);
        if (cells.size() != t.header.size())
            throw DataError(fmt::format("{}:{}: expected {} cells, found {}", where, r + 1, t.header.size(), cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            if (is_missing(cell))
                throw DataError(fmt::format("{}:{}:{}: missing value in column '{}'", where, r + 1, c + 1, t.header[c]));
            double value = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value))
                throw DataError(fmt::format("{}:{}:{}: non-numeric cell '{}' in column '{}'", where, r + 1, c + 1, cell,
                                            t.header[c]));
            row[c] = value;
        }
        t.rows.push_back(std::move(row));
    }
    if (t.rows.empty()) throw DataError(where + ": no data rows");
    return t;
}

Matrix<double> select_columns(const Table& table, const std::vector<std::string>& names, const fs::path& origin)
{
    std::map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < table.header.size(); ++c) index[table.header[c]] = c;
    Matrix<double> X(static_cast<Index>(table.rows.size()), static_cast<Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
        const auto it = index.find(names[k]);
        if (it == index.end()) throw DataError(origin.string() + ": missing column '" + names[k] + "'");
        for (std::size_t r = 0; r < table.rows.size(); ++r)
            X(static_cast<Index>(r), static_cast<Index>(k)) = table.rows[r][it->second];
    }
    return X;
}

GroupedDesign<double> load_dataset(const fs::path& data_path, const fs::path& groups_path,
                                   const std::string& response_column)
{
    const Table table = read_table(data_path);

    // column -> group label
    std::map<std::string, std::string> group_for;
    const auto glines = lines_of(read_file(groups_path));
    for (std::size_t r = 0; r < glines.size(); ++r) {
        std::string line = trim(glines[r]);
        if (line.empty() || line.front() == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::replace(line.begin(), line.end(), '\t', ' ');
        std::istringstream in(line);
        std::string col, grp, extra;
        in >> col >> grp;
        if (grp.empty() || (in >> extra))
            throw DataError(fmt::format("{}:{}: expected 'column group'", groups_path.string(), r + 1));
        col = trim(col);
        grp = trim(grp);
        if (!group_for.emplace(col, grp).second)
            throw DataError(fmt::format("{}:{}: column '{}' mapped twice", groups_path.string(), r + 1, col));
    }

    std::map<std::string, std::size_t> col_index;
    for (std::size_t c = 0; c < table.header.size(); ++c) col_index[table.header[c]] = c;
    const auto resp = col_index.find(response_column);
    if (resp == col_index.end())
        throw DataError(data_path.string() + ": response column '" + response_column + "' not found");
    for (const auto& [col, grp] : group_for) {
        if (col == response_column)
            throw DataError(groups_path.string() + ": response column '" + col + "' cannot be grouped");
        if (!col_index.count(col))
            throw DataError(groups_path.string() + ": column '" + col + "' does not exist in " + data_path.string());
    }

    std::vector<std::string> labels;
    std::map<std::string, int> label_id;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const auto& name = table.header[c];
        if (c == resp->second) continue;
        const auto it = group_for.find(name);
        if (it == group_for.end())
            throw DataError(fmt::format("{}:1:{}: column '{}' is not assigned to a group", data_path.string(), c + 1, name));
        auto [pos, inserted] = label_id.emplace(it->second, static_cast<int>(labels.size()));
        if (inserted) {
            labels.push_back(it->second);
            members.emplace_back();
        }
        members[static_cast<std::size_t>(pos->second)].push_back(c);
    }
    if (labels.empty()) throw DataError(data_path.string() + ": no predictor columns");

    const auto n = static_cast<Index>(table.rows.size());
    GroupedDesign<double> d;
    d.y.resize(n);
    for (Index i = 0; i < n; ++i) d.y(i) = table.rows[static_cast<std::size_t>(i)][resp->second];
    std::size_t p = 0;
    for (const auto& m : members) p += m.size();
    d.X.resize(n, static_cast<Index>(p));
    Index k = 0;
    for (std::size_t j = 0; j < members.size(); ++j) {
        for (std::size_t c : members[j]) {
            for (Index i = 0; i < n; ++i) d.X(i, k) = table.rows[static_cast<std::size_t>(i)][c];
            const double first = d.X(0, k);
            if ((d.X.col(k).array() == first).all())
                throw DataError(fmt::format("{}:{}:{}: column '{}' is constant", data_path.string(), 2, c + 1,
                                            table.header[c]));
            d.column_names.push_back(table.header[c]);
            d.group_of.push_back(static_cast<int>(j));
            ++k;
        }
    }
    d.group_labels = labels;
    d.unpenalized.resize(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j) d.unpenalized[j] = labels[j] == "0" || labels[j] == "unpenalized";
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Path artifact

std::string serialize(const PathArtifact& a)
{
    const auto& p = a.path;
    json j;
    j["format_version"] = artifact_format_version;
    j["software"] = "grpdesc";
    j["software_version"] = a.software_version;
    j["input_digest"] = a.input_digest;
    j["loss"] = to_string(p.loss);
    j["family"] = to_string(p.family);
    j["gamma"] = p.gamma;
    j["multipliers"] = p.multipliers;
    j["group_labels"] = p.group_labels;
    j["column_names"] = p.column_names;
    j["group_of"] = p.group_of;
    j["lambdas"] = p.lambdas;
    j["intercepts"] = p.intercepts;
    json coefs = json::array();
    for (Index k = 0; k < p.coefficients.cols(); ++k) {
        std::vector<double> col(p.coefficients.col(k).data(), p.coefficients.col(k).data() + p.coefficients.rows());
        coefs.push_back(col);
    }
    j["coefficients"] = coefs;
    j["loss_values"] = p.loss_values;
    std::vector<long long> df(p.df_groups.begin(), p.df_groups.end());
    j["df_groups"] = df;
    j["iters"] = p.iters;
    std::vector<bool> conv(p.converged.begin(), p.converged.end());
    j["converged"] = conv;
    j["saturated_at"] = p.saturated_at ? json(static_cast<long long>(*p.saturated_at)) : json(nullptr);
    j["null_deviance"] = p.null_deviance;
    j["warnings"] = p.warnings;
    return j.dump(2) + "\n";
}

PathArtifact parse_artifact(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != artifact_format_version)
            throw DataError("unsupported model format_version " + j.at("format_version").dump());
        PathArtifact a;
        a.software_version = j.at("software_version").get<std::string>();
        a.input_digest = j.at("input_digest").get<std::string>();
        auto& p = a.path;
        p.loss = parse_loss(j.at("loss").get<std::string>());
        p.family = parse_family(j.at("family").get<std::string>());
        p.gamma = j.at("gamma").get<double>();
        p.multipliers = j.at("multipliers").get<std::vector<double>>();
        p.group_labels = j.at("group_labels").get<std::vector<std::string>>();
        p.column_names = j.at("column_names").get<std::vector<std::string>>();
        p.group_of = j.at("group_of").get<std::vector<int>>();
        p.lambdas = j.at("lambdas").get<std::vector<double>>();
        p.intercepts = j.at("intercepts").get<std::vector<double>>();
        const auto cols = j.at("coefficients").get<std::vector<std::vector<double>>>();
        const auto L = static_cast<Index>(p.lambdas.size());
        const auto P = static_cast<Index>(p.column_names.size());
        if (static_cast<Index>(cols.size()) != L || static_cast<Index>(p.intercepts.size()) != L)
            throw DataError("model file: path arrays disagree in length");
        p.coefficients.resize(P, L);
        for (Index k = 0; k < L; ++k) {
            if (static_cast<Index>(cols[static_cast<std::size_t>(k)].size()) != P)
                throw DataError("model file: coefficient vector " + std::to_string(k) + " has wrong length");
            for (Index r = 0; r < P; ++r) p.coefficients(r, k) = cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)];
        }
        p.loss_values = j.at("loss_values").get<std::vector<double>>();
        for (long long d : j.at("df_groups").get<std::vector<long long>>()) p.df_groups.push_back(static_cast<Index>(d));
        p.iters = j.at("iters").get<std::vector<int>>();
        p.converged = j.at("converged").get<std::vector<bool>>();
        if (!j.at("saturated_at").is_null()) p.saturated_at = static_cast<Index>(j.at("saturated_at").get<long long>());
        p.null_deviance = j.at("null_deviance").get<double>();
        p.warnings = j.at("warnings").get<std::vector<std::string>>();
        return a;
    } catch (const json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Tables

namespace {

std::string num(double x)
{
    if (std::isnan(x)) return "NA";
    return fmt::format("{}", x);
}

} // namespace

std::string coefficient_table(const FitPath<double>& p)
{
    std::string out = "lambda,(Intercept)";
    for (const auto& c : p.column_names) out += "," + c;
    out += "\n";
    for (Index k = 0; k < p.size(); ++k) {
        out += num(p.lambdas[static_cast<std::size_t>(k)]) + "," + num(p.intercepts[static_cast<std::size_t>(k)]);
        for (Index r = 0; r < p.coefficients.rows(); ++r) out += "," + num(p.coefficients(r, k));
        out += "\n";
    }
    return out;
}

std::string path_summary_table(const FitPath<double>& p)
{
    std::string out = "index,lambda,loss,df_groups,iters,converged\n";
    for (Index k = 0; k < p.size(); ++k) {
        const auto s = static_cast<std::size_t>(k);
        out += fmt::format("{},{},{},{},{},{}\n", k, num(p.lambdas[s]), num(p.loss_values[s]), p.df_groups[s], p.iters[s],
                           p.converged[s] ? 1 : 0);
    }
    return out;
}

std::string cv_table(const CVResult<double>& cv)
{
    std::string out = fmt::format("index,lambda,cve,cvse,selected\n");
    for (std::size_t k = 0; k < cv.lambdas.size(); ++k)
        out += fmt::format("{},{},{},{},{}\n", k, num(cv.lambdas[k]), num(cv.cve[k]), num(cv.cvse[k]),
                           static_cast<Index>(k) == cv.lambda_min_index ? 1 : 0);
    return out;
}

std::string fold_table(const CVResult<double>& cv)
{
    std::string out = "row,fold\n";
    for (std::size_t i = 0; i < cv.fold_assignment.size(); ++i) out += fmt::format("{},{}\n", i + 1, cv.fold_assignment[i] + 1);
    return out;
}

std::string simulation_summary_table(const sim::SimulationResult& r)
{
    std::string out = "method,replicates,rmse_mean,rmse_se,rme_mean,rme_se,groups_mean,groups_se,true_disc_mean,"
                      "false_disc_mean,lambda_mean,oracle_rmse\n";
    const double oracle = sim::oracle_rmse(r.scenario);
    for (const auto& m : r.methods)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(m.family), m.replicates, num(m.rmse_mean),
                           num(m.rmse_se), num(m.rme_mean), num(m.rme_se), num(m.groups_mean), num(m.groups_se),
                           num(m.true_disc_mean), num(m.false_disc_mean), num(m.lambda_mean), num(oracle));
    return out;
}

std::string simulation_replicate_table(const sim::SimulationResult& r)
{
    std::string out = "replicate,method,lambda,rmse,rme,groups,true_disc,false_disc\n";
    for (const auto& rec : r.records)
        out += fmt::format("{},{},{},{},{},{},{},{}\n", rec.replicate + 1, to_string(rec.family), num(rec.lambda),
                           num(rec.score.rmse), num(rec.score.rme), rec.score.model_size_groups,
                           rec.score.true_discoveries, rec.score.false_discoveries);
    return out;
}

// ---------------------------------------------------------------------------
// SVG figures

namespace {

constexpr double W = 640, H = 420, ML = 70, MR = 20, MT = 30, MB = 50;

struct Frame {
    double x0, x1, y0, y1;
    double sx(double x) const { return ML + (x - x0) / (x1 - x0) * (W - ML - MR); }
    double sy(double y) const { return H - MB - (y - y0) / (y1 - y0) * (H - MT - MB); }
};

const char* palette(std::size_t g)
{
    static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                   "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"};
    return colors[g % 10];
}

std::string svg_open(const std::string& title)
{
    return fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
                       "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
                       "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                       W, H, W, H, W / 2, title);
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel)
{
    std::string out = fmt::format("<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">"
                                  "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>"
                                  "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\"/></g>\n",
                                  ML, H - MB, W - MR, MT);
    for (int t = 0; t <= 4; ++t) {
        const double xv = f.x0 + (f.x1 - f.x0) * t / 4.0;
        const double yv = f.y0 + (f.y1 - f.y0) * t / 4.0;
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\" "
                           "text-anchor=\"middle\">{:.3g}</text>\n",
                           f.sx(xv), H - MB + 15, xv);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"10\" "
                           "text-anchor=\"end\">{:.3g}</text>\n",
                           ML - 5, f.sy(yv) + 3, yv);
    }
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
                       "text-anchor=\"middle\">{}</text>\n",
                       (ML + W - MR) / 2, H - 12, xlabel);
    out += fmt::format("<text x=\"15\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
                       "transform=\"rotate(-90 15 {:.2f})\">{}</text>\n",
                       (MT + H - MB) / 2, (MT + H - MB) / 2, ylabel);
    return out;
}

Frame padded(double x0, double x1, double y0, double y1)
{
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) {
        y0 -= 1;
        y1 += 1;
    }
    const double py = 0.05 * (y1 - y0);
    // log(lambda) decreases left to right
    return Frame{x1, x0, y0 - py, y1 + py};
}

} // namespace

std::string coefficient_path_svg(const FitPath<double>& p)
{
    if (p.size() == 0) throw ConfigError("coefficient_path_svg: empty path");
    std::vector<double> lx;
    for (double l : p.lambdas) lx.push_back(std::log(l));
    const double ymin = std::min(0.0, p.coefficients.minCoeff());
    const double ymax = std::max(0.0, p.coefficients.maxCoeff());
    const Frame f = padded(lx.back(), lx.front(), ymin, ymax);
    std::string out = svg_open(fmt::format("{} coefficient paths", to_string(p.family)));
    out += axes(f, "log(lambda)", "coefficient");
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#bbbbbb\"/>\n", f.sx(f.x0),
                       f.sy(0), f.sx(f.x1), f.sy(0));
    for (Index r = 0; r < p.coefficients.rows(); ++r) {
        std::string pts;
        for (Index k = 0; k < p.size(); ++k)
            pts += fmt::format("{:.2f},{:.2f} ", f.sx(lx[static_cast<std::size_t>(k)]), f.sy(p.coefficients(r, k)));
        const auto g = static_cast<std::size_t>(p.group_of[static_cast<std::size_t>(r)]);
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"><title>{} ({})</title>"
                           "</polyline>\n",
                           palette(g), pts, r < static_cast<Index>(p.column_names.size()) ? p.column_names[static_cast<std::size_t>(r)] : "",
                           g < p.group_labels.size() ? p.group_labels[g] : "");
    }
    out += "</svg>\n";
    return out;
}

std::string cv_curve_svg(const CVResult<double>& cv)
{
    if (cv.lambdas.empty()) throw ConfigError("cv_curve_svg: empty result");
    std::vector<double> lx;
    double ymin = cv.cve.front(), ymax = cv.cve.front();
    for (std::size_t k = 0; k < cv.lambdas.size(); ++k) {
        lx.push_back(std::log(cv.lambdas[k]));
        ymin = std::min(ymin, cv.cve[k] - cv.cvse[k]);
        ymax = std::max(ymax, cv.cve[k] + cv.cvse[k]);
    }
    const Frame f = padded(lx.back(), lx.front(), ymin, ymax);
    std::string out = svg_open(fmt::format("cross-validation ({})", to_string(cv.metric)));
    out += axes(f, "log(lambda)", to_string(cv.metric));
    for (std::size_t k = 0; k < lx.size(); ++k) {
        out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#999999\"/>\n",
                           f.sx(lx[k]), f.sy(cv.cve[k] - cv.cvse[k]), f.sy(cv.cve[k] + cv.cvse[k]));
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"#d62728\"/>\n", f.sx(lx[k]), f.sy(cv.cve[k]));
    }
    const double sel = lx[static_cast<std::size_t>(cv.lambda_min_index)];
    out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\" "
                       "stroke-dasharray=\"4 3\"/>\n",
                       f.sx(sel), f.sy(f.y0), f.sy(f.y1));
    out += "</svg>\n";
    return out;
}

} // namespace grpdesc::io
