#include "cwa/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cwa/errors.hpp"
#include "cwa/textio.hpp"

using json = nlohmann::ordered_json;

namespace cwa {

namespace {

// One scored generation, as read back from a run directory.
struct MetricRow {
    std::string experiment;
    std::string template_set; // empty for ingested transcripts
    std::string template_id;
    std::string language;
    std::string style;
    std::optional<bool> matched;
    int n_target = 0;
    int repetition = 0;
    int n_gen = 0;
    int error = 0;
    std::string outcome;
};

struct CwaRow {
    std::string experiment;
    std::optional<bool> matched;
    int n_target = 0;
    std::vector<double> attn_layer;
    std::vector<std::vector<double>> attn_head;
    std::vector<double> mlp;
};

std::vector<MetricRow> read_metrics(const std::string& dir) {
    const std::string path = dir + "/metrics.csv";
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("metrics file is empty: " + path);
    }
    std::vector<MetricRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 13) {
            throw Error(path + ":" + std::to_string(line_no) + ": expected 13 columns, got " +
                        std::to_string(f.size()));
        }
        MetricRow r;
        r.experiment = f[0];
        r.template_set = f[1];
        r.template_id = f[2];
        r.language = f[3];
        r.style = f[4];
        if (!f[5].empty()) {
            r.matched = f[5] == "1";
        }
        r.n_target = static_cast<int>(parse_long(f[6]));
        r.repetition = static_cast<int>(parse_long(f[7]));
        r.n_gen = static_cast<int>(parse_long(f[9]));
        r.error = static_cast<int>(parse_long(f[10]));
        r.outcome = f[11];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<CwaRow> read_cwa(const std::string& dir) {
    const std::string path = dir + "/cwa.jsonl";
    if (!std::filesystem::exists(path)) {
        return {}; // metrics-only directory (transcript ingest)
    }
    std::istringstream in(read_text_file(path));
    std::vector<CwaRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const json j = json::parse(line);
            CwaRow r;
            r.experiment = j.at("experiment").get<std::string>();
            if (j.contains("matched")) {
                r.matched = j.at("matched").get<bool>();
            }
            r.n_target = j.at("n_target").get<int>();
            r.attn_layer = j.at("attn_layer").get<std::vector<double>>();
            r.attn_head = j.at("attn_head").get<std::vector<std::vector<double>>>();
            r.mlp = j.at("mlp").get<std::vector<double>>();
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

ModelVariant variant_of(const std::string& experiment) {
    return parse_experiment_tag(experiment).variant;
}

bool panel_includes(std::optional<bool> matched, ModelVariant variant, MatchMode panel) {
    if (!matched.has_value()) {
        return true; // transcripts carry no style; panels cannot exclude them
    }
    switch (panel) {
    case MatchMode::Matched: return *matched;
    case MatchMode::Mismatched: return !*matched;
    case MatchMode::Mixed: return variant == ModelVariant::Base ? *matched : !*matched;
    }
    return true;
}

// Sorted copy; every aggregate reduces values in this canonical order so
// results do not depend on the order run directories were given in.
template <typename T>
std::vector<T> canonical(std::vector<T> values) {
    std::sort(values.begin(), values.end());
    return values;
}

double mean_of(std::vector<double> values) {
    values = canonical(std::move(values));
    double acc = 0.0;
    for (double v : values) {
        acc += v;
    }
    return acc / static_cast<double>(values.size());
}

// Fences at 1.5 IQR outside the quartiles, the usual boxplot rule.
std::pair<double, double> outlier_fences(const ErrorStats& s) {
    const double iqr = s.q75 - s.q25;
    return {s.q25 - 1.5 * iqr, s.q75 + 1.5 * iqr};
}

} // namespace

Aggregates aggregate(std::span<const std::string> run_dirs, const AggregateOptions& options) {
    std::vector<MetricRow> metrics;
    std::vector<CwaRow> cwa_rows;
    for (const std::string& dir : run_dirs) {
        for (MetricRow& r : read_metrics(dir)) {
            metrics.push_back(std::move(r));
        }
        for (CwaRow& r : read_cwa(dir)) {
            cwa_rows.push_back(std::move(r));
        }
    }

    const auto in_range = [&](int n) { return n >= options.n_min && n <= options.n_max; };

    // Error-based tables.
    std::map<std::string, std::vector<double>> errors_by_experiment;
    std::map<std::pair<std::string, int>, std::vector<double>> errors_by_exp_n;
    std::map<std::tuple<std::string, std::string, int>, std::vector<double>> errors_by_tmpl;
    for (const MetricRow& r : metrics) {
        if (!in_range(r.n_target)) {
            continue;
        }
        if (!options.include_truncated && r.outcome == "truncated") {
            continue;
        }
        if (options.panel &&
            !panel_includes(r.matched, variant_of(r.experiment), *options.panel)) {
            continue;
        }
        const double e = static_cast<double>(r.error);
        errors_by_experiment[r.experiment].push_back(e);
        errors_by_exp_n[{r.experiment, r.n_target}].push_back(e);
        errors_by_tmpl[{r.language, r.template_id, r.n_target}].push_back(e);
    }

    Aggregates out;
    for (const auto& [experiment, errors] : errors_by_experiment) {
        out.error_stats.push_back({experiment, descriptive_stats(canonical(errors))});
    }
    for (const auto& [key, errors] : errors_by_exp_n) {
        const ErrorStats s = descriptive_stats(canonical(errors));
        const auto [lo, hi] = outlier_fences(s);
        int outliers = 0;
        for (double e : errors) {
            if (e < lo || e > hi) {
                ++outliers;
            }
        }
        out.error_dist.push_back({key.first, key.second, s.min, s.q25, s.q50, s.q75, s.max,
                                  outliers});
    }
    for (const auto& [key, errors] : errors_by_tmpl) {
        std::vector<double> kept = canonical(errors);
        if (options.exclude_outliers_in_mae) {
            const ErrorStats s = descriptive_stats(kept);
            const auto [lo, hi] = outlier_fences(s);
            std::vector<double> filtered;
            for (double e : kept) {
                if (e >= lo && e <= hi) {
                    filtered.push_back(e);
                }
            }
            kept = std::move(filtered);
        }
        out.mae_rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key),
                                mae(std::span<const double>(kept))});
    }

    // CWA tables.
    std::map<std::string, std::vector<const CwaRow*>> cwa_by_experiment;
    for (const CwaRow& r : cwa_rows) {
        if (!in_range(r.n_target)) {
            continue;
        }
        if (options.panel &&
            !panel_includes(r.matched, variant_of(r.experiment), *options.panel)) {
            continue;
        }
        cwa_by_experiment[r.experiment].push_back(&r);
    }
    for (const auto& [experiment, rows] : cwa_by_experiment) {
        const std::size_t layers = rows.front()->attn_layer.size();
        CwaLayerProfile profile;
        profile.experiment = experiment;
        for (std::size_t l = 0; l < layers; ++l) {
            std::vector<double> sums, means, mlps;
            for (const CwaRow* r : rows) {
                sums.push_back(r->attn_layer[l]);
                double head_mean = 0.0;
                for (double h : r->attn_head[l]) {
                    head_mean += h;
                }
                head_mean /= static_cast<double>(r->attn_head[l].size());
                means.push_back(head_mean);
                mlps.push_back(r->mlp[l]);
            }
            profile.attn_sum.push_back(mean_of(std::move(sums)));
            profile.attn_mean.push_back(mean_of(std::move(means)));
            profile.mlp.push_back(mean_of(std::move(mlps)));
        }
        out.profiles.push_back(std::move(profile));

        std::vector<int> n_values;
        for (const CwaRow* r : rows) {
            if (std::find(n_values.begin(), n_values.end(), r->n_target) == n_values.end()) {
                n_values.push_back(r->n_target);
            }
        }
        std::sort(n_values.begin(), n_values.end());

        for (const std::string& kind : {std::string("attn"), std::string("mlp")}) {
            CwaHeatmap map;
            map.experiment = experiment;
            map.component_kind = kind;
            map.n_values = n_values;
            map.grid.assign(layers, std::vector<double>(n_values.size(), 0.0));
            for (std::size_t l = 0; l < layers; ++l) {
                for (std::size_t c = 0; c < n_values.size(); ++c) {
                    std::vector<double> cell;
                    for (const CwaRow* r : rows) {
                        if (r->n_target == n_values[c]) {
                            cell.push_back(kind == "attn" ? r->attn_layer[l] : r->mlp[l]);
                        }
                    }
                    map.grid[l][c] = mean_of(std::move(cell));
                }
            }
            out.heatmaps.push_back(std::move(map));
        }
    }

    return out;
}

namespace {

void sort_aggregates(Aggregates& a) {
    std::sort(a.profiles.begin(), a.profiles.end(),
              [](const auto& x, const auto& y) { return x.experiment < y.experiment; });
    std::sort(a.heatmaps.begin(), a.heatmaps.end(), [](const auto& x, const auto& y) {
        return std::tie(x.experiment, x.component_kind) < std::tie(y.experiment, y.component_kind);
    });
    std::sort(a.error_dist.begin(), a.error_dist.end(), [](const auto& x, const auto& y) {
        return std::tie(x.experiment, x.n_target) < std::tie(y.experiment, y.n_target);
    });
    std::sort(a.mae_rows.begin(), a.mae_rows.end(), [](const auto& x, const auto& y) {
        return std::tie(x.language, x.template_id, x.n_target) <
               std::tie(y.language, y.template_id, y.n_target);
    });
    std::sort(a.error_stats.begin(), a.error_stats.end(),
              [](const auto& x, const auto& y) { return x.experiment < y.experiment; });
}

} // namespace

void emit_csv(const Aggregates& aggregates, const std::string& out_dir) {
    ensure_directory(out_dir);
    Aggregates sorted = aggregates;
    sort_aggregates(sorted);

    std::ostringstream by_layer;
    by_layer << "experiment,layer,attn_sum,attn_mean,mlp\n";
    for (const CwaLayerProfile& p : sorted.profiles) {
        for (std::size_t l = 0; l < p.attn_sum.size(); ++l) {
            by_layer << p.experiment << ',' << l << ',' << format_double(p.attn_sum[l]) << ','
                     << format_double(p.attn_mean[l]) << ',' << format_double(p.mlp[l]) << "\n";
        }
    }
    write_text_file(out_dir + "/cwa_by_layer.csv", by_layer.str());

    std::ostringstream heatmap;
    heatmap << "experiment,component_kind,layer,n_target,cwa\n";
    for (const CwaHeatmap& m : sorted.heatmaps) {
        for (std::size_t l = 0; l < m.grid.size(); ++l) {
            for (std::size_t c = 0; c < m.n_values.size(); ++c) {
                heatmap << m.experiment << ',' << m.component_kind << ',' << l << ','
                        << m.n_values[c] << ',' << format_double(m.grid[l][c]) << "\n";
            }
        }
    }
    write_text_file(out_dir + "/cwa_heatmap.csv", heatmap.str());

    std::ostringstream dist;
    dist << "experiment,n_target,min,q25,q50,q75,max,n_outliers\n";
    for (const ErrorDistRow& r : sorted.error_dist) {
        dist << r.experiment << ',' << r.n_target << ',' << format_double(r.min) << ','
             << format_double(r.q25) << ',' << format_double(r.q50) << ','
             << format_double(r.q75) << ',' << format_double(r.max) << ',' << r.n_outliers
             << "\n";
    }
    write_text_file(out_dir + "/error_dist.csv", dist.str());

    std::ostringstream mae_out;
    mae_out << "language,template,n_target,mae\n";
    for (const MaeRow& r : sorted.mae_rows) {
        mae_out << r.language << ',' << r.template_id << ',' << r.n_target << ','
                << format_double(r.mae_value) << "\n";
    }
    write_text_file(out_dir + "/mae.csv", mae_out.str());

    std::ostringstream stats;
    stats << "experiment,avg,std,min,q25,q50,q75,max\n";
    for (const ErrorStatsRow& r : sorted.error_stats) {
        stats << r.experiment << ',' << format_double(r.stats.avg) << ','
              << format_double(r.stats.stddev) << ',' << format_double(r.stats.min) << ','
              << format_double(r.stats.q25) << ',' << format_double(r.stats.q50) << ','
              << format_double(r.stats.q75) << ',' << format_double(r.stats.max) << "\n";
    }
    write_text_file(out_dir + "/error_stats.csv", stats.str());
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    std::size_t columns) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("missing header in " + path);
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != columns) {
            throw Error(path + ": expected " + std::to_string(columns) + " columns");
        }
        rows.push_back(std::move(f));
    }
    return rows;
}

} // namespace

Aggregates parse_csv_dir(const std::string& dir) {
    Aggregates a;

    std::map<std::string, CwaLayerProfile> profiles;
    for (const auto& f : read_csv_rows(dir + "/cwa_by_layer.csv", 5)) {
        CwaLayerProfile& p = profiles[f[0]];
        p.experiment = f[0];
        p.attn_sum.push_back(parse_double(f[2]));
        p.attn_mean.push_back(parse_double(f[3]));
        p.mlp.push_back(parse_double(f[4]));
    }
    for (auto& [_, p] : profiles) {
        a.profiles.push_back(std::move(p));
    }

    std::map<std::pair<std::string, std::string>, CwaHeatmap> heatmaps;
    for (const auto& f : read_csv_rows(dir + "/cwa_heatmap.csv", 5)) {
        CwaHeatmap& m = heatmaps[{f[0], f[1]}];
        m.experiment = f[0];
        m.component_kind = f[1];
        const std::size_t layer = static_cast<std::size_t>(parse_long(f[2]));
        const int n = static_cast<int>(parse_long(f[3]));
        std::size_t col;
        const auto it = std::find(m.n_values.begin(), m.n_values.end(), n);
        if (it == m.n_values.end()) {
            m.n_values.push_back(n);
            col = m.n_values.size() - 1;
        } else {
            col = static_cast<std::size_t>(it - m.n_values.begin());
        }
        if (m.grid.size() <= layer) {
            m.grid.resize(layer + 1);
        }
        if (m.grid[layer].size() <= col) {
            m.grid[layer].resize(col + 1, 0.0);
        }
        m.grid[layer][col] = parse_double(f[4]);
    }
    for (auto& [_, m] : heatmaps) {
        a.heatmaps.push_back(std::move(m));
    }

    for (const auto& f : read_csv_rows(dir + "/error_dist.csv", 8)) {
        a.error_dist.push_back({f[0], static_cast<int>(parse_long(f[1])), parse_double(f[2]),
                                parse_double(f[3]), parse_double(f[4]), parse_double(f[5]),
                                parse_double(f[6]), static_cast<int>(parse_long(f[7]))});
    }
    for (const auto& f : read_csv_rows(dir + "/mae.csv", 4)) {
        a.mae_rows.push_back({f[0], f[1], static_cast<int>(parse_long(f[2])),
                              parse_double(f[3])});
    }
    for (const auto& f : read_csv_rows(dir + "/error_stats.csv", 8)) {
        ErrorStatsRow r;
        r.experiment = f[0];
        r.stats.avg = parse_double(f[1]);
        r.stats.stddev = parse_double(f[2]);
        r.stats.min = parse_double(f[3]);
        r.stats.q25 = parse_double(f[4]);
        r.stats.q50 = parse_double(f[5]);
        r.stats.q75 = parse_double(f[6]);
        r.stats.max = parse_double(f[7]);
        a.error_stats.push_back(std::move(r));
    }
    return a;
}

namespace {

struct Rgb {
    int r, g, b;
};

constexpr Rgb kLowColor = {33, 102, 172};   // #2166ac
constexpr Rgb kHighColor = {178, 24, 43};   // #b2182b
constexpr Rgb kFlatColor = {247, 247, 247}; // #f7f7f7, for all-equal data

std::string hex_color(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

Rgb lerp_color(double t) {
    const auto mix = [t](int lo, int hi) {
        return static_cast<int>(std::lround(lo + t * (hi - lo)));
    };
    return {mix(kLowColor.r, kHighColor.r), mix(kLowColor.g, kHighColor.g),
            mix(kLowColor.b, kHighColor.b)};
}

struct GridSpec {
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> values;
};

std::string grid_svg(const GridSpec& spec) {
    constexpr int cell = 28;
    constexpr int left = 88;
    constexpr int top = 48;
    constexpr int legend_height = 40;

    const std::size_t rows = spec.values.size();
    const std::size_t cols = rows ? spec.values[0].size() : 0;

    double min_v = 0.0, max_v = 0.0;
    bool first = true;
    for (const auto& row : spec.values) {
        for (double v : row) {
            min_v = first ? v : std::min(min_v, v);
            max_v = first ? v : std::max(max_v, v);
            first = false;
        }
    }
    const bool flat = first || min_v == max_v;

    const int width = left + cell * static_cast<int>(cols) + 24;
    const int height = top + cell * static_cast<int>(rows) + legend_height;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"8\" y=\"20\" font-size=\"14\">" << spec.title << "</text>\n";
    for (std::size_t c = 0; c < cols; ++c) {
        svg << "<text x=\"" << left + static_cast<int>(c) * cell + cell / 2 << "\" y=\""
            << top - 8 << "\" font-size=\"11\" text-anchor=\"middle\">" << spec.col_labels[c]
            << "</text>\n";
    }
    for (std::size_t r = 0; r < rows; ++r) {
        svg << "<text x=\"" << left - 6 << "\" y=\"" << top + static_cast<int>(r) * cell + 18
            << "\" font-size=\"11\" text-anchor=\"end\">" << spec.row_labels[r] << "</text>\n";
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = spec.values[r][c];
            const std::string fill =
                flat ? hex_color(kFlatColor)
                     : hex_color(lerp_color((v - min_v) / (max_v - min_v)));
            svg << "<rect x=\"" << left + static_cast<int>(c) * cell << "\" y=\""
                << top + static_cast<int>(r) * cell << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"" << fill << "\" stroke=\"#ffffff\">"
                << "<title>" << format_double(v) << "</title></rect>\n";
        }
    }
    const int legend_y = top + cell * static_cast<int>(rows) + 24;
    if (flat) {
        svg << "<text x=\"8\" y=\"" << legend_y << "\" font-size=\"11\">all values equal";
        if (!first) {
            svg << " (" << format_double(min_v) << ")";
        }
        svg << "</text>\n";
    } else {
        svg << "<text x=\"8\" y=\"" << legend_y << "\" font-size=\"11\">min "
            << format_double(min_v) << " = " << hex_color(kLowColor) << ", max "
            << format_double(max_v) << " = " << hex_color(kHighColor)
            << " (linear)</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace

std::string heatmap_svg(const CwaHeatmap& map) {
    GridSpec spec;
    spec.title = map.experiment + " " + map.component_kind + " CWA by layer and target length";
    for (std::size_t l = 0; l < map.grid.size(); ++l) {
        spec.row_labels.push_back("layer " + std::to_string(l));
    }
    for (int n : map.n_values) {
        spec.col_labels.push_back("N=" + std::to_string(n));
    }
    spec.values = map.grid;
    return grid_svg(spec);
}

std::string profile_svg(const CwaLayerProfile& profile) {
    GridSpec spec;
    spec.title = profile.experiment + " CWA by layer";
    spec.row_labels = {"attn_sum", "attn_mean", "mlp"};
    for (std::size_t l = 0; l < profile.attn_sum.size(); ++l) {
        spec.col_labels.push_back("L" + std::to_string(l));
    }
    spec.values = {profile.attn_sum, profile.attn_mean, profile.mlp};
    return grid_svg(spec);
}

void emit_svg(const Aggregates& aggregates, const std::string& out_dir) {
    ensure_directory(out_dir);
    for (const CwaLayerProfile& p : aggregates.profiles) {
        write_text_file(out_dir + "/cwa_profile_" + p.experiment + ".svg", profile_svg(p));
    }
    for (const CwaHeatmap& m : aggregates.heatmaps) {
        write_text_file(out_dir + "/cwa_heatmap_" + m.experiment + "_" + m.component_kind + ".svg",
                        heatmap_svg(m));
    }
}

} // namespace cwa
