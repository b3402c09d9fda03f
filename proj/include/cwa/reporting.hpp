#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwa/harness.hpp"
#include "cwa/judge.hpp"

namespace cwa {

struct AggregateOptions {
    int n_min = 3;                      // analysis range, narrower than the 0..9 prompt range
    int n_max = 9;
    bool exclude_outliers_in_mae = true;
    bool include_truncated = false;     // count truncated generations in the error metrics
    std::optional<MatchMode> panel;     // keep only records on one side of the template/variant match
};

// Mean CWA per layer for one experiment: attention as the head sum, as
// the mean over heads, and the MLP path.
struct CwaLayerProfile {
    std::string experiment;
    std::vector<double> attn_sum;
    std::vector<double> attn_mean;
    std::vector<double> mlp;
};

// Mean CWA per (layer, target length) cell, one grid per experiment and
// component kind ("attn" or "mlp").
struct CwaHeatmap {
    std::string experiment;
    std::string component_kind;
    std::vector<int> n_values;             // column labels, ascending
    std::vector<std::vector<double>> grid; // [layer][n index]
};

struct ErrorDistRow {
    std::string experiment;
    int n_target = 0;
    double min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
    int n_outliers = 0; // beyond 1.5 IQR
};

struct MaeRow {
    std::string language;
    std::string template_id;
    int n_target = 0;
    double mae_value = 0;
};

struct ErrorStatsRow {
    std::string experiment;
    ErrorStats stats;
};

struct Aggregates {
    std::vector<CwaLayerProfile> profiles;
    std::vector<CwaHeatmap> heatmaps;
    std::vector<ErrorDistRow> error_dist;
    std::vector<MaeRow> mae_rows;
    std::vector<ErrorStatsRow> error_stats;
};

// Folds one or more run directories (from run_experiment or
// ingest_transcripts) into the report tables. Deterministic and
// invariant to the order of the input directories. Missing or unreadable
// files raise Error naming the file.
Aggregates aggregate(std::span<const std::string> run_dirs, const AggregateOptions& options);

// CSV schemas, one file per table:
//   cwa_by_layer.csv  experiment,layer,attn_sum,attn_mean,mlp
//   cwa_heatmap.csv   experiment,component_kind,layer,n_target,cwa
//   error_dist.csv    experiment,n_target,min,q25,q50,q75,max,n_outliers
//   mae.csv           language,template,n_target,mae
//   error_stats.csv   experiment,avg,std,min,q25,q50,q75,max
// UTF-8, '.' decimal separator, stable row order; an empty aggregate
// still writes every header.
void emit_csv(const Aggregates& aggregates, const std::string& out_dir);

// Inverse of emit_csv over the same directory layout; emitting a parsed
// aggregate reproduces the files byte for byte.
Aggregates parse_csv_dir(const std::string& dir);

// Self-contained SVG heat grids. Cell values ride along as <title>
// elements; the fill is a linear blend between the low and high colors,
// annotated with the data min and max. All-equal data degrades to a
// single color with a legend note.
std::string heatmap_svg(const CwaHeatmap& map);
std::string profile_svg(const CwaLayerProfile& profile);

// Writes profile and heatmap SVGs per experiment into out_dir.
void emit_svg(const Aggregates& aggregates, const std::string& out_dir);

} // namespace cwa
