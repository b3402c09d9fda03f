#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cwa/errors.hpp"
#include "cwa/judge.hpp"
#include "cwa/reporting.hpp"
#include "cwa/textio.hpp"

using namespace cwa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

constexpr char kHeader[] =
    "experiment,template_set,template,language,style,matched,n_target,repetition,seed,"
    "n_gen,error,outcome,k\n";

// Hand-written run directory: two repetitions of one prompt with CWA
// values 0.1 and 0.3 in a single layer, plus enough metric rows to give
// the error tables something to chew on.
void write_synthetic_run(const std::string& dir, double cwa_a, double cwa_b) {
    ensure_directory(dir);
    std::ofstream metrics(dir + "/metrics.csv");
    metrics << kHeader;
    metrics << "ENG-IT,it_style,a,en,instructional,1,3,0,11,2,-1,too_short,4\n";
    metrics << "ENG-IT,it_style,a,en,instructional,1,3,1,12,3,0,success,5\n";
    metrics << "ENG-IT,it_style,b,en,instructional,1,3,0,13,3,0,success,5\n";
    metrics << "ENG-IT,it_style,b,en,instructional,1,3,1,14,4,1,too_long,6\n";
    metrics.close();

    std::ofstream cwa(dir + "/cwa.jsonl");
    cwa << R"({"experiment":"ENG-IT","template_set":"it_style","template":"a","language":"en",)"
        << R"("style":"instructional","matched":true,"n_target":3,"repetition":0,"seed":11,)"
        << R"("k":4,"signs":[1,1,1,1],"embedding":0.0,"attn_layer":[)" << format_double(cwa_a)
        << R"(],"attn_head":[[)" << format_double(cwa_a) << R"(]],"mlp":[0.05]})" << "\n";
    cwa << R"({"experiment":"ENG-IT","template_set":"it_style","template":"a","language":"en",)"
        << R"("style":"instructional","matched":true,"n_target":3,"repetition":1,"seed":12,)"
        << R"("k":5,"signs":[1,1,1,1,1],"embedding":0.0,"attn_layer":[)" << format_double(cwa_b)
        << R"(],"attn_head":[[)" << format_double(cwa_b) << R"(]],"mlp":[0.15]})" << "\n";
    cwa.close();
}

} // namespace

TEST_CASE("profile values are means over runs") {
    TempDir dir("cwa_report_mean");
    write_synthetic_run(dir.str(), 0.1, 0.3);
    const std::vector<std::string> runs = {dir.str()};
    const Aggregates a = aggregate(runs, AggregateOptions{});
    REQUIRE(a.profiles.size() == 1);
    CHECK(a.profiles[0].experiment == "ENG-IT");
    CHECK(a.profiles[0].attn_sum[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(a.profiles[0].attn_mean[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(a.profiles[0].mlp[0] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("error distribution quartiles come from the shared stats code") {
    TempDir dir("cwa_report_dist");
    ensure_directory(dir.str());
    std::ofstream metrics(dir.str() + "/metrics.csv");
    metrics << kHeader;
    int rep = 0;
    for (int error : {-1, 0, 0, 1}) {
        metrics << "ENG-IT,it_style,a,en,instructional,1,3," << rep++ << ",0," << 3 + error << ','
                << error << ",success,5\n";
    }
    metrics.close();

    const std::vector<std::string> runs = {dir.str()};
    const Aggregates a = aggregate(runs, AggregateOptions{});
    REQUIRE(a.error_dist.size() == 1);
    CHECK(a.error_dist[0].q50 == 0.0);
    CHECK(a.error_dist[0].min == -1.0);
    CHECK(a.error_dist[0].max == 1.0);
    CHECK(a.error_dist[0].n_outliers == 0);

    REQUIRE(a.error_stats.size() == 1);
    const ErrorStats expected = descriptive_stats(std::vector<int>{-1, 0, 0, 1});
    CHECK(a.error_stats[0].stats.avg == expected.avg);
    CHECK(a.error_stats[0].stats.stddev == expected.stddev);
    CHECK(a.error_stats[0].stats.q25 == expected.q25);

    REQUIRE(a.mae_rows.size() == 1);
    CHECK(a.mae_rows[0].mae_value == mae(std::vector<int>{-1, 0, 0, 1}));
}

TEST_CASE("an empty aggregate emits header-only files") {
    TempDir out("cwa_report_empty");
    emit_csv(Aggregates{}, out.str());
    CHECK(read_text_file(out.str() + "/cwa_by_layer.csv") ==
          "experiment,layer,attn_sum,attn_mean,mlp\n");
    CHECK(read_text_file(out.str() + "/cwa_heatmap.csv") ==
          "experiment,component_kind,layer,n_target,cwa\n");
    CHECK(read_text_file(out.str() + "/error_dist.csv") ==
          "experiment,n_target,min,q25,q50,q75,max,n_outliers\n");
    CHECK(read_text_file(out.str() + "/mae.csv") == "language,template,n_target,mae\n");
    CHECK(read_text_file(out.str() + "/error_stats.csv") ==
          "experiment,avg,std,min,q25,q50,q75,max\n");
}

TEST_CASE("heatmap row count is experiments x kinds x layers x n values") {
    TempDir dir("cwa_report_rowcount");
    write_synthetic_run(dir.str(), 0.1, 0.3);
    TempDir out("cwa_report_rowcount_out");
    const std::vector<std::string> runs = {dir.str()};
    const Aggregates a = aggregate(runs, AggregateOptions{});
    emit_csv(a, out.str());

    std::ifstream in(out.str() + "/cwa_heatmap.csv");
    std::string line;
    int rows = -1; // skip header
    while (std::getline(in, line)) {
        if (!line.empty()) {
            ++rows;
        }
    }
    // 1 experiment x 2 kinds x 1 layer x 1 n value.
    CHECK(rows == 2);
}

TEST_CASE("aggregation is invariant to run directory order") {
    TempDir dir_a("cwa_report_perm_a");
    TempDir dir_b("cwa_report_perm_b");
    write_synthetic_run(dir_a.str(), 0.1, 0.3);
    write_synthetic_run(dir_b.str(), -0.2, 0.4);

    TempDir out_ab("cwa_report_perm_ab");
    TempDir out_ba("cwa_report_perm_ba");
    const std::vector<std::string> ab = {dir_a.str(), dir_b.str()};
    const std::vector<std::string> ba = {dir_b.str(), dir_a.str()};
    emit_csv(aggregate(ab, AggregateOptions{}), out_ab.str());
    emit_csv(aggregate(ba, AggregateOptions{}), out_ba.str());

    for (const char* name : {"cwa_by_layer.csv", "cwa_heatmap.csv", "error_dist.csv", "mae.csv",
                             "error_stats.csv"}) {
        CHECK(read_text_file(out_ab.str() + "/" + name) ==
              read_text_file(out_ba.str() + "/" + name));
    }
}

TEST_CASE("parsing an emitted CSV directory and re-emitting is byte-identical") {
    TempDir dir("cwa_report_reemit");
    write_synthetic_run(dir.str(), 0.137, -0.255);
    TempDir out1("cwa_report_reemit_1");
    TempDir out2("cwa_report_reemit_2");
    const std::vector<std::string> runs = {dir.str()};
    emit_csv(aggregate(runs, AggregateOptions{}), out1.str());
    emit_csv(parse_csv_dir(out1.str()), out2.str());
    for (const char* name : {"cwa_by_layer.csv", "cwa_heatmap.csv", "error_dist.csv", "mae.csv",
                             "error_stats.csv"}) {
        CHECK(read_text_file(out1.str() + "/" + name) ==
              read_text_file(out2.str() + "/" + name));
    }
}

TEST_CASE("the truncated filter drops rows unless asked otherwise") {
    TempDir dir("cwa_report_trunc");
    ensure_directory(dir.str());
    std::ofstream metrics(dir.str() + "/metrics.csv");
    metrics << kHeader;
    metrics << "ENG-IT,it_style,a,en,instructional,1,3,0,1,3,0,success,5\n";
    metrics << "ENG-IT,it_style,a,en,instructional,1,3,1,2,9,6,truncated,24\n";
    metrics.close();

    const std::vector<std::string> runs = {dir.str()};
    AggregateOptions options;
    Aggregates a = aggregate(runs, options);
    REQUIRE(a.error_stats.size() == 1);
    CHECK(a.error_stats[0].stats.max == 0.0);

    options.include_truncated = true;
    a = aggregate(runs, options);
    CHECK(a.error_stats[0].stats.max == 6.0);
}

TEST_CASE("panel filters select matched or mismatched records") {
    TempDir dir("cwa_report_panel");
    ensure_directory(dir.str());
    std::ofstream metrics(dir.str() + "/metrics.csv");
    metrics << kHeader;
    metrics << "ENG-IT,it_style,a,en,instructional,1,3,0,1,3,0,success,5\n";
    metrics << "ENG-IT,it_style,d,en,prefix,0,3,0,2,5,2,too_long,7\n";
    metrics.close();

    const std::vector<std::string> runs = {dir.str()};
    AggregateOptions options;
    options.panel = MatchMode::Matched;
    Aggregates a = aggregate(runs, options);
    REQUIRE(a.error_stats.size() == 1);
    CHECK(a.error_stats[0].stats.max == 0.0);

    options.panel = MatchMode::Mismatched;
    a = aggregate(runs, options);
    CHECK(a.error_stats[0].stats.min == 2.0);

    // Mixed keeps the mismatched side for an instruction-tuned model.
    options.panel = MatchMode::Mixed;
    a = aggregate(runs, options);
    CHECK(a.error_stats[0].stats.min == 2.0);
}

TEST_CASE("missing run files raise errors naming the file") {
    TempDir dir("cwa_report_missing");
    const std::vector<std::string> runs = {dir.str()};
    try {
        aggregate(runs, AggregateOptions{});
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("metrics.csv") != std::string::npos);
    }
}

TEST_CASE("a one-cell heatmap SVG carries its value as a title") {
    CwaHeatmap map;
    map.experiment = "ENG-IT";
    map.component_kind = "attn";
    map.n_values = {3};
    map.grid = {{0.5}};
    const std::string svg = heatmap_svg(map);
    CHECK(svg.find("<title>0.5</title>") != std::string::npos);
    CHECK(svg.find("all values equal") != std::string::npos); // degenerate scale note
}

TEST_CASE("heatmap SVG has one rect per cell") {
    CwaHeatmap map;
    map.experiment = "ITA-IT";
    map.component_kind = "mlp";
    const int layers = 5;
    for (int n = 3; n <= 9; ++n) {
        map.n_values.push_back(n);
    }
    map.grid.assign(layers, std::vector<double>(7, 0.0));
    for (int l = 0; l < layers; ++l) {
        for (int c = 0; c < 7; ++c) {
            map.grid[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)] = l * 7 + c;
        }
    }
    const std::string svg = heatmap_svg(map);
    std::size_t rects = 0, pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    CHECK(rects == 35);
    CHECK(svg.find("min 0 = #2166ac") != std::string::npos);
    CHECK(svg.find("max 34 = #b2182b") != std::string::npos);
}

TEST_CASE("a monotone grid maps to a monotone color ramp") {
    CwaHeatmap map;
    map.experiment = "ENG-IT";
    map.component_kind = "attn";
    map.n_values = {3, 4, 5, 6};
    map.grid = {{0.0, 1.0, 2.0, 3.0}};
    const std::string svg = heatmap_svg(map);

    // Fill colors in document order; red channel must increase with the
    // cell value under the low-to-high blend.
    std::vector<int> reds;
    std::size_t pos = 0;
    while ((pos = svg.find("fill=\"#", pos)) != std::string::npos) {
        const std::string hex = svg.substr(pos + 7, 6);
        reds.push_back(std::stoi(hex.substr(0, 2), nullptr, 16));
        pos += 7;
    }
    REQUIRE(reds.size() == 4);
    for (std::size_t i = 0; i + 1 < reds.size(); ++i) {
        CHECK(reds[i] < reds[i + 1]);
    }
}

TEST_CASE("profile SVG renders three series rows") {
    CwaLayerProfile p;
    p.experiment = "ENG-IT";
    p.attn_sum = {0.1, 0.2};
    p.attn_mean = {0.05, 0.1};
    p.mlp = {-0.1, 0.3};
    const std::string svg = profile_svg(p);
    CHECK(svg.find("attn_sum") != std::string::npos);
    CHECK(svg.find("attn_mean") != std::string::npos);
    CHECK(svg.find("mlp") != std::string::npos);
    std::size_t rects = 0, pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    CHECK(rects == 6);
}
