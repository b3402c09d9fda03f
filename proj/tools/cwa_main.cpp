// Command-line front end: model construction, experiment runs, transcript
// scoring and report emission. Exit codes: 0 success, 1 data error,
// 2 usage error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cwa/errors.hpp"
#include "cwa/harness.hpp"
#include "cwa/model_io.hpp"
#include "cwa/reporting.hpp"
#include "cwa/selftest.hpp"
#include "cwa/textio.hpp"
#include "cwa/tokenizer.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

struct MakeModelArgs {
    std::uint64_t seed = 0;
    int layers = 4;
    int heads = 4;
    int dmodel = 64;
    int dff = 128;
    int max_seq = 64;
    float eps = 1e-5f;
    std::string vocab_extra;
    std::string out;
};

int cmd_make_model(const MakeModelArgs& args) {
    cwa::Vocabulary vocab;
    if (args.vocab_extra.empty()) {
        vocab = cwa::reference_vocabulary();
    } else {
        // Hex-escaped entries, one per line; replaces the built-in
        // subword list but keeps bytes and reserved ids.
        const cwa::Vocabulary table = cwa::Vocabulary::load_text_file(args.vocab_extra);
        std::vector<std::string> subwords(
            table.entries().begin() + cwa::Vocabulary::kFirstSubwordId, table.entries().end());
        vocab = cwa::reference_vocabulary(subwords);
    }
    cwa::ModelConfig cfg;
    cfg.layers = args.layers;
    cfg.heads = args.heads;
    cfg.d_model = args.dmodel;
    cfg.d_ff = args.dff;
    cfg.vocab_size = vocab.size();
    cfg.max_seq = args.max_seq;
    cfg.eps = args.eps;
    cfg.validate();

    const cwa::Weights weights = cwa::make_reference_weights(args.seed, cfg);
    cwa::save_model(weights, cfg, vocab, args.out);
    std::cout << "wrote " << args.out << " (" << cfg.layers << " layers, " << cfg.heads
              << " heads, d_model " << cfg.d_model << ", vocab " << cfg.vocab_size << ")\n";
    return 0;
}

struct RunArgs {
    std::string model;
    std::string experiment = "ENG-IT";
    std::string templates = "default"; // it|base|both|default
    std::string match_mode = "matched";
    int n_min = 0;
    int n_max = 9;
    int reps = 20;
    std::string decode = "greedy";
    float temperature = 1.0f;
    float top_p = 0.9f;
    int max_new_tokens = 32;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_run(const RunArgs& args) {
    cwa::ExperimentConfig config;
    config.experiment = args.experiment;
    config.model_path = args.model;
    if (args.templates == "it") {
        config.sets = {cwa::TemplateSet::ItStyle};
    } else if (args.templates == "base") {
        config.sets = {cwa::TemplateSet::BaseStyle};
    } else if (args.templates == "both") {
        config.sets = {cwa::TemplateSet::ItStyle, cwa::TemplateSet::BaseStyle};
    } // "default": leave empty, the variant picks its own set
    config.match_mode = cwa::parse_match_mode(args.match_mode);
    config.n_min = args.n_min;
    config.n_max = args.n_max;
    config.repetitions = args.reps;
    config.decode.mode = cwa::parse_decode_mode(args.decode);
    config.decode.temperature = args.temperature;
    config.decode.top_p = args.top_p;
    config.decode.max_new_tokens = args.max_new_tokens;
    config.master_seed = args.seed;

    const cwa::RunSummary summary = cwa::run_experiment(config, args.out);
    std::cout << summary.generations << " generations written to " << summary.out_dir << "\n";
    if (!summary.failures.empty()) {
        std::cerr << summary.failures.size() << " prompt(s) failed; see failures.jsonl\n";
        return 1;
    }
    return 0;
}

int cmd_ingest(const std::string& transcripts, const std::string& out) {
    const cwa::IngestResult result = cwa::ingest_transcripts(transcripts, out);
    std::cout << result.rows.size() << " transcript rows scored, metrics in " << result.out_dir
              << "\n";
    if (!result.clean()) {
        for (const auto& [line, reason] : result.skipped) {
            std::cerr << transcripts << ":" << line << ": skipped (" << reason << ")\n";
        }
        return 1;
    }
    return 0;
}

struct ReportArgs {
    std::vector<std::string> runs;
    std::string format = "csv";
    std::string out;
    int n_min = 3;
    int n_max = 9;
    std::string panel; // empty = no panel filter
    bool include_outliers = false;
    bool include_truncated = false;
};

int cmd_report(const ReportArgs& args) {
    cwa::AggregateOptions options;
    options.n_min = args.n_min;
    options.n_max = args.n_max;
    options.exclude_outliers_in_mae = !args.include_outliers;
    options.include_truncated = args.include_truncated;
    if (!args.panel.empty()) {
        options.panel = cwa::parse_match_mode(args.panel);
    }
    const cwa::Aggregates aggregates = cwa::aggregate(args.runs, options);
    if (args.format == "csv") {
        cwa::emit_csv(aggregates, args.out);
    } else {
        cwa::emit_svg(aggregates, args.out);
    }
    std::cout << "report written to " << args.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"length-constrained generation analysis toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    MakeModelArgs make_args;
    CLI::App* make = app.add_subcommand("make-model", "create a deterministic reference model");
    make->set_version_flag("--version", kVersion);
    make->add_option("--seed", make_args.seed, "PRNG seed");
    make->add_option("--layers", make_args.layers, "transformer layers")->check(CLI::PositiveNumber);
    make->add_option("--heads", make_args.heads, "attention heads per layer")->check(CLI::PositiveNumber);
    make->add_option("--dmodel", make_args.dmodel, "residual width")->check(CLI::PositiveNumber);
    make->add_option("--dff", make_args.dff, "feed-forward width")->check(CLI::PositiveNumber);
    make->add_option("--max-seq", make_args.max_seq, "maximum context length")->check(CLI::PositiveNumber);
    make->add_option("--eps", make_args.eps, "norm epsilon");
    make->add_option("--vocab-extra", make_args.vocab_extra,
                     "hex-escaped vocabulary file replacing the built-in subwords");
    make->add_option("--out", make_args.out, "output model path")->required();

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "run a generation experiment");
    run->set_version_flag("--version", kVersion);
    run->add_option("--model", run_args.model, "model file")->required();
    run->add_option("--experiment", run_args.experiment, "ENG-IT, ENG-BASE, ITA-IT or ITA-BASE")
        ->check(CLI::IsMember({"ENG-IT", "ENG-BASE", "ITA-IT", "ITA-BASE"}));
    run->add_option("--templates", run_args.templates, "template sets: it, base, both or default")
        ->check(CLI::IsMember({"it", "base", "both", "default"}));
    run->add_option("--match-mode", run_args.match_mode, "matched, mismatched or mixed")
        ->check(CLI::IsMember({"matched", "mismatched", "mixed"}));
    run->add_option("--n-min", run_args.n_min, "smallest target word count");
    run->add_option("--n-max", run_args.n_max, "largest target word count");
    run->add_option("--reps", run_args.reps, "repetitions per prompt")->check(CLI::PositiveNumber);
    run->add_option("--decode", run_args.decode, "greedy or top-p")
        ->check(CLI::IsMember({"greedy", "top-p"}));
    run->add_option("--temperature", run_args.temperature, "sampling temperature");
    run->add_option("--top-p", run_args.top_p, "nucleus mass");
    run->add_option("--max-new-tokens", run_args.max_new_tokens, "generation cap")
        ->check(CLI::PositiveNumber);
    run->add_option("--seed", run_args.seed, "master seed");
    run->add_option("--out", run_args.out, "run directory")->required();

    std::string ingest_transcripts_path, ingest_out;
    CLI::App* ingest = app.add_subcommand("ingest", "score an external transcript file");
    ingest->set_version_flag("--version", kVersion);
    ingest->add_option("--transcripts", ingest_transcripts_path, "JSON-lines transcript file")
        ->required();
    ingest->add_option("--out", ingest_out, "output directory")->required();

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "aggregate run directories into reports");
    report->set_version_flag("--version", kVersion);
    report->add_option("--runs", report_args.runs, "run directories")->required()->expected(-1);
    report->add_option("--format", report_args.format, "csv or svg")
        ->check(CLI::IsMember({"csv", "svg"}));
    report->add_option("--out", report_args.out, "output directory")->required();
    report->add_option("--n-min", report_args.n_min, "analysis range lower bound");
    report->add_option("--n-max", report_args.n_max, "analysis range upper bound");
    report->add_option("--panel", report_args.panel, "matched, mismatched or mixed")
        ->check(CLI::IsMember({"matched", "mismatched", "mixed"}));
    report->add_flag("--include-outliers", report_args.include_outliers,
                     "keep outliers in the MAE table");
    report->add_flag("--include-truncated", report_args.include_truncated,
                     "count truncated generations in error metrics");

    CLI::App* selftest = app.add_subcommand("selftest", "run the invariant suites");
    selftest->set_version_flag("--version", kVersion);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (make->parsed()) {
            return cmd_make_model(make_args);
        }
        if (run->parsed()) {
            return cmd_run(run_args);
        }
        if (ingest->parsed()) {
            return cmd_ingest(ingest_transcripts_path, ingest_out);
        }
        if (report->parsed()) {
            return cmd_report(report_args);
        }
        if (selftest->parsed()) {
            return cwa::run_selftest(std::cout) == 0 ? 0 : 1;
        }
    } catch (const cwa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
