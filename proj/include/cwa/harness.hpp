#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cwa/attribution.hpp"
#include "cwa/judge.hpp"
#include "cwa/model.hpp"
#include "cwa/model_io.hpp"

namespace cwa {

enum class TemplateSet { ItStyle, BaseStyle };
enum class PromptStyle { Instructional, Prefix };
enum class Language { English, Italian };
enum class ModelVariant { InstructionTuned, Base };
enum class MatchMode { Matched, Mismatched, Mixed };

std::string to_string(TemplateSet set);
std::string to_string(PromptStyle style);
std::string to_string(Language lang);
std::string to_string(MatchMode mode);
TemplateSet parse_template_set(const std::string& name);   // "it_style" | "base_style"
MatchMode parse_match_mode(const std::string& name);       // "matched" | "mismatched" | "mixed"

// A prompt template with a single {N} placeholder.
struct PromptTemplate {
    std::string id;          // "a".."d" for the built-ins
    TemplateSet set = TemplateSet::ItStyle;
    Language language = Language::English;
    PromptStyle style = PromptStyle::Instructional;
    std::string text;        // contains exactly one "{N}"
    bool builtin = true;
};

// The sixteen built-in templates: four ids, two sets, two languages. In
// each set, ids a-c carry the set's native style and id d is the
// cross-condition entry with the opposite style.
const std::vector<PromptTemplate>& builtin_templates();

// Replaces the {N} placeholder. Throws DomainError unless the template
// contains exactly one placeholder.
std::string render_template(const PromptTemplate& tmpl, int n);

// "ENG-IT", "ENG-BASE", "ITA-IT", "ITA-BASE".
struct ExperimentTag {
    Language language = Language::English;
    ModelVariant variant = ModelVariant::InstructionTuned;
};

ExperimentTag parse_experiment_tag(const std::string& tag);
std::string to_string(const ExperimentTag& tag);

// Whether a template's style agrees with the model variant it is shown
// to: instructional prompts match instruction-tuned models, prefix
// prompts match base models.
bool template_matches_variant(const PromptTemplate& tmpl, ModelVariant variant);

// Template filter implementing the three panel definitions: matched
// keeps style-agreeing templates, mismatched the rest, and mixed keeps
// matched templates for base models but mismatched ones for
// instruction-tuned models.
bool match_mode_includes(const PromptTemplate& tmpl, ModelVariant variant, MatchMode mode);

struct ExperimentConfig {
    std::string experiment = "ENG-IT";
    std::string model_path;
    std::vector<TemplateSet> sets;      // empty = the variant's own set
    MatchMode match_mode = MatchMode::Matched;
    int n_min = 0;                      // prompt construction range
    int n_max = 9;
    int repetitions = 20;
    DecodeParams decode;
    std::uint64_t master_seed = 0;
    std::vector<PromptTemplate> extra_templates; // user-supplied, builtin = false

    ExperimentTag tag() const { return parse_experiment_tag(experiment); }
    std::vector<TemplateSet> effective_sets() const;
};

struct ConcretePrompt {
    PromptTemplate tmpl;
    int n_target = 0;
    std::string text;
};

// Every template in the configured sets and language, instantiated for
// every N in [n_min, n_max], ordered by (set, template id, N). The match
// mode does not reduce this bank; it filters which prompts a run
// executes.
std::vector<ConcretePrompt> build_prompts(const ExperimentConfig& config);

// Per-run seed: a splitmix64 fold of the master seed and the prompt
// coordinates, so any prompt/repetition can be reproduced in isolation.
std::uint64_t derive_run_seed(std::uint64_t master, TemplateSet set, const std::string& tmpl_id,
                              Language lang, int n, int repetition);

struct RunFailure {
    std::string template_id;
    int n_target = 0;
    int repetition = 0;
    std::string message;
};

struct RunSummary {
    std::string out_dir;
    int generations = 0;
    std::vector<RunFailure> failures;
    std::vector<CwaReport> cwa_reports;
    std::vector<int> errors;            // n_gen - n_target per non-truncated generation
};

// Runs every selected prompt x repetition: generate, judge, per-step DLA,
// CWA; writes config.json, records.jsonl, verdicts.jsonl, cwa.jsonl and
// metrics.csv into out_dir. Per-prompt capacity errors are collected in
// the summary instead of aborting the run. Identical config and master
// seed produce byte-identical artifacts.
RunSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir);
RunSummary run_experiment(const ExperimentConfig& config, const LoadedModel& model,
                          const std::string& out_dir);

// One transcript row: a generation produced by some external model, to
// be scored without attribution.
struct TranscriptRow {
    std::string experiment;
    std::string template_id;
    std::string language;
    int n_target = 0;
    int repetition = 0;
    std::string text;
    std::vector<int> token_ids; // optional; carried through, not scored
};

struct IngestedRow {
    TranscriptRow row;
    std::size_t n_gen = 0;
    int error = 0;
    OutcomeClass outcome = OutcomeClass::Success;
};

struct IngestResult {
    std::string out_dir;
    std::vector<IngestedRow> rows;
    std::vector<std::pair<std::size_t, std::string>> skipped; // line number, reason
    ErrorStats stats;                                         // over all ingested errors

    bool clean() const { return skipped.empty(); }
};

// Reads a JSON-lines transcript file, counts words, scores every row and
// writes a metrics-only run directory (config.json + metrics.csv, no
// attribution artifacts). Malformed lines are skipped and reported with
// their line numbers. Throws DomainError when no valid rows remain.
IngestResult ingest_transcripts(const std::string& path, const std::string& out_dir);

} // namespace cwa
