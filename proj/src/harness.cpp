#include "cwa/harness.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cwa/errors.hpp"
#include "cwa/rng.hpp"
#include "cwa/textio.hpp"
#include "cwa/wordcount.hpp"

using json = nlohmann::ordered_json;

namespace cwa {

std::string to_string(TemplateSet set) {
    return set == TemplateSet::ItStyle ? "it_style" : "base_style";
}

std::string to_string(PromptStyle style) {
    return style == PromptStyle::Instructional ? "instructional" : "prefix";
}

std::string to_string(Language lang) {
    return lang == Language::English ? "en" : "it";
}

std::string to_string(MatchMode mode) {
    switch (mode) {
    case MatchMode::Matched: return "matched";
    case MatchMode::Mismatched: return "mismatched";
    case MatchMode::Mixed: return "mixed";
    }
    return "?";
}

TemplateSet parse_template_set(const std::string& name) {
    if (name == "it_style") return TemplateSet::ItStyle;
    if (name == "base_style") return TemplateSet::BaseStyle;
    throw DomainError("unknown template set: " + name);
}

MatchMode parse_match_mode(const std::string& name) {
    if (name == "matched") return MatchMode::Matched;
    if (name == "mismatched") return MatchMode::Mismatched;
    if (name == "mixed") return MatchMode::Mixed;
    throw DomainError("unknown match mode: " + name);
}

const std::vector<PromptTemplate>& builtin_templates() {
    using TS = TemplateSet;
    using PS = PromptStyle;
    using L = Language;
    static const std::vector<PromptTemplate> templates = {
        {"a", TS::ItStyle, L::English, PS::Instructional,
         "Generate a sentence using exactly {N} words.", true},
        {"b", TS::ItStyle, L::English, PS::Instructional,
         "Write a text with exactly {N} words.", true},
        {"c", TS::ItStyle, L::English, PS::Instructional,
         "Write a sentence containing {N} words.", true},
        {"d", TS::ItStyle, L::English, PS::Prefix,
         "This is a sentence with {N} words:", true},
        {"a", TS::ItStyle, L::Italian, PS::Instructional,
         "Genera una frase usando esattamente {N} parole.", true},
        {"b", TS::ItStyle, L::Italian, PS::Instructional,
         "Scrivi un testo con esattamente {N} parole.", true},
        {"c", TS::ItStyle, L::Italian, PS::Instructional,
         "Scrivi una frase contenente {N} parole.", true},
        {"d", TS::ItStyle, L::Italian, PS::Prefix,
         "Questa \xc3\xa8 una frase con {N} parole:", true},
        {"a", TS::BaseStyle, L::English, PS::Prefix,
         "This is a sentence with {N} words:", true},
        {"b", TS::BaseStyle, L::English, PS::Prefix,
         "This phrase has exactly {N} words from start to finish:", true},
        {"c", TS::BaseStyle, L::English, PS::Prefix,
         "Here's a phrase that includes {N} words in total:", true},
        {"d", TS::BaseStyle, L::English, PS::Instructional,
         "Generate a sentence using exactly {N} words.", true},
        {"a", TS::BaseStyle, L::Italian, PS::Prefix,
         "Questa \xc3\xa8 una frase con {N} parole:", true},
        {"b", TS::BaseStyle, L::Italian, PS::Prefix,
         "Questa frase ha esattamente {N} parole dall'inizio alla fine:", true},
        {"c", TS::BaseStyle, L::Italian, PS::Prefix,
         "Ecco una frase che include in totale {N} parole:", true},
        {"d", TS::BaseStyle, L::Italian, PS::Instructional,
         "Genera una frase usando esattamente {N} parole.", true},
    };
    return templates;
}

std::string render_template(const PromptTemplate& tmpl, int n) {
    const std::string placeholder = "{N}";
    const std::size_t first = tmpl.text.find(placeholder);
    if (first == std::string::npos ||
        tmpl.text.find(placeholder, first + 1) != std::string::npos) {
        throw DomainError("template '" + tmpl.id + "' must contain exactly one {N} placeholder");
    }
    std::string out = tmpl.text;
    out.replace(first, placeholder.size(), std::to_string(n));
    return out;
}

ExperimentTag parse_experiment_tag(const std::string& tag) {
    ExperimentTag t;
    if (tag == "ENG-IT") {
        t = {Language::English, ModelVariant::InstructionTuned};
    } else if (tag == "ENG-BASE") {
        t = {Language::English, ModelVariant::Base};
    } else if (tag == "ITA-IT") {
        t = {Language::Italian, ModelVariant::InstructionTuned};
    } else if (tag == "ITA-BASE") {
        t = {Language::Italian, ModelVariant::Base};
    } else {
        throw DomainError("unknown experiment tag: " + tag +
                          " (expected ENG-IT, ENG-BASE, ITA-IT or ITA-BASE)");
    }
    return t;
}

std::string to_string(const ExperimentTag& tag) {
    const std::string lang = tag.language == Language::English ? "ENG" : "ITA";
    const std::string variant = tag.variant == ModelVariant::InstructionTuned ? "IT" : "BASE";
    return lang + "-" + variant;
}

bool template_matches_variant(const PromptTemplate& tmpl, ModelVariant variant) {
    return (variant == ModelVariant::InstructionTuned) ==
           (tmpl.style == PromptStyle::Instructional);
}

bool match_mode_includes(const PromptTemplate& tmpl, ModelVariant variant, MatchMode mode) {
    const bool matched = template_matches_variant(tmpl, variant);
    switch (mode) {
    case MatchMode::Matched: return matched;
    case MatchMode::Mismatched: return !matched;
    case MatchMode::Mixed: return variant == ModelVariant::Base ? matched : !matched;
    }
    return false;
}

std::vector<TemplateSet> ExperimentConfig::effective_sets() const {
    if (!sets.empty()) {
        return sets;
    }
    return {tag().variant == ModelVariant::InstructionTuned ? TemplateSet::ItStyle
                                                            : TemplateSet::BaseStyle};
}

std::vector<ConcretePrompt> build_prompts(const ExperimentConfig& config) {
    if (config.n_min > config.n_max) {
        throw DomainError("empty N range");
    }
    const ExperimentTag tag = config.tag();
    std::vector<PromptTemplate> selected;
    for (TemplateSet set : config.effective_sets()) {
        for (const PromptTemplate& t : builtin_templates()) {
            if (t.set == set && t.language == tag.language) {
                selected.push_back(t);
            }
        }
        for (const PromptTemplate& t : config.extra_templates) {
            if (t.set == set && t.language == tag.language) {
                selected.push_back(t);
            }
        }
    }
    std::vector<ConcretePrompt> prompts;
    prompts.reserve(selected.size() * static_cast<std::size_t>(config.n_max - config.n_min + 1));
    for (const PromptTemplate& t : selected) {
        for (int n = config.n_min; n <= config.n_max; ++n) {
            prompts.push_back({t, n, render_template(t, n)});
        }
    }
    return prompts;
}

std::uint64_t derive_run_seed(std::uint64_t master, TemplateSet set, const std::string& tmpl_id,
                              Language lang, int n, int repetition) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ static_cast<std::uint64_t>(set));
    for (unsigned char c : tmpl_id) {
        s = splitmix64(s ^ c);
    }
    s = splitmix64(s ^ static_cast<std::uint64_t>(lang));
    s = splitmix64(s ^ static_cast<std::uint64_t>(n));
    s = splitmix64(s ^ static_cast<std::uint64_t>(repetition));
    return s;
}

namespace {

json config_snapshot(const ExperimentConfig& config) {
    json sets = json::array();
    for (TemplateSet s : config.effective_sets()) {
        sets.push_back(to_string(s));
    }
    json j;
    j["experiment"] = config.experiment;
    j["model_path"] = config.model_path;
    j["template_sets"] = sets;
    j["match_mode"] = to_string(config.match_mode);
    j["n_min"] = config.n_min;
    j["n_max"] = config.n_max;
    j["repetitions"] = config.repetitions;
    j["decode"] = {{"mode", to_string(config.decode.mode)},
                   {"temperature", config.decode.temperature},
                   {"top_p", config.decode.top_p},
                   {"max_new_tokens", config.decode.max_new_tokens}};
    j["master_seed"] = config.master_seed;
    return j;
}

json meta_json(const RunMeta& meta) {
    json j;
    j["experiment"] = meta.experiment;
    j["template_set"] = meta.template_set;
    j["template"] = meta.template_id;
    j["language"] = meta.language;
    j["style"] = meta.style;
    j["matched"] = meta.matched;
    j["n_target"] = meta.n_target;
    j["repetition"] = meta.repetition;
    j["seed"] = meta.seed;
    return j;
}

constexpr char kMetricsHeader[] =
    "experiment,template_set,template,language,style,matched,n_target,repetition,seed,"
    "n_gen,error,outcome,k\n";

} // namespace

RunSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    if (config.model_path.empty()) {
        throw DomainError("experiment config has no model path");
    }
    const LoadedModel model = load_model(config.model_path);
    return run_experiment(config, model, out_dir);
}

RunSummary run_experiment(const ExperimentConfig& config, const LoadedModel& model,
                          const std::string& out_dir) {
    if (config.repetitions < 1) {
        throw DomainError("repetitions must be at least 1");
    }
    const ExperimentTag tag = config.tag();
    ensure_directory(out_dir);

    RunSummary summary;
    summary.out_dir = out_dir;

    std::ostringstream records_out;
    std::ostringstream verdicts_out;
    std::ostringstream cwa_out;
    std::ostringstream metrics_out;
    metrics_out << kMetricsHeader;

    for (const ConcretePrompt& prompt : build_prompts(config)) {
        if (!match_mode_includes(prompt.tmpl, tag.variant, config.match_mode)) {
            continue;
        }
        for (int rep = 0; rep < config.repetitions; ++rep) {
            RunMeta meta;
            meta.experiment = config.experiment;
            meta.template_set = to_string(prompt.tmpl.set);
            meta.template_id = prompt.tmpl.id;
            meta.language = to_string(prompt.tmpl.language);
            meta.style = to_string(prompt.tmpl.style);
            meta.matched = template_matches_variant(prompt.tmpl, tag.variant);
            meta.n_target = prompt.n_target;
            meta.repetition = rep;
            meta.seed = derive_run_seed(config.master_seed, prompt.tmpl.set, prompt.tmpl.id,
                                        prompt.tmpl.language, prompt.n_target, rep);

            DecodeParams decode_params = config.decode;
            decode_params.seed = meta.seed;

            try {
                std::vector<int> prompt_ids = {Vocabulary::kBosId};
                const TokenSequence enc = encode(prompt.text, model.vocab);
                prompt_ids.insert(prompt_ids.end(), enc.ids.begin(), enc.ids.end());

                const GenerationRecord rec = generate(prompt_ids, model.weights, model.config,
                                                      decode_params, Vocabulary::kEosId);
                const Judgement judgement =
                    judge_generation(rec, static_cast<std::size_t>(prompt.n_target), model.vocab);

                std::vector<StepDLA> steps;
                steps.reserve(rec.traces.size());
                for (int i = 0; i < rec.step_count(); ++i) {
                    StepDLA d = dla_step(rec.traces[static_cast<std::size_t>(i)],
                                         rec.emitted_ids[static_cast<std::size_t>(i)],
                                         model.weights);
                    d.step = i;
                    steps.push_back(std::move(d));
                }
                CwaReport report = compute_cwa(rec, judgement.signs(), steps);
                report.meta = meta;

                const std::string text = decode(rec.emitted_ids, model.vocab);
                const int n_gen = static_cast<int>(judgement.final_words);
                const int error = n_gen - prompt.n_target;

                json record = meta_json(meta);
                record["prompt_text"] = prompt.text;
                record["prompt_ids"] = rec.prompt_ids;
                record["emitted_ids"] = rec.emitted_ids;
                record["text"] = text;
                record["outcome"] = to_string(judgement.outcome);
                record["n_gen"] = n_gen;
                record["k"] = rec.step_count();
                // Toy models emit raw byte tokens, so the decoded text can
                // be malformed UTF-8; emitted_ids stay lossless.
                records_out << record.dump(-1, ' ', false, json::error_handler_t::replace)
                            << "\n";

                json verdicts = meta_json(meta);
                json steps_json = json::array();
                for (const StepVerdict& v : judgement.verdicts) {
                    steps_json.push_back({{"step", v.step},
                                          {"words", v.words},
                                          {"is_eos", v.is_eos},
                                          {"sign", v.sign}});
                }
                verdicts["steps"] = steps_json;
                verdicts_out << verdicts.dump() << "\n";

                json cwa_row = meta_json(meta);
                cwa_row["k"] = report.k;
                cwa_row["signs"] = report.signs;
                cwa_row["embedding"] = report.embedding;
                cwa_row["attn_layer"] = report.attn_layer;
                cwa_row["attn_head"] = report.attn_head;
                cwa_row["mlp"] = report.mlp;
                cwa_out << cwa_row.dump() << "\n";

                metrics_out << meta.experiment << ',' << meta.template_set << ','
                            << meta.template_id << ',' << meta.language << ',' << meta.style << ','
                            << (meta.matched ? 1 : 0) << ',' << meta.n_target << ','
                            << meta.repetition << ',' << meta.seed << ',' << n_gen << ',' << error
                            << ',' << to_string(judgement.outcome) << ',' << rec.step_count()
                            << "\n";

                summary.generations += 1;
                if (judgement.outcome != OutcomeClass::Truncated) {
                    summary.errors.push_back(error);
                }
                summary.cwa_reports.push_back(std::move(report));
            } catch (const Error& e) {
                summary.failures.push_back({prompt.tmpl.id, prompt.n_target, rep, e.what()});
            }
        }
    }

    write_text_file(out_dir + "/config.json", config_snapshot(config).dump(2) + "\n");
    write_text_file(out_dir + "/records.jsonl", records_out.str());
    write_text_file(out_dir + "/verdicts.jsonl", verdicts_out.str());
    write_text_file(out_dir + "/cwa.jsonl", cwa_out.str());
    write_text_file(out_dir + "/metrics.csv", metrics_out.str());
    if (!summary.failures.empty()) {
        std::ostringstream failures_out;
        for (const RunFailure& f : summary.failures) {
            json j;
            j["template"] = f.template_id;
            j["n_target"] = f.n_target;
            j["repetition"] = f.repetition;
            j["message"] = f.message;
            failures_out << j.dump() << "\n";
        }
        write_text_file(out_dir + "/failures.jsonl", failures_out.str());
    }
    return summary;
}

IngestResult ingest_transcripts(const std::string& path, const std::string& out_dir) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open transcript file: " + path);
    }
    ensure_directory(out_dir);

    IngestResult result;
    result.out_dir = out_dir;

    std::ostringstream metrics_out;
    metrics_out << kMetricsHeader;

    std::string line;
    std::size_t line_no = 0;
    std::vector<int> errors;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        TranscriptRow row;
        try {
            const json j = json::parse(line);
            row.experiment = j.at("experiment").get<std::string>();
            row.template_id = j.at("template").get<std::string>();
            row.language = j.at("language").get<std::string>();
            row.n_target = j.at("n_target").get<int>();
            row.repetition = j.value("repetition", 0);
            row.text = j.at("text").get<std::string>();
            if (j.contains("token_ids")) {
                row.token_ids = j.at("token_ids").get<std::vector<int>>();
            }
            if (row.n_target < 0) {
                throw DomainError("negative n_target");
            }
        } catch (const std::exception& e) {
            result.skipped.emplace_back(line_no, e.what());
            continue;
        }

        IngestedRow scored;
        scored.row = row;
        scored.n_gen = count_words(row.text);
        scored.error = static_cast<int>(scored.n_gen) - row.n_target;
        // External transcripts end where the text ends, so the final
        // count alone classifies the outcome.
        if (scored.error == 0) {
            scored.outcome = OutcomeClass::Success;
        } else if (scored.error < 0) {
            scored.outcome = OutcomeClass::TooShort;
        } else {
            scored.outcome = OutcomeClass::TooLong;
        }
        errors.push_back(scored.error);

        // template_set, style, matched, seed and k stay empty: transcripts
        // do not carry them.
        metrics_out << row.experiment << ",," << row.template_id << ',' << row.language << ",,,"
                    << row.n_target << ',' << row.repetition << ",," << scored.n_gen << ','
                    << scored.error << ',' << to_string(scored.outcome) << ",\n";
        result.rows.push_back(std::move(scored));
    }
    if (result.rows.empty()) {
        throw DomainError("transcript file contains no valid rows: " + path);
    }
    result.stats = descriptive_stats(errors);

    json cfg;
    cfg["source"] = path;
    cfg["kind"] = "transcript_ingest";
    write_text_file(out_dir + "/config.json", cfg.dump(2) + "\n");
    write_text_file(out_dir + "/metrics.csv", metrics_out.str());
    return result;
}

} // namespace cwa
