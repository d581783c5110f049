#include "commands.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aor/audit.hpp"
#include "aor/baselines.hpp"
#include "aor/client.hpp"
#include "aor/core.hpp"
#include "aor/data.hpp"
#include "aor/engine.hpp"
#include "aor/errors.hpp"
#include "aor/extraction.hpp"
#include "aor/judge.hpp"
#include "aor/report.hpp"

namespace aor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ============================================================================
// Settings and manifest
// ============================================================================

struct RunSettings {
    std::string method = "aor";
    std::string dataset;
    std::string dataset_format = "generic_jsonl";
    std::string exemplars; // path; empty -> built-in placeholder set
    std::string model = "gpt-3.5-turbo";
    std::string endpoint = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string judge = "live"; // live | scripted
    std::string script;         // scripted judge/sampler file
    std::string cache_dir;
    std::string out_dir = "runs/out";
    std::string tag = "default";
    int parallel = 4;
    double cc_fraction = 0.5;
    AoRConfig config;
};

json settings_to_manifest(const RunSettings& s) {
    json config{{"n_initial", s.config.n_initial},
                {"n_max", s.config.n_max},
                {"k", s.config.k},
                {"epsilon", s.config.epsilon},
                {"theta", s.config.theta},
                {"d", s.config.d},
                {"b", s.config.b},
                {"temperature", s.config.temperature ? json(*s.config.temperature)
                                                     : json(nullptr)},
                {"max_tokens_chain", s.config.max_tokens_chain},
                {"max_tokens_judge", s.config.max_tokens_judge},
                {"price_in", s.config.price_in},
                {"price_out", s.config.price_out},
                {"max_rounds_guard", s.config.max_rounds_guard},
                {"new_chain_gate",
                 s.config.new_chain_gate == AoRConfig::NewChainGate::epsilon_threshold
                     ? "epsilon"
                     : "theta"}};
    return json{{"manifest_version", 1},
                {"method", s.method},
                {"dataset", s.dataset},
                {"dataset_format", s.dataset_format},
                {"exemplars", s.exemplars},
                {"model", s.model},
                {"endpoint", s.endpoint},
                {"api_key_env", s.api_key_env},
                {"judge", s.judge},
                {"script", s.script},
                {"cache_dir", s.cache_dir},
                {"out_dir", s.out_dir},
                {"tag", s.tag},
                {"parallel", s.parallel},
                {"cc_fraction", s.cc_fraction},
                {"config", std::move(config)}};
}

RunSettings settings_from_manifest(const json& j) {
    RunSettings s;
    s.method = j.value("method", s.method);
    s.dataset = j.value("dataset", s.dataset);
    s.dataset_format = j.value("dataset_format", s.dataset_format);
    s.exemplars = j.value("exemplars", s.exemplars);
    s.model = j.value("model", s.model);
    s.endpoint = j.value("endpoint", s.endpoint);
    s.api_key_env = j.value("api_key_env", s.api_key_env);
    s.judge = j.value("judge", s.judge);
    s.script = j.value("script", s.script);
    s.cache_dir = j.value("cache_dir", s.cache_dir);
    s.out_dir = j.value("out_dir", s.out_dir);
    s.tag = j.value("tag", s.tag);
    s.parallel = j.value("parallel", s.parallel);
    s.cc_fraction = j.value("cc_fraction", s.cc_fraction);
    if (j.contains("config")) {
        const json& c = j["config"];
        s.config.n_initial = c.value("n_initial", s.config.n_initial);
        s.config.n_max = c.value("n_max", s.config.n_max);
        s.config.k = c.value("k", s.config.k);
        s.config.epsilon = c.value("epsilon", s.config.epsilon);
        s.config.theta = c.value("theta", s.config.theta);
        s.config.d = c.value("d", s.config.d);
        s.config.b = c.value("b", s.config.b);
        if (c.contains("temperature") && !c["temperature"].is_null()) {
            s.config.temperature = c["temperature"].get<double>();
        }
        s.config.max_tokens_chain = c.value("max_tokens_chain", s.config.max_tokens_chain);
        s.config.max_tokens_judge = c.value("max_tokens_judge", s.config.max_tokens_judge);
        s.config.price_in = c.value("price_in", s.config.price_in);
        s.config.price_out = c.value("price_out", s.config.price_out);
        s.config.max_rounds_guard = c.value("max_rounds_guard", s.config.max_rounds_guard);
        if (c.value("new_chain_gate", "epsilon") == std::string("theta")) {
            s.config.new_chain_gate = AoRConfig::NewChainGate::theta_threshold;
        }
    }
    return s;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

ExemplarSet builtin_exemplars() {
    return ExemplarSet(
        "builtin",
        {{"What is 3 plus 4?", "Starting from 3 and counting up 4 gives 7.", "7"},
         {"A box holds 10 pens and 2 are removed. How many remain?",
          "Removing 2 from 10 leaves 10 - 2 = 8.", "8"}});
}

// ============================================================================
// Per-question evaluation
// ============================================================================

struct QuestionOutcome {
    RunSummary summary;
    std::vector<AuditRecord> audit;
    bool errored = false;
};

void fill_correctness(RunSummary& summary, const Question& q) {
    if (q.gold_answer && summary.final_answer) {
        summary.correct =
            answers_equal(CanonicalAnswer{q.task_kind, *summary.final_answer},
                          CanonicalAnswer{q.task_kind, *q.gold_answer});
    }
}

QuestionOutcome evaluate_question(const Question& q, const RunSettings& s,
                                  CompletionClient& sampler, JudgeInterface& judge,
                                  const ExemplarSet& exemplars) {
    QuestionOutcome outcome;
    RunSummary& summary = outcome.summary;
    summary.question_id = q.id;
    summary.method = s.method;
    summary.task_kind = to_string(q.task_kind);
    summary.gold_answer = q.gold_answer;

    if (s.method == "aor") {
        AoRResult result = run_aor(q, sampler, judge, s.config, exemplars);
        if (result.final_answer) summary.final_answer = result.final_answer->value;
        summary.chains_used = result.total_chains;
        summary.rounds = result.rounds;
        summary.termination = to_string(result.termination);
        summary.usage = result.usage;
        outcome.audit = std::move(result.audit);
        fill_correctness(summary, q);
        return outcome;
    }

    // Baselines share the sampling path.
    const int count = s.method == "cot" ? 1 : s.config.n_initial;
    SamplingParams params;
    params.temperature =
        s.config.temperature.value_or(default_temperature(sampler.model_name()));
    params.max_tokens = s.config.max_tokens_chain;
    params.sample_tag = 1;
    const std::string prompt = build_cot_prompt(exemplars, q);
    auto completions = sample_chains(sampler, prompt, count, params);
    auto chains = make_chains(completions, q.task_kind, 1, 0);

    AuditTrail audit;
    AuditRecord record;
    record.question_id = q.id;
    record.kind = "sample_batch";
    for (const auto& chain : chains) {
        record.items.push_back(AuditItem{chain.index, chain.extracted_answer});
        record.usage += chain.usage;
        summary.usage += chain.usage;
    }
    audit.emit(std::move(record));
    summary.chains_used = static_cast<int>(chains.size());

    try {
        if (s.method == "cot") {
            summary.final_answer = greedy_answer(chains.front(), q.task_kind).value;
            summary.termination = "greedy";
        } else if (s.method == "sc") {
            summary.final_answer = self_consistency(chains, q.task_kind).winner.value;
            summary.termination = "vote";
        } else if (s.method == "cc") {
            summary.final_answer =
                complexity_consistency(chains, q.task_kind, s.cc_fraction).winner.value;
            summary.termination = "vote";
        } else {
            throw std::invalid_argument("unknown method: " + s.method);
        }
    } catch (const AbstainError&) {
        summary.termination = "abstain";
    }
    fill_correctness(summary, q);
    outcome.audit = audit.take();
    return outcome;
}

// ============================================================================
// Run command
// ============================================================================

struct RunResult {
    int exit_code = 1;
    Aggregates aggregates;
};

RunResult execute_run(const RunSettings& settings) {
    RunSettings s = settings;
    s.config = validate_config(s.config);
    if (s.parallel < 1) s.parallel = 1;
    if (s.dataset.empty()) throw std::runtime_error("--dataset is required");
    if (s.judge == "scripted" && s.script.empty()) {
        throw std::runtime_error("--judge scripted requires --script");
    }
    if (s.judge != "scripted" && s.judge != "live") {
        throw std::runtime_error("--judge must be 'live' or 'scripted'");
    }

    const auto questions =
        load_dataset(s.dataset, dataset_format_from_string(s.dataset_format));
    const ExemplarSet exemplars =
        s.exemplars.empty() ? builtin_exemplars() : ExemplarSet::load(s.exemplars);

    fs::create_directories(s.out_dir);
    {
        // Reproducibility header: written before any model call.
        std::ofstream manifest(fs::path(s.out_dir) / "manifest.json");
        manifest << settings_to_manifest(s).dump(2) << "\n";
        if (!manifest) throw std::runtime_error("cannot write manifest to " + s.out_dir);
    }

    // Shared, concurrency-safe resources.
    std::optional<ScriptFile> script;
    std::unique_ptr<HttpCompletionClient> http_client;
    std::unique_ptr<JudgeInterface> judge;
    if (s.judge == "scripted") {
        script = ScriptFile::load(s.script);
        judge = std::make_unique<ScriptedJudge>(script->scores, script->default_score);
    } else {
        ModelEndpoint endpoint;
        endpoint.base_url = s.endpoint;
        endpoint.model_name = s.model;
        if (const char* key = std::getenv(s.api_key_env.c_str())) {
            endpoint.api_key = key;
        }
        std::optional<fs::path> cache;
        if (!s.cache_dir.empty()) cache = fs::path(s.cache_dir);
        http_client = std::make_unique<HttpCompletionClient>(endpoint, cache);
        judge = std::make_unique<LlmJudge>(*http_client, 0.0, s.config.max_tokens_judge);
    }

    auto sampler_for = [&](const Question& q) -> std::unique_ptr<CompletionClient> {
        if (!script) return nullptr; // shared http client is used instead
        auto it = script->completions.find(q.id);
        if (it == script->completions.end() || it->second.empty()) {
            throw std::runtime_error("script has no completions for question " + q.id);
        }
        return std::make_unique<ScriptedClient>(it->second);
    };

    std::vector<QuestionOutcome> outcomes(questions.size());
    std::vector<std::string> errors(questions.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= questions.size()) return;
            try {
                auto local_sampler = sampler_for(questions[i]);
                CompletionClient& sampler =
                    local_sampler ? *local_sampler : *http_client;
                outcomes[i] =
                    evaluate_question(questions[i], s, sampler, *judge, exemplars);
            } catch (const std::exception& e) {
                outcomes[i].errored = true;
                outcomes[i].summary.question_id = questions[i].id;
                outcomes[i].summary.method = s.method;
                outcomes[i].summary.task_kind = to_string(questions[i].task_kind);
                outcomes[i].summary.gold_answer = questions[i].gold_answer;
                outcomes[i].summary.termination = "error";
                errors[i] = e.what();
            }
        }
    };

    const int thread_count =
        std::min<std::size_t>(s.parallel, std::max<std::size_t>(questions.size(), 1));
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // Single writer, question order: deterministic files.
    std::vector<RunSummary> summaries;
    summaries.reserve(outcomes.size());
    for (const auto& o : outcomes) summaries.push_back(o.summary);

    const Money price_in = Money::from_decimal_string(s.config.price_in);
    const Money price_out = Money::from_decimal_string(s.config.price_out);

    {
        std::ofstream out(fs::path(s.out_dir) / "results.jsonl");
        emit_results(summaries, price_in, price_out, ResultFormat::jsonl, out);
    }
    {
        std::ofstream out(fs::path(s.out_dir) / "results.csv");
        emit_results(summaries, price_in, price_out, ResultFormat::csv, out);
    }
    {
        std::ofstream out(fs::path(s.out_dir) / "audit.jsonl");
        for (const auto& o : outcomes) {
            for (const auto& record : o.audit) out << to_json(record).dump() << "\n";
        }
    }
    emit_results(summaries, price_in, price_out, ResultFormat::table, std::cout);

    bool partial = false;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].errored) {
            partial = true;
            std::cerr << "question " << questions[i].id << " failed: " << errors[i]
                      << "\n";
        }
    }

    RunResult result;
    result.aggregates = aggregate(summaries, price_in, price_out);
    result.exit_code = partial ? 2 : 0;
    return result;
}

// ============================================================================
// Analyze command
// ============================================================================

struct LoadedRun {
    fs::path dir;
    RunSettings settings;
    std::vector<RunSummary> summaries;
    std::map<std::string, std::vector<std::optional<std::string>>> chain_answers;
};

RunSummary summary_from_json(const json& j) {
    RunSummary s;
    s.question_id = j.value("question_id", std::string());
    s.method = j.value("method", std::string());
    s.task_kind = j.value("task_kind", std::string("numeric"));
    if (j.contains("final_answer") && !j["final_answer"].is_null()) {
        s.final_answer = j["final_answer"].get<std::string>();
    }
    if (j.contains("gold_answer") && !j["gold_answer"].is_null()) {
        s.gold_answer = j["gold_answer"].get<std::string>();
    }
    s.correct = j.value("correct", false);
    s.chains_used = j.value("chains", 0);
    s.rounds = j.value("rounds", 0);
    s.termination = j.value("termination", std::string());
    s.usage.input_tokens = j.value("input_tokens", static_cast<std::int64_t>(0));
    s.usage.output_tokens = j.value("output_tokens", static_cast<std::int64_t>(0));
    return s;
}

LoadedRun load_run(const fs::path& dir) {
    LoadedRun run;
    run.dir = dir;
    run.settings = settings_from_manifest(load_json_file(dir / "manifest.json"));

    std::ifstream results(dir / "results.jsonl");
    if (!results) {
        throw std::runtime_error("missing results.jsonl under " + dir.string());
    }
    std::string line;
    while (std::getline(results, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.value("record", "") == "aggregate") continue;
        run.summaries.push_back(summary_from_json(j));
    }

    std::ifstream audit(dir / "audit.jsonl");
    if (audit) {
        while (std::getline(audit, line)) {
            if (line.empty()) continue;
            AuditRecord record = audit_record_from_json(json::parse(line));
            if (record.kind != "sample_batch") continue;
            auto& answers = run.chain_answers[record.question_id];
            for (const auto& item : record.items) answers.push_back(item.answer);
        }
    }
    return run;
}

std::string render_double(double value) {
    std::ostringstream out;
    out << value;
    return out.str();
}

void print_analysis(const LoadedRun& run, std::ostream& out) {
    const Money price_in = Money::from_decimal_string(run.settings.config.price_in);
    const Money price_out = Money::from_decimal_string(run.settings.config.price_out);
    Aggregates agg = aggregate(run.summaries, price_in, price_out);

    out << "== run " << run.dir.string() << " ==\n";
    out << "method " << run.settings.method << ", questions " << agg.questions
        << ", correct " << agg.correct << ", accuracy " << render_double(agg.accuracy)
        << "\n";
    out << "tokens in " << agg.usage.input_tokens << ", out "
        << agg.usage.output_tokens << ", total cost " << agg.total_cost.to_string()
        << "\n";
    out << "mean chains per question " << render_double(agg.mean_chains) << "\n";

    std::map<int, int> histogram;
    for (const auto& s : run.summaries) ++histogram[s.chains_used];
    out << "chains histogram:\n";
    for (const auto& [chains, count] : histogram) {
        out << "  " << chains << " chains: " << count << " question"
            << (count == 1 ? "" : "s") << "\n";
    }

    std::vector<QuestionChainRecord> records;
    for (const auto& s : run.summaries) {
        if (!s.gold_answer) continue;
        QuestionChainRecord record;
        record.kind = task_kind_from_string(s.task_kind);
        record.gold_answer = *s.gold_answer;
        record.final_answer = s.final_answer;
        auto it = run.chain_answers.find(s.question_id);
        if (it != run.chain_answers.end()) record.chain_answers = it->second;
        records.push_back(std::move(record));
    }
    PotentialCorrect pc = potential_correct_analysis(records);
    out << "potential-correct: wrong " << pc.wrong_questions
        << ", wrong-with-correct-chain " << pc.wrong_with_correct_chain
        << ", proportion " << render_double(pc.proportion)
        << (pc.empty_denominator ? " (empty denominator)" : "") << "\n";
}

void write_analysis_csv(const LoadedRun& run, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const Money price_in = Money::from_decimal_string(run.settings.config.price_in);
    const Money price_out = Money::from_decimal_string(run.settings.config.price_out);
    Aggregates agg = aggregate(run.summaries, price_in, price_out);
    {
        std::ofstream out(out_dir / "analysis_summary.csv");
        out << "method,questions,correct,accuracy,mean_chains,input_tokens,"
               "output_tokens,total_cost\n";
        out << run.settings.method << ',' << agg.questions << ',' << agg.correct << ','
            << render_double(agg.accuracy) << ',' << render_double(agg.mean_chains)
            << ',' << agg.usage.input_tokens << ',' << agg.usage.output_tokens << ','
            << agg.total_cost.to_string() << "\n";
    }
    {
        std::map<int, int> histogram;
        for (const auto& s : run.summaries) ++histogram[s.chains_used];
        std::ofstream out(out_dir / "analysis_chains.csv");
        out << "chains,questions\n";
        for (const auto& [chains, count] : histogram) {
            out << chains << ',' << count << "\n";
        }
    }
}

int cmd_analyze(const std::vector<std::string>& run_dirs,
                const std::vector<std::string>& compare_dirs,
                const std::string& out_dir) {
    if (!compare_dirs.empty()) {
        if (compare_dirs.size() != 2) {
            throw std::runtime_error("--compare takes exactly two run directories");
        }
        LoadedRun a = load_run(compare_dirs[0]);
        LoadedRun b = load_run(compare_dirs[1]);
        print_analysis(a, std::cout);
        print_analysis(b, std::cout);
        const Money pa_in = Money::from_decimal_string(a.settings.config.price_in);
        const Money pa_out = Money::from_decimal_string(a.settings.config.price_out);
        const Money pb_in = Money::from_decimal_string(b.settings.config.price_in);
        const Money pb_out = Money::from_decimal_string(b.settings.config.price_out);
        Aggregates agg_a = aggregate(a.summaries, pa_in, pa_out);
        Aggregates agg_b = aggregate(b.summaries, pb_in, pb_out);
        std::cout << "== compare " << a.settings.method << " vs " << b.settings.method
                  << " ==\n";
        std::cout << "accuracy: " << render_double(agg_a.accuracy) << " vs "
                  << render_double(agg_b.accuracy) << " (delta "
                  << render_double(agg_b.accuracy - agg_a.accuracy) << ")\n";
        std::cout << "cost: " << agg_a.total_cost.to_string() << " vs "
                  << agg_b.total_cost.to_string() << "\n";
        std::cout << "mean chains: " << render_double(agg_a.mean_chains) << " vs "
                  << render_double(agg_b.mean_chains) << "\n";
        return 0;
    }
    if (run_dirs.empty()) {
        throw std::runtime_error("analyze needs --run <dir> (or --compare a b)");
    }
    for (const auto& dir : run_dirs) {
        LoadedRun run = load_run(dir);
        print_analysis(run, std::cout);
        if (!out_dir.empty()) write_analysis_csv(run, out_dir);
    }
    return 0;
}

// ============================================================================
// Sweep command
// ============================================================================

void apply_sweep_value(RunSettings& s, const std::string& param,
                       const std::string& value) {
    if (param == "k") s.config.k = std::stoi(value);
    else if (param == "epsilon") s.config.epsilon = std::stod(value);
    else if (param == "theta") s.config.theta = std::stod(value);
    else if (param == "b" || param == "batch") s.config.b = std::stoi(value);
    else if (param == "d") s.config.d = std::stoi(value);
    else if (param == "n") s.config.n_initial = std::stoi(value);
    else if (param == "n-max" || param == "n_max") s.config.n_max = std::stoi(value);
    else throw std::runtime_error("unknown sweep parameter: " + param);
}

int cmd_sweep(const RunSettings& base, const std::string& param,
              const std::vector<std::string>& values) {
    if (values.empty()) throw std::runtime_error("sweep needs a non-empty value grid");
    fs::create_directories(base.out_dir);
    std::ofstream combined(fs::path(base.out_dir) / "sweep.csv");
    combined << "param,value,questions,accuracy,mean_chains,input_tokens,"
                "output_tokens,total_cost\n";
    int worst = 0;
    for (const auto& value : values) {
        RunSettings s = base;
        apply_sweep_value(s, param, value);
        s.out_dir =
            (fs::path(base.out_dir) / (param + "=" + value)).string();
        RunResult result = execute_run(s);
        worst = std::max(worst, result.exit_code);
        const Aggregates& agg = result.aggregates;
        combined << param << ',' << value << ',' << agg.questions << ','
                 << render_double(agg.accuracy) << ','
                 << render_double(agg.mean_chains) << ',' << agg.usage.input_tokens
                 << ',' << agg.usage.output_tokens << ','
                 << agg.total_cost.to_string() << "\n";
    }
    return worst;
}

// ============================================================================
// Flag wiring
// ============================================================================

void add_run_flags(CLI::App* app, RunSettings& s, std::string& from_manifest) {
    app->add_option("--from-manifest", from_manifest,
                    "Load settings from a previous run's manifest.json");
    app->add_option("--method", s.method, "cot | sc | cc | aor");
    app->add_option("--dataset", s.dataset, "Dataset file");
    app->add_option("--format", s.dataset_format,
                    "gsm8k_jsonl | aqua_jsonl | bbh_json | generic_jsonl");
    app->add_option("--exemplars", s.exemplars, "Exemplar block-text file");
    app->add_option("--model", s.model, "Model name");
    app->add_option("--endpoint", s.endpoint, "OpenAI-compatible base URL");
    app->add_option("--api-key-env", s.api_key_env,
                    "Environment variable holding the API key");
    app->add_option("--judge", s.judge, "live | scripted");
    app->add_option("--script", s.script, "Scripted judge/sampler JSON file");
    app->add_option("--cache-dir", s.cache_dir, "Completion cache directory");
    app->add_option("--out", s.out_dir, "Run output directory");
    app->add_option("--tag", s.tag, "Free-form run tag recorded in the manifest");
    app->add_option("--parallel", s.parallel, "Concurrent question evaluations");
    app->add_option("--cc-fraction", s.cc_fraction,
                    "Complexity-consistency retained fraction");
    app->add_option("--n", s.config.n_initial, "Initial chains");
    app->add_option("--n-max", s.config.n_max, "Max total chains");
    app->add_option("--k", s.config.k, "Representatives per bucket");
    app->add_option("--epsilon", s.config.epsilon, "Local score threshold");
    app->add_option("--theta", s.config.theta, "Termination margin");
    app->add_option("--d", s.config.d, "Chains added per dynamic round");
    app->add_option("--batch", s.config.b, "Max items per judge call");
    app->add_option("--temperature", [&s](const std::vector<std::string>& v) {
        s.config.temperature = std::stod(v.front());
        return true;
    }, "Sampling temperature (default: per model family)");
    app->add_option("--max-tokens", s.config.max_tokens_chain,
                    "Max tokens per sampled chain");
    app->add_option("--judge-max-tokens", s.config.max_tokens_judge,
                    "Max tokens per judge call");
    app->add_option("--prices", [&s](const std::vector<std::string>& v) {
        const std::string& spec = v.front();
        auto comma = spec.find(',');
        if (comma == std::string::npos) return false;
        s.config.price_in = spec.substr(0, comma);
        s.config.price_out = spec.substr(comma + 1);
        return true;
    }, "Prices per 1K tokens as 'in,out' (e.g. 0.0015,0.002)");
    app->add_option("--gate", [&s](const std::vector<std::string>& v) {
        if (v.front() == "epsilon") {
            s.config.new_chain_gate = AoRConfig::NewChainGate::epsilon_threshold;
        } else if (v.front() == "theta") {
            s.config.new_chain_gate = AoRConfig::NewChainGate::theta_threshold;
        } else {
            return false;
        }
        return true;
    }, "Threshold gating newly sampled chains: epsilon (default) or theta");
}

/// Re-parses argv so explicit flags override manifest-loaded settings.
RunSettings resolve_settings(CLI::App* app, const RunSettings& parsed,
                             const std::string& from_manifest) {
    if (from_manifest.empty()) return parsed;
    RunSettings base = settings_from_manifest(load_json_file(from_manifest));
    RunSettings merged = base;
    auto pick = [&](const char* flag, auto member) {
        if (app->count(flag) > 0) merged.*member = parsed.*member;
    };
    pick("--method", &RunSettings::method);
    pick("--dataset", &RunSettings::dataset);
    pick("--format", &RunSettings::dataset_format);
    pick("--exemplars", &RunSettings::exemplars);
    pick("--model", &RunSettings::model);
    pick("--endpoint", &RunSettings::endpoint);
    pick("--api-key-env", &RunSettings::api_key_env);
    pick("--judge", &RunSettings::judge);
    pick("--script", &RunSettings::script);
    pick("--cache-dir", &RunSettings::cache_dir);
    pick("--out", &RunSettings::out_dir);
    pick("--tag", &RunSettings::tag);
    pick("--parallel", &RunSettings::parallel);
    pick("--cc-fraction", &RunSettings::cc_fraction);
    if (app->count("--n")) merged.config.n_initial = parsed.config.n_initial;
    if (app->count("--n-max")) merged.config.n_max = parsed.config.n_max;
    if (app->count("--k")) merged.config.k = parsed.config.k;
    if (app->count("--epsilon")) merged.config.epsilon = parsed.config.epsilon;
    if (app->count("--theta")) merged.config.theta = parsed.config.theta;
    if (app->count("--d")) merged.config.d = parsed.config.d;
    if (app->count("--batch")) merged.config.b = parsed.config.b;
    if (app->count("--temperature")) merged.config.temperature = parsed.config.temperature;
    if (app->count("--max-tokens")) {
        merged.config.max_tokens_chain = parsed.config.max_tokens_chain;
    }
    if (app->count("--judge-max-tokens")) {
        merged.config.max_tokens_judge = parsed.config.max_tokens_judge;
    }
    if (app->count("--prices")) {
        merged.config.price_in = parsed.config.price_in;
        merged.config.price_out = parsed.config.price_out;
    }
    if (app->count("--gate")) merged.config.new_chain_gate = parsed.config.new_chain_gate;
    return merged;
}

} // namespace

int run_main(const std::vector<std::string>& args) {
    CLI::App app{"Reasoning-chain ensembles with hierarchical LLM-judge aggregation"};
    app.require_subcommand(1);

    RunSettings run_settings;
    std::string run_from_manifest;
    CLI::App* run = app.add_subcommand("run", "Evaluate a dataset with one method");
    add_run_flags(run, run_settings, run_from_manifest);

    std::vector<std::string> analyze_runs;
    std::vector<std::string> analyze_compare;
    std::string analyze_out;
    CLI::App* analyze =
        app.add_subcommand("analyze", "Accuracy/cost/diagnostic tables over runs");
    analyze->add_option("--run", analyze_runs, "Run directory (repeatable)");
    analyze->add_option("--compare", analyze_compare,
                        "Two run directories to compare")->expected(2);
    analyze->add_option("--out", analyze_out, "Directory for plot-ready CSVs");

    RunSettings sweep_settings;
    std::string sweep_from_manifest;
    std::string sweep_param;
    std::vector<std::string> sweep_values;
    CLI::App* sweep =
        app.add_subcommand("sweep", "One run per grid value of a hyperparameter");
    add_run_flags(sweep, sweep_settings, sweep_from_manifest);
    sweep->add_option("--param", sweep_param, "k | epsilon | theta | b | d | n | n-max")
        ->required();
    sweep->add_option("--values", sweep_values, "Grid values (comma separated)")
        ->required()
        ->delimiter(',');

    std::vector<const char*> argv;
    argv.push_back("aor");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // bad flags are a fatal error
    }

    try {
        if (run->parsed()) {
            RunSettings s = resolve_settings(run, run_settings, run_from_manifest);
            return execute_run(s).exit_code;
        }
        if (analyze->parsed()) {
            return cmd_analyze(analyze_runs, analyze_compare, analyze_out);
        }
        if (sweep->parsed()) {
            RunSettings s = resolve_settings(sweep, sweep_settings, sweep_from_manifest);
            return cmd_sweep(s, sweep_param, sweep_values);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace aor::cli
