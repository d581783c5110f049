#include "aor/judge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace aor {

// ============================================================================
// Rubrics
// ============================================================================

Rubric::Rubric(std::vector<RubricCriterion> criteria) : criteria_(std::move(criteria)) {
    for (const auto& c : criteria_) total_ += c.max_points;
    if (total_ != 10) {
        throw std::invalid_argument("rubric must total exactly 10 points, got " +
                                    std::to_string(total_));
    }
}

const Rubric& Rubric::local() {
    static const Rubric rubric{{
        {"Logical Consistency", 3,
         "the chain progresses soundly from premise to conclusion with no gaps or "
         "contradictions"},
        {"Appropriateness of Method", 3,
         "the chosen method fits the problem and is no more complicated than it "
         "needs to be"},
        {"Completeness and Clarity", 2,
         "every necessary step is present and easy to follow"},
        {"Application of Knowledge", 2,
         "formulas, theorems and facts are used correctly and where they apply"},
    }};
    return rubric;
}

const Rubric& Rubric::global() {
    static const Rubric rubric{{
        {"Validity of Approach", 3,
         "the employed method actually addresses the problem being asked"},
        {"Consistency of Steps and Answer", 3,
         "the steps are correct and the final answer follows from them"},
        {"Completeness and Clarity", 2,
         "every necessary step is present and easy to follow"},
        {"Application of Knowledge", 2,
         "formulas, theorems and facts are used correctly and where they apply"},
    }};
    return rubric;
}

const char* to_string(JudgePhase phase) {
    return phase == JudgePhase::local ? "local" : "global";
}

// ============================================================================
// Prompt builders
// ============================================================================

namespace {

void append_rubric(std::string& out, const Rubric& rubric) {
    for (const auto& c : rubric.criteria()) {
        out += "- " + c.name + " (" + std::to_string(c.max_points) +
               " points): " + c.description + ".\n";
    }
}

void append_anchors(std::string& out, const JudgeRequest& request) {
    if (request.anchors.empty()) return;
    out += "Previously scored solutions, for calibration:\n\n";
    for (const auto& anchor : request.anchors) {
        if (anchor.score < 0 || anchor.score > 10) {
            throw std::invalid_argument("anchor score out of [0,10]");
        }
        out += "Example scored " + std::to_string(anchor.score) + "/10 (answer: " +
               anchor.answer + "):\n" + anchor.rationale + "\n\n";
    }
}

void append_items(std::string& out, const JudgeRequest& request, bool show_bucket_size) {
    for (std::size_t i = 0; i < request.items.size(); ++i) {
        const auto& item = request.items[i];
        out += "Candidate " + std::to_string(i + 1) + " (answer: " + item.answer;
        if (show_bucket_size && item.bucket_size > 0) {
            out += ", reached by " + std::to_string(item.bucket_size) + " solution" +
                   (item.bucket_size == 1 ? "" : "s");
        }
        out += "):\n" + item.rationale + "\n\n";
    }
}

void append_output_grammar(std::string& out, std::size_t count) {
    out += "Respond with exactly one line per candidate, in order, formatted as:\n";
    for (std::size_t i = 1; i <= count; ++i) {
        out += "Score " + std::to_string(i) + ": <points>/10\n";
    }
}

void check_size(const std::string& prompt, std::size_t max_chars) {
    if (prompt.size() > max_chars) {
        throw PromptSizeError(prompt.size(), max_chars);
    }
}

} // namespace

std::string build_local_prompt(const JudgeRequest& request, std::size_t max_chars) {
    if (request.items.empty()) {
        throw std::invalid_argument("build_local_prompt: no items");
    }
    for (const auto& item : request.items) {
        if (item.answer != request.items.front().answer) {
            throw std::invalid_argument(
                "build_local_prompt: items must share one answer");
        }
    }

    std::string out;
    out += "You are grading candidate solutions to a question. Every candidate "
           "below reaches the same answer: " + request.items.front().answer +
           ". Judge the quality of the reasoning itself.\n\n";
    out += "Grade each candidate out of 10 points:\n";
    append_rubric(out, Rubric::local());
    out += "\nQuestion:\n" + request.context.question_text + "\n\n";
    out += "This answer was reached by " + std::to_string(request.context.bucket_size) +
           " of the sampled solutions; " +
           std::to_string(request.context.candidate_answers) +
           " distinct candidate answers exist in total.\n\n";
    append_anchors(out, request);
    append_items(out, request, /*show_bucket_size=*/false);
    append_output_grammar(out, request.items.size());
    check_size(out, max_chars);
    return out;
}

std::string build_global_prompt(const JudgeRequest& request, std::size_t max_chars) {
    if (request.items.empty()) {
        throw std::invalid_argument("build_global_prompt: no items");
    }
    std::set<std::string> answers;
    for (const auto& item : request.items) {
        if (!answers.insert(item.answer).second) {
            throw std::invalid_argument(
                "build_global_prompt: item answers must be pairwise distinct");
        }
    }

    std::string out;
    out += "You are grading candidate solutions to a question. The candidates "
           "below disagree on the answer. Judge which reasoning holds up, end "
           "to end, from approach to final answer.\n\n";
    out += "Grade each candidate out of 10 points:\n";
    append_rubric(out, Rubric::global());
    out += "\nQuestion:\n" + request.context.question_text + "\n\n";
    out += std::to_string(request.context.candidate_answers) +
           " distinct candidate answers were produced in total.\n\n";
    append_anchors(out, request);
    append_items(out, request, /*show_bucket_size=*/true);
    append_output_grammar(out, request.items.size());
    check_size(out, max_chars);
    return out;
}

// ============================================================================
// Score rendering and parsing
// ============================================================================

std::string render_scores(std::span<const int> scores) {
    std::string out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out += "Score " + std::to_string(i + 1) + ": " +
               std::to_string(scores[i]) + "/10\n";
    }
    return out;
}

namespace {

int clamp_score(double value) {
    int rounded = static_cast<int>(std::lround(value));
    return std::clamp(rounded, 0, 10);
}

std::vector<int> primary_parse(const std::string& raw) {
    static const std::regex line_re(
        R"(Score\s*(\d+)\s*:\s*([+-]?\d+(?:\.\d+)?)\s*/\s*10)",
        std::regex::icase);
    std::vector<int> scores;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), line_re);
         it != std::sregex_iterator(); ++it) {
        scores.push_back(clamp_score(std::stod((*it)[2].str())));
    }
    return scores;
}

std::vector<int> fallback_parse(const std::string& raw) {
    // Bare "i : s" or "i. s" pairs, one per line.
    static const std::regex pair_re(
        R"(^\s*\(?(\d+)\)?\s*[:.\-]\s*([+-]?\d+(?:\.\d+)?)\s*(?:/\s*10)?\s*$)");
    std::vector<int> scores;
    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line)) {
        std::smatch m;
        if (std::regex_match(line, m, pair_re)) {
            scores.push_back(clamp_score(std::stod(m[2].str())));
        }
    }
    return scores;
}

} // namespace

ScoreReport parse_scores(const std::string& raw, int expected) {
    if (expected < 1) throw std::invalid_argument("parse_scores: expected must be >= 1");
    std::vector<int> scores = primary_parse(raw);
    if (scores.size() != static_cast<std::size_t>(expected)) {
        scores = fallback_parse(raw);
    }
    if (scores.size() != static_cast<std::size_t>(expected)) {
        throw ParseError("expected " + std::to_string(expected) +
                         " scores, recovered " + std::to_string(scores.size()));
    }
    ScoreReport report;
    report.scores = std::move(scores);
    report.raw_text = raw;
    return report;
}

// ============================================================================
// ScriptedJudge
// ============================================================================

ScriptedJudge::ScriptedJudge(std::map<std::string, int> script, int default_score)
    : script_(std::move(script)), default_score_(default_score) {
    for (const auto& [fp, score] : script_) {
        if (score < 0 || score > 10) {
            throw std::invalid_argument("scripted score out of [0,10] for '" + fp + "'");
        }
    }
    if (default_score_ < 0 || default_score_ > 10) {
        throw std::invalid_argument("default score out of [0,10]");
    }
}

std::string ScriptedJudge::fingerprint(JudgePhase phase, const std::string& rationale) {
    return std::string(to_string(phase)) + ":" + rationale;
}

ScoreReport ScriptedJudge::score(const JudgeRequest& request) {
    {
        std::lock_guard lock(mu_);
        calls_.push_back(request);
    }
    ScoreReport report;
    report.scores.reserve(request.items.size());
    for (const auto& item : request.items) {
        auto it = script_.find(fingerprint(request.phase, item.rationale));
        if (it == script_.end()) it = script_.find(item.rationale);
        report.scores.push_back(it == script_.end() ? default_score_ : it->second);
    }
    report.raw_text = render_scores(report.scores);
    return report;
}

std::vector<JudgeRequest> ScriptedJudge::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

// ============================================================================
// ScriptFile
// ============================================================================

ScriptFile ScriptFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open script file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
    }
    ScriptFile script;
    script.default_score = j.value("default_score", 5);
    if (j.contains("scores")) {
        for (const auto& [key, value] : j["scores"].items()) {
            script.scores[key] = value.get<int>();
        }
    }
    if (j.contains("questions")) {
        for (const auto& [qid, entry] : j["questions"].items()) {
            script.completions[qid] =
                entry.value("completions", std::vector<std::string>{});
        }
    }
    return script;
}

// ============================================================================
// LlmJudge
// ============================================================================

LlmJudge::LlmJudge(CompletionClient& client, double temperature, int max_tokens,
                   std::size_t max_prompt_chars)
    : client_(client),
      temperature_(temperature),
      max_tokens_(max_tokens),
      max_prompt_chars_(max_prompt_chars) {}

ScoreReport LlmJudge::score(const JudgeRequest& request) {
    const std::string prompt = request.phase == JudgePhase::local
        ? build_local_prompt(request, max_prompt_chars_)
        : build_global_prompt(request, max_prompt_chars_);

    TokenUsage usage;
    std::string last_raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
        SamplingParams params;
        params.temperature = temperature_;
        params.max_tokens = max_tokens_;
        params.sample_tag = attempt; // retry gets a distinct cache entry
        Completion completion = client_.complete(prompt, params);
        usage += completion.usage;
        last_raw = completion.text;
        try {
            ScoreReport report = parse_scores(completion.text,
                                              static_cast<int>(request.items.size()));
            report.prompt = prompt;
            report.usage = usage;
            return report;
        } catch (const ParseError&) {
            // fall through to retry / zero-fill
        }
    }
    ScoreReport report;
    report.scores.assign(request.items.size(), 0);
    report.raw_text = last_raw;
    report.prompt = prompt;
    report.usage = usage;
    return report;
}

} // namespace aor
