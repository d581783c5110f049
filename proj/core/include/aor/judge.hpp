#pragma once

/**
 * Evaluation prompts and score parsing.
 *
 * Two rubrics, each totalling 10 points:
 *   local  (same-answer chains)  - Logical Consistency (3), Appropriateness
 *          of Method (3), Completeness and Clarity (2), Application of
 *          Knowledge (2)
 *   global (cross-answer chains) - Validity of Approach (3), Consistency of
 *          Steps and Answer (3), Completeness and Clarity (2), Application
 *          of Knowledge (2)
 *
 * Judge output grammar: exactly one line per item, "Score i: s/10". A
 * tolerant fallback accepts bare "i: s" pairs; decimals round to nearest
 * and everything clamps into [0,10].
 */

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aor/client.hpp"
#include "aor/core.hpp"
#include "aor/errors.hpp"

namespace aor {

// ============================================================================
// Rubrics
// ============================================================================

struct RubricCriterion {
    std::string name;
    int max_points = 0;
    std::string description;
};

class Rubric {
public:
    /// Throws std::invalid_argument unless the criteria total exactly 10.
    explicit Rubric(std::vector<RubricCriterion> criteria);

    static const Rubric& local();
    static const Rubric& global();

    const std::vector<RubricCriterion>& criteria() const { return criteria_; }
    int total() const { return total_; }

private:
    std::vector<RubricCriterion> criteria_;
    int total_ = 0;
};

// ============================================================================
// Requests and reports
// ============================================================================

enum class JudgePhase { local, global };

const char* to_string(JudgePhase phase);

struct JudgeItem {
    int display_index = 0;  // 1-based position within the request
    std::string rationale;
    std::string answer;
    int chain_index = 0;    // provenance, used for auditing
    int bucket_size = 0;    // chains sharing this answer (global prompts)
};

/// A previously scored chain shown as a calibration demonstration.
struct JudgeAnchor {
    std::string rationale;
    std::string answer;
    int score = 0;          // [0,10]
    int chain_index = 0;
};

struct JudgeContext {
    std::string question_text;
    int bucket_size = 0;        // local phase: size of the bucket under review
    int candidate_answers = 0;  // distinct candidate answers overall
};

struct JudgeRequest {
    JudgePhase phase = JudgePhase::local;
    std::vector<JudgeItem> items;
    std::vector<JudgeAnchor> anchors;
    JudgeContext context;
};

struct ScoreReport {
    std::vector<int> scores;  // one per item, in [0,10]
    std::string raw_text;
    std::string prompt;       // live judge: the prompt sent; scripted: empty
    TokenUsage usage;
};

// ============================================================================
// Prompt builders
// ============================================================================

inline constexpr std::size_t kDefaultMaxPromptChars = 60000;

/// Local rubric prompt. Requires all items to share one answer. Throws
/// PromptSizeError instead of silently truncating item text.
std::string build_local_prompt(const JudgeRequest& request,
                               std::size_t max_chars = kDefaultMaxPromptChars);

/// Global rubric prompt. Requires pairwise distinct item answers.
std::string build_global_prompt(const JudgeRequest& request,
                                std::size_t max_chars = kDefaultMaxPromptChars);

/// Renders scores in the output grammar ("Score 1: 8/10\n...").
std::string render_scores(std::span<const int> scores);

/// Strict parse then tolerant fallback; must recover exactly `expected`
/// scores or throws ParseError.
ScoreReport parse_scores(const std::string& raw, int expected);

// ============================================================================
// Judges
// ============================================================================

class JudgeInterface {
public:
    virtual ~JudgeInterface() = default;
    virtual ScoreReport score(const JudgeRequest& request) = 0;
};

/**
 * Deterministic judge for offline runs and tests. Scores are looked up by
 * fingerprint: first "<phase>:<rationale>", then bare "<rationale>", else
 * the default score. Records every request it sees for test assertions.
 */
class ScriptedJudge : public JudgeInterface {
public:
    explicit ScriptedJudge(std::map<std::string, int> script, int default_score = 5);

    ScoreReport score(const JudgeRequest& request) override;

    static std::string fingerprint(JudgePhase phase, const std::string& rationale);

    std::vector<JudgeRequest> calls() const;

private:
    std::map<std::string, int> script_;
    int default_score_;
    mutable std::mutex mu_;
    std::vector<JudgeRequest> calls_;
};

/**
 * On-disk fixture for fully offline runs: scripted judge scores plus
 * scripted completions per question id.
 *
 *   {"default_score": 5,
 *    "scores": {"local:<rationale>": 9, "<rationale>": 7, ...},
 *    "questions": {"<question id>": {"completions": ["...", ...]}}}
 */
struct ScriptFile {
    int default_score = 5;
    std::map<std::string, int> scores;
    std::map<std::string, std::vector<std::string>> completions;

    static ScriptFile load(const std::filesystem::path& path);
};

/**
 * Live judge over a chat-completions client. Builds the phase-appropriate
 * prompt, requests a completion (temperature 0 by default), and parses the
 * scores. One retry with a fresh sample_tag on a parse failure; if that
 * also fails every item in the call scores 0, which keeps it below any
 * sensible epsilon without aborting the run.
 */
class LlmJudge : public JudgeInterface {
public:
    explicit LlmJudge(CompletionClient& client, double temperature = 0.0,
                      int max_tokens = 1024,
                      std::size_t max_prompt_chars = kDefaultMaxPromptChars);

    ScoreReport score(const JudgeRequest& request) override;

private:
    CompletionClient& client_;
    double temperature_;
    int max_tokens_;
    std::size_t max_prompt_chars_;
};

} // namespace aor
