#pragma once

/**
 * Core domain types shared by every other module: questions, sampled
 * reasoning chains, answer buckets, run configuration, and the
 * dynamic-sampling run state. Everything here is a plain value type;
 * construction-time validation lives in the free functions below.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aor {

// ============================================================================
// Questions
// ============================================================================

enum class TaskKind { numeric, multiple_choice, boolean_answer };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct ChoiceOption {
    std::string label; // single uppercase letter
    std::string text;

    bool operator==(const ChoiceOption&) const = default;
};

struct Question {
    std::string id;
    std::string text;
    TaskKind task_kind = TaskKind::numeric;
    std::vector<ChoiceOption> options;       // multiple_choice only
    std::optional<std::string> gold_answer;  // canonical form, benchmark mode
};

/// Throws std::invalid_argument when a multiple-choice question has no
/// options or duplicate option labels.
void validate_question(const Question& q);

// ============================================================================
// Token accounting
// ============================================================================

struct TokenUsage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& other) {
        input_tokens += other.input_tokens;
        output_tokens += other.output_tokens;
        return *this;
    }
    friend TokenUsage operator+(TokenUsage lhs, const TokenUsage& rhs) {
        lhs += rhs;
        return lhs;
    }
    bool operator==(const TokenUsage&) const = default;
};

// ============================================================================
// Reasoning chains and answer buckets
// ============================================================================

struct ReasoningChain {
    int index = 0;              // 1-based sampling order, unique per question
    std::string rationale_text;
    std::optional<std::string> extracted_answer; // canonical value; nullopt = extraction failed
    TokenUsage usage;
    int origin_round = 0;       // 0 = initial batch, >=1 = dynamic round
};

struct BucketMember {
    int chain_index = 0;
    std::optional<int> score;   // local score in [0,10]; unset until judged

    bool operator==(const BucketMember&) const = default;
};

/**
 * All chains sharing one canonical answer. `representatives` holds at most
 * k chain indices, every one with score >= epsilon, ordered by score
 * descending then chain index ascending.
 */
struct AnswerBucket {
    std::string answer;
    std::vector<BucketMember> members;  // sampling order
    std::vector<int> representatives;
};

// ============================================================================
// Configuration
// ============================================================================

struct AoRConfig {
    int n_initial = 20;  // chains sampled up front
    int n_max = 40;      // hard cap on total sampled chains
    int k = 3;           // representatives per bucket / global rounds
    double epsilon = 6.0; // local-score admission threshold, [0,10]
    double theta = 2.0;   // termination margin between the top-2 answer means
    int d = 5;           // chains added per dynamic round
    int b = 5;           // max items per judge call

    std::optional<double> temperature; // unset -> per-model-family default
    int max_tokens_chain = 1024;
    int max_tokens_judge = 1024;

    // Currency per 1K tokens, exact decimal strings.
    std::string price_in = "0.0015";
    std::string price_out = "0.002";

    // Safety rail: caps dynamic rounds even if a client misbehaves.
    int max_rounds_guard = 64;

    // Which threshold gates newly sampled chains into the ranking.
    enum class NewChainGate { epsilon_threshold, theta_threshold };
    NewChainGate new_chain_gate = NewChainGate::epsilon_threshold;

    bool operator==(const AoRConfig&) const = default;
};

/// Checks every invariant (n_initial <= n_max, k >= 1, epsilon in [0,10],
/// theta >= 0, d >= 1, b >= 1, prices parseable and non-negative) and returns
/// the config unchanged. Throws std::invalid_argument with the offending
/// field named. Idempotent.
AoRConfig validate_config(AoRConfig raw);

// ============================================================================
// Run state
// ============================================================================

enum class Termination { margin_met, n_max_reached, single_candidate, abstain };

const char* to_string(Termination t);

/// Mean of integer scores kept exact as sum/count so downstream comparisons
/// and audit recomputation never touch floating point.
struct ScoreMean {
    int sum = 0;
    int count = 0;

    double mean() const { return count == 0 ? 0.0 : static_cast<double>(sum) / count; }
    bool operator==(const ScoreMean&) const = default;
};

/// a < b as rationals, exact.
inline bool mean_less(const ScoreMean& a, const ScoreMean& b) {
    return static_cast<std::int64_t>(a.sum) * b.count <
           static_cast<std::int64_t>(b.sum) * a.count;
}

struct RunState {
    std::vector<ReasoningChain> chains;
    std::map<std::string, AnswerBucket> buckets;    // answer -> bucket
    std::map<std::string, ScoreMean> global_means;  // answer -> mean score
    int rounds_completed = 0;
    std::optional<Termination> terminated;
};

// ============================================================================
// Bucketing
// ============================================================================

/// One bucket per distinct canonical answer; chains whose extraction failed
/// appear in no bucket; members keep sampling order. Pure.
std::map<std::string, AnswerBucket> bucket_by_answer(
    std::span<const ReasoningChain> chains);

} // namespace aor
