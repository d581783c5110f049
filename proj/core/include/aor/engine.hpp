#pragma once

/**
 * The hierarchical aggregation state machine: local scoring within
 * same-answer buckets, k rounds of global evaluation across buckets, the
 * top-2 margin test, and dynamic sampling with anchored rescoring of newly
 * drawn chains.
 *
 * One run is strictly sequential; independent questions may run
 * concurrently as long as the shared client and judge are concurrency-safe
 * (both provided implementations are).
 */

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/audit.hpp"
#include "aor/client.hpp"
#include "aor/core.hpp"
#include "aor/data.hpp"
#include "aor/extraction.hpp"
#include "aor/judge.hpp"

namespace aor {

// ============================================================================
// Results
// ============================================================================

/// Scores assigned during one global round: at most one entry per answer.
struct GlobalRoundScore {
    int round = 0; // 1..k
    struct Entry {
        std::string answer;
        int chain_index = 0; // the representative judged this round
        int score = 0;
    };
    std::vector<Entry> entries;
};

struct GlobalEvaluation {
    std::map<std::string, ScoreMean> means; // answer -> mean over k rounds
    std::vector<GlobalRoundScore> rounds;
    std::string best_answer;                // argmax by exact rational mean
};

struct AoRResult {
    std::optional<CanonicalAnswer> final_answer; // absent only on abstain
    Termination termination = Termination::abstain;
    int total_chains = 0;
    int rounds = 0;
    TokenUsage usage;       // sampling + judging, cached or not
    RunState state;
    std::vector<AuditRecord> audit;
};

/// Deterministic serialization (ordered keys, no timestamps); two identical
/// scripted runs dump byte-identical JSON.
nlohmann::json to_json(const AoRResult& result);

// ============================================================================
// Phases
// ============================================================================

/**
 * Scores every bucket member through judge calls of at most cfg.b items;
 * chunks after the first carry the bucket's current best and worst scored
 * chains as anchors. Representatives become the top-k members with
 * score >= epsilon (score descending, index ascending); buckets where no
 * member clears epsilon end up with no representatives and sit out the
 * global phase.
 */
void local_scoring(RunState& state, const Question& question, JudgeInterface& judge,
                   const AoRConfig& cfg, AuditTrail& audit);

/**
 * k rounds of cross-bucket judging. Round t takes each eligible bucket's
 * t-th representative, cycling from the top when a bucket has fewer than k.
 * Means are exact rationals; the best answer breaks ties by larger bucket,
 * then by earliest member chain index. Throws AbstainError when no bucket
 * has representatives.
 */
GlobalEvaluation global_evaluation(const RunState& state, const Question& question,
                                   JudgeInterface& judge, const AoRConfig& cfg,
                                   AuditTrail& audit, int epoch);

enum class MarginDecision { finalize, continue_sampling };

struct MarginOutcome {
    MarginDecision decision = MarginDecision::continue_sampling;
    Termination cause = Termination::margin_met; // valid when finalize
    double margin = 0.0; // best mean minus runner-up mean (0 when single)
};

/// Finalize iff best - runner_up >= theta; a single candidate finalizes as
/// single_candidate. Throws std::invalid_argument on an empty mean map.
MarginOutcome margin_decision(const std::map<std::string, ScoreMean>& means,
                              double theta);

struct DynamicOutcome {
    bool reevaluate = false; // a representative set changed or a new bucket surfaced
    std::vector<int> promoted_chain_indices;
};

/**
 * Folds freshly sampled chains into the state. Same-answer arrivals are
 * judged against the bucket's best and worst scored chains as anchors and
 * join the representatives only when their score clears the gate threshold
 * AND strictly beats the bucket's current minimum representative score.
 * New-answer arrivals form a bucket and are promoted at gate threshold
 * alone. Chains without an extracted answer are recorded and ignored.
 */
DynamicOutcome dynamic_round(RunState& state, std::vector<ReasoningChain> new_chains,
                             const Question& question, JudgeInterface& judge,
                             const AoRConfig& cfg, AuditTrail& audit, int round);

// ============================================================================
// Full pipeline
// ============================================================================

/**
 * sample n_initial -> extract -> bucket -> local scoring -> global
 * evaluation -> margin loop with dynamic sampling, capped at n_max chains
 * and cfg.max_rounds_guard rounds. Abstains when no chain ever yields an
 * extractable answer or no bucket survives epsilon by n_max.
 */
AoRResult run_aor(const Question& question, CompletionClient& client,
                  JudgeInterface& judge, const AoRConfig& cfg,
                  const ExemplarSet& exemplars);

/// Builds chains from completions: extraction, 1-based indices starting at
/// `first_index`, origin round tagging.
std::vector<ReasoningChain> make_chains(const std::vector<Completion>& completions,
                                        TaskKind kind, int first_index,
                                        int origin_round);

} // namespace aor
