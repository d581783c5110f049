#pragma once

/**
 * Answer-level ensemble baselines: greedy single-chain, majority vote
 * (self-consistency), and complexity-filtered majority vote. All pure
 * functions; chains whose extraction failed never influence a tally.
 */

#include <map>
#include <span>
#include <string>

#include "aor/core.hpp"
#include "aor/extraction.hpp"

namespace aor {

struct VoteOutcome {
    CanonicalAnswer winner;
    std::map<std::string, int> tally; // canonical answer -> count
    bool tie = false;                 // max count shared by >1 answer
};

/// Majority vote. Ties break to the answer whose first occurrence has the
/// smallest chain index. Throws AbstainError when no chain has an answer.
VoteOutcome self_consistency(std::span<const ReasoningChain> chains, TaskKind kind);

/// Non-empty rationale line count; the complexity proxy used for filtering.
int rationale_complexity(const ReasoningChain& chain);

/// Keeps the ceil(fraction * n) most complex chains (ties by ascending
/// index), then votes over the kept set. fraction must be in (0, 1].
VoteOutcome complexity_consistency(std::span<const ReasoningChain> chains,
                                   TaskKind kind, double retain_top_fraction);

/// The single chain's answer. Throws AbstainError when extraction failed.
CanonicalAnswer greedy_answer(const ReasoningChain& chain, TaskKind kind);

} // namespace aor
