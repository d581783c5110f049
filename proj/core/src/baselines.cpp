#include "aor/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "aor/errors.hpp"

namespace aor {

VoteOutcome self_consistency(std::span<const ReasoningChain> chains, TaskKind kind) {
    std::map<std::string, int> tally;
    std::map<std::string, int> first_index;
    for (const auto& chain : chains) {
        if (!chain.extracted_answer) continue;
        ++tally[*chain.extracted_answer];
        auto [it, inserted] = first_index.emplace(*chain.extracted_answer, chain.index);
        if (!inserted) it->second = std::min(it->second, chain.index);
    }
    if (tally.empty()) {
        throw AbstainError("self_consistency: no chain has an extracted answer");
    }

    int best_count = 0;
    for (const auto& [answer, count] : tally) best_count = std::max(best_count, count);

    std::string winner;
    int winner_first = std::numeric_limits<int>::max();
    int at_max = 0;
    for (const auto& [answer, count] : tally) {
        if (count != best_count) continue;
        ++at_max;
        if (first_index[answer] < winner_first) {
            winner_first = first_index[answer];
            winner = answer;
        }
    }

    VoteOutcome outcome;
    outcome.winner = CanonicalAnswer{kind, winner};
    outcome.tally = std::move(tally);
    outcome.tie = at_max > 1;
    return outcome;
}

int rationale_complexity(const ReasoningChain& chain) {
    int lines = 0;
    bool non_ws = false;
    for (char c : chain.rationale_text) {
        if (c == '\n') {
            if (non_ws) ++lines;
            non_ws = false;
        } else if (c != ' ' && c != '\t' && c != '\r') {
            non_ws = true;
        }
    }
    if (non_ws) ++lines;
    return lines;
}

VoteOutcome complexity_consistency(std::span<const ReasoningChain> chains,
                                   TaskKind kind, double retain_top_fraction) {
    if (!(retain_top_fraction > 0.0) || retain_top_fraction > 1.0) {
        throw std::invalid_argument(
            "complexity_consistency: retain_top_fraction must be in (0,1]");
    }
    const std::size_t n = chains.size();
    const auto keep = static_cast<std::size_t>(
        std::ceil(retain_top_fraction * static_cast<double>(n)));

    std::vector<const ReasoningChain*> ranked;
    ranked.reserve(n);
    for (const auto& chain : chains) ranked.push_back(&chain);
    std::sort(ranked.begin(), ranked.end(),
              [](const ReasoningChain* a, const ReasoningChain* b) {
                  int ca = rationale_complexity(*a), cb = rationale_complexity(*b);
                  if (ca != cb) return ca > cb;
                  return a->index < b->index;
              });
    ranked.resize(std::min(keep, ranked.size()));

    std::vector<ReasoningChain> kept;
    kept.reserve(ranked.size());
    for (const auto* chain : ranked) kept.push_back(*chain);
    return self_consistency(kept, kind);
}

CanonicalAnswer greedy_answer(const ReasoningChain& chain, TaskKind kind) {
    if (!chain.extracted_answer) {
        throw AbstainError("greedy_answer: chain " + std::to_string(chain.index) +
                           " has no extracted answer");
    }
    return CanonicalAnswer{kind, *chain.extracted_answer};
}

} // namespace aor
