#pragma once

// Shared helpers for the unit and acceptance suites: fixture paths, chain
// builders, and a brute-force majority-vote oracle kept independent of the
// library's voting code.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "aor/core.hpp"
#include "aor/data.hpp"

namespace aor::test {

/// Minimal exemplar set for engine-level tests (scripted samplers ignore
/// the prompt anyway).
inline ExemplarSet tiny_exemplars() {
    return ExemplarSet("tiny",
                       {{"What is 1 + 1?", "One and one make 2.", "2"}});
}

inline std::filesystem::path fixtures_dir() {
    return std::filesystem::path(AOR_FIXTURES_DIR);
}

inline std::filesystem::path assets_dir() {
    return std::filesystem::path(AOR_ASSETS_DIR);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline std::filesystem::path make_temp_dir(const std::string& stem) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               (stem + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

/// Chains from a list of (already canonical) answers; empty string = failed
/// extraction. Index = position + 1.
inline std::vector<ReasoningChain> chains_from_answers(
    const std::vector<std::string>& answers) {
    std::vector<ReasoningChain> chains;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        ReasoningChain chain;
        chain.index = static_cast<int>(i) + 1;
        chain.rationale_text = "chain " + std::to_string(i + 1);
        if (!answers[i].empty()) chain.extracted_answer = answers[i];
        chains.push_back(std::move(chain));
    }
    return chains;
}

/// Independent majority-vote oracle: linear scan counting, winner = max
/// count with smallest first-occurrence index among the tied.
struct VoteOracle {
    std::string winner;
    std::map<std::string, int> tally;
    bool tie = false;
};

inline std::optional<VoteOracle> brute_force_vote(
    const std::vector<ReasoningChain>& chains) {
    VoteOracle oracle;
    std::map<std::string, int> first_seen;
    for (const auto& chain : chains) {
        if (!chain.extracted_answer) continue;
        oracle.tally[*chain.extracted_answer] += 1;
        if (!first_seen.count(*chain.extracted_answer)) {
            first_seen[*chain.extracted_answer] = chain.index;
        }
    }
    if (oracle.tally.empty()) return std::nullopt;
    int best = 0;
    for (const auto& [answer, count] : oracle.tally) {
        if (count > best) best = count;
    }
    int best_first = 1 << 30;
    int ties = 0;
    for (const auto& [answer, count] : oracle.tally) {
        if (count != best) continue;
        ++ties;
        if (first_seen[answer] < best_first) {
            best_first = first_seen[answer];
            oracle.winner = answer;
        }
    }
    oracle.tie = ties > 1;
    return oracle;
}

} // namespace aor::test
