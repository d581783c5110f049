#pragma once

/**
 * Structured audit records: one per sampling batch and one per judge call.
 * The engine emits them, the run directory persists them as JSONL, and the
 * analytics layer (and the conformance tests) recompute results from them.
 */

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aor/core.hpp"

namespace aor {

struct AuditItem {
    int chain_index = 0;
    // Canonical answer; nullopt for a sampled chain whose extraction failed.
    std::optional<std::string> answer;

    bool operator==(const AuditItem&) const = default;
};

struct AuditAnchor {
    int chain_index = 0;
    int score = 0;

    bool operator==(const AuditAnchor&) const = default;
};

struct AuditRecord {
    int seq = 0;                 // per-question emission order
    std::string question_id;
    std::string kind;            // "sample_batch" | "judge_call"
    std::string phase;           // judge calls: "local" | "global"
    int round = 0;               // sample/local: dynamic round (0 = initial);
                                 // global: round t in 1..k
    int epoch = 0;               // global-evaluation pass counter
    std::string bucket;          // local calls: the bucket's answer
    std::vector<AuditItem> items;
    std::vector<AuditAnchor> anchors;
    std::vector<int> scores;     // judge calls: one per item
    TokenUsage usage;
    std::string prompt;          // judge calls: prompt sent (live judge)
    std::string raw_text;        // judge calls: raw judge output

    bool operator==(const AuditRecord&) const = default;
};

nlohmann::json to_json(const AuditRecord& record);
AuditRecord audit_record_from_json(const nlohmann::json& j);

/// Collects records in emission order and assigns sequence numbers.
class AuditTrail {
public:
    void emit(AuditRecord record) {
        record.seq = static_cast<int>(records_.size());
        records_.push_back(std::move(record));
    }
    const std::vector<AuditRecord>& records() const { return records_; }
    std::vector<AuditRecord> take() { return std::move(records_); }

private:
    std::vector<AuditRecord> records_;
};

} // namespace aor
