#include "aor/core.hpp"

#include <set>
#include <stdexcept>

namespace aor {

const char* to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::numeric: return "numeric";
        case TaskKind::multiple_choice: return "multiple_choice";
        case TaskKind::boolean_answer: return "boolean";
    }
    return "numeric";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "numeric") return TaskKind::numeric;
    if (name == "multiple_choice") return TaskKind::multiple_choice;
    if (name == "boolean") return TaskKind::boolean_answer;
    throw std::invalid_argument("unknown task_kind: " + name);
}

void validate_question(const Question& q) {
    if (q.id.empty()) {
        throw std::invalid_argument("question id must be non-empty");
    }
    if (q.task_kind == TaskKind::multiple_choice) {
        if (q.options.empty()) {
            throw std::invalid_argument(
                "multiple_choice question '" + q.id + "' has no options");
        }
        std::set<std::string> labels;
        for (const auto& opt : q.options) {
            if (!labels.insert(opt.label).second) {
                throw std::invalid_argument(
                    "question '" + q.id + "' has duplicate option label " + opt.label);
            }
        }
    }
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::margin_met: return "margin_met";
        case Termination::n_max_reached: return "n_max_reached";
        case Termination::single_candidate: return "single_candidate";
        case Termination::abstain: return "abstain";
    }
    return "abstain";
}

namespace {

void reject(bool bad, const char* what) {
    if (bad) throw std::invalid_argument(std::string("AoRConfig: ") + what);
}

bool parseable_price(const std::string& s) {
    if (s.empty()) return false;
    bool digit = false, dot = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') { digit = true; continue; }
        if (c == '.' && !dot) { dot = true; continue; }
        return false; // signs rejected: prices are non-negative
    }
    return digit;
}

} // namespace

AoRConfig validate_config(AoRConfig raw) {
    reject(raw.n_initial < 1, "n_initial must be >= 1");
    reject(raw.n_initial > raw.n_max, "n_initial must be <= n_max");
    reject(raw.k < 1, "k must be >= 1");
    reject(raw.epsilon < 0.0 || raw.epsilon > 10.0, "epsilon must be in [0,10]");
    reject(raw.theta < 0.0, "theta must be >= 0");
    reject(raw.d < 1, "d must be >= 1");
    reject(raw.b < 1, "b must be >= 1");
    reject(raw.max_tokens_chain < 1, "max_tokens_chain must be >= 1");
    reject(raw.max_tokens_judge < 1, "max_tokens_judge must be >= 1");
    reject(raw.max_rounds_guard < 1, "max_rounds_guard must be >= 1");
    reject(raw.temperature.has_value() && *raw.temperature < 0.0,
           "temperature must be >= 0");
    reject(!parseable_price(raw.price_in), "price_in must be a non-negative decimal");
    reject(!parseable_price(raw.price_out), "price_out must be a non-negative decimal");
    return raw;
}

std::map<std::string, AnswerBucket> bucket_by_answer(
    std::span<const ReasoningChain> chains) {
    std::map<std::string, AnswerBucket> buckets;
    for (const auto& chain : chains) {
        if (!chain.extracted_answer) continue; // failed extractions join no bucket
        auto& bucket = buckets[*chain.extracted_answer];
        bucket.answer = *chain.extracted_answer;
        bucket.members.push_back(BucketMember{chain.index, std::nullopt});
    }
    return buckets;
}

} // namespace aor
