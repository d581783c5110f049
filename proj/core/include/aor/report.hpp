#pragma once

/**
 * Accuracy, cost, and diagnostic analytics over run outputs.
 *
 * Costs are exact: Money is a fixed-point decimal (128-bit mantissa and a
 * power-of-ten scale), so token_count * price / 1000 sums with no rounding.
 *
 * Result schemas (column order is fixed):
 *   results.jsonl - one record per question with fields question_id, method,
 *                   final_answer, gold_answer, correct, chains, rounds,
 *                   termination, input_tokens, output_tokens, cost; plus a
 *                   trailing {"record":"aggregate",...} footer.
 *   results.csv   - same per-question fields, header always present.
 */

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aor/core.hpp"
#include "aor/extraction.hpp"

namespace aor {

// ============================================================================
// Exact decimal money
// ============================================================================

class Money {
public:
    Money() = default;

    /// Parses "0.0015", "12", ".5". Throws std::invalid_argument on junk or
    /// negative values (prices are non-negative).
    static Money from_decimal_string(const std::string& text);

    /// tokens * price / 1000, exact.
    static Money tokens_cost(std::int64_t tokens, const Money& price_per_1k);

    Money operator+(const Money& other) const;
    Money& operator+=(const Money& other);
    bool operator==(const Money& other) const;
    bool operator<(const Money& other) const;

    /// Canonical decimal string: no trailing fraction zeros, "0" for zero.
    std::string to_string() const;

    bool is_zero() const { return units_ == 0; }

private:
    Money(__int128 units, int scale) : units_(units), scale_(scale) { normalize(); }
    void normalize();
    static std::pair<__int128, __int128> aligned(const Money& a, const Money& b);

    __int128 units_ = 0; // value = units * 10^-scale
    int scale_ = 0;
};

/// input_tokens * price_in/1000 + output_tokens * price_out/1000.
Money compute_cost(const TokenUsage& usage, const Money& price_in,
                   const Money& price_out);

// ============================================================================
// Summaries
// ============================================================================

struct RunSummary {
    std::string question_id;
    std::string method;    // cot | sc | cc | aor
    std::string task_kind; // numeric | multiple_choice | boolean
    std::optional<std::string> final_answer; // canonical; absent on abstain/error
    std::optional<std::string> gold_answer;
    bool correct = false;
    int chains_used = 0;
    int rounds = 0;
    std::string termination; // aor cause, "vote", "greedy", "abstain", "error"
    TokenUsage usage;
};

/// Fraction of questions answered correctly; abstentions and errors count
/// against the denominator. Empty input -> 0.
double compute_accuracy(std::span<const RunSummary> summaries);

struct Aggregates {
    int questions = 0;
    int correct = 0;
    double accuracy = 0.0;
    double mean_chains = 0.0;
    TokenUsage usage;
    Money total_cost;
};

Aggregates aggregate(std::span<const RunSummary> summaries, const Money& price_in,
                     const Money& price_out);

// ============================================================================
// Potential-correct diagnostic
// ============================================================================

/// Everything the diagnostic needs about one question's run.
struct QuestionChainRecord {
    TaskKind kind = TaskKind::numeric;
    std::string gold_answer;                       // canonical
    std::optional<std::string> final_answer;       // canonical; absent = abstain
    std::vector<std::optional<std::string>> chain_answers;
};

struct PotentialCorrect {
    double proportion = 0.0;   // 0 when the denominator is empty
    bool empty_denominator = false;
    int wrong_questions = 0;
    int wrong_with_correct_chain = 0;
};

/// Among questions the method got wrong, the fraction whose sampled chains
/// contain at least one chain with the correct answer.
PotentialCorrect potential_correct_analysis(
    std::span<const QuestionChainRecord> records);

// ============================================================================
// Emission
// ============================================================================

enum class ResultFormat { jsonl, csv, table };

const char* to_string(ResultFormat format);
ResultFormat result_format_from_string(const std::string& name);

/// Stable column order, byte-stable output for identical inputs. jsonl gets
/// an aggregate footer record; csv is header + rows; table is aligned text.
void emit_results(std::span<const RunSummary> summaries, const Money& price_in,
                  const Money& price_out, ResultFormat format, std::ostream& out);

} // namespace aor
