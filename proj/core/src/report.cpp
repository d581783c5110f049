#include "aor/report.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace aor {

using nlohmann::json;

// ============================================================================
// Money
// ============================================================================

void Money::normalize() {
    while (scale_ > 0 && units_ % 10 == 0) {
        units_ /= 10;
        --scale_;
    }
    if (units_ == 0) scale_ = 0;
}

Money Money::from_decimal_string(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("Money: empty string");
    __int128 units = 0;
    int scale = 0;
    bool seen_dot = false, seen_digit = false;
    for (char c : text) {
        if (c == '.') {
            if (seen_dot) throw std::invalid_argument("Money: bad decimal '" + text + "'");
            seen_dot = true;
        } else if (c >= '0' && c <= '9') {
            units = units * 10 + (c - '0');
            if (seen_dot) ++scale;
            seen_digit = true;
        } else {
            throw std::invalid_argument("Money: bad decimal '" + text + "'");
        }
    }
    if (!seen_digit) throw std::invalid_argument("Money: bad decimal '" + text + "'");
    return Money(units, scale);
}

Money Money::tokens_cost(std::int64_t tokens, const Money& price_per_1k) {
    if (tokens < 0) throw std::invalid_argument("Money: negative token count");
    return Money(static_cast<__int128>(tokens) * price_per_1k.units_,
                 price_per_1k.scale_ + 3); // the /1000
}

std::pair<__int128, __int128> Money::aligned(const Money& a, const Money& b) {
    __int128 ua = a.units_, ub = b.units_;
    int sa = a.scale_, sb = b.scale_;
    while (sa < sb) { ua *= 10; ++sa; }
    while (sb < sa) { ub *= 10; ++sb; }
    return {ua, ub};
}

Money Money::operator+(const Money& other) const {
    auto [ua, ub] = aligned(*this, other);
    return Money(ua + ub, std::max(scale_, other.scale_));
}

Money& Money::operator+=(const Money& other) {
    *this = *this + other;
    return *this;
}

bool Money::operator==(const Money& other) const {
    auto [ua, ub] = aligned(*this, other);
    return ua == ub;
}

bool Money::operator<(const Money& other) const {
    auto [ua, ub] = aligned(*this, other);
    return ua < ub;
}

std::string Money::to_string() const {
    __int128 value = units_;
    std::string digits;
    if (value == 0) digits = "0";
    while (value > 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
        value /= 10;
    }
    std::reverse(digits.begin(), digits.end());
    if (scale_ == 0) return digits;
    while (digits.size() <= static_cast<std::size_t>(scale_)) {
        digits.insert(digits.begin(), '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(scale_), 1, '.');
    return digits;
}

Money compute_cost(const TokenUsage& usage, const Money& price_in,
                   const Money& price_out) {
    return Money::tokens_cost(usage.input_tokens, price_in) +
           Money::tokens_cost(usage.output_tokens, price_out);
}

// ============================================================================
// Accuracy and aggregates
// ============================================================================

double compute_accuracy(std::span<const RunSummary> summaries) {
    if (summaries.empty()) return 0.0;
    int correct = 0;
    for (const auto& s : summaries) correct += s.correct ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(summaries.size());
}

Aggregates aggregate(std::span<const RunSummary> summaries, const Money& price_in,
                     const Money& price_out) {
    Aggregates agg;
    agg.questions = static_cast<int>(summaries.size());
    std::int64_t chains = 0;
    for (const auto& s : summaries) {
        agg.correct += s.correct ? 1 : 0;
        chains += s.chains_used;
        agg.usage += s.usage;
    }
    agg.accuracy = compute_accuracy(summaries);
    agg.mean_chains = summaries.empty()
        ? 0.0
        : static_cast<double>(chains) / static_cast<double>(summaries.size());
    agg.total_cost = compute_cost(agg.usage, price_in, price_out);
    return agg;
}

// ============================================================================
// Potential-correct diagnostic
// ============================================================================

PotentialCorrect potential_correct_analysis(
    std::span<const QuestionChainRecord> records) {
    PotentialCorrect out;
    for (const auto& record : records) {
        const CanonicalAnswer gold{record.kind, record.gold_answer};
        bool wrong = true;
        if (record.final_answer) {
            wrong = !answers_equal(CanonicalAnswer{record.kind, *record.final_answer},
                                   gold);
        }
        if (!wrong) continue;
        ++out.wrong_questions;
        for (const auto& answer : record.chain_answers) {
            if (answer &&
                answers_equal(CanonicalAnswer{record.kind, *answer}, gold)) {
                ++out.wrong_with_correct_chain;
                break;
            }
        }
    }
    if (out.wrong_questions == 0) {
        out.empty_denominator = true;
        out.proportion = 0.0;
    } else {
        out.proportion = static_cast<double>(out.wrong_with_correct_chain) /
                         static_cast<double>(out.wrong_questions);
    }
    return out;
}

// ============================================================================
// Emission
// ============================================================================

const char* to_string(ResultFormat format) {
    switch (format) {
        case ResultFormat::jsonl: return "jsonl";
        case ResultFormat::csv: return "csv";
        case ResultFormat::table: return "table";
    }
    return "jsonl";
}

ResultFormat result_format_from_string(const std::string& name) {
    if (name == "jsonl") return ResultFormat::jsonl;
    if (name == "csv") return ResultFormat::csv;
    if (name == "table") return ResultFormat::table;
    throw std::invalid_argument("unknown result format: " + name);
}

namespace {

std::string render_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

json summary_json(const RunSummary& s, const Money& price_in, const Money& price_out) {
    return json{
        {"question_id", s.question_id},
        {"method", s.method},
        {"task_kind", s.task_kind},
        {"final_answer", s.final_answer ? json(*s.final_answer) : json(nullptr)},
        {"gold_answer", s.gold_answer ? json(*s.gold_answer) : json(nullptr)},
        {"correct", s.correct},
        {"chains", s.chains_used},
        {"rounds", s.rounds},
        {"termination", s.termination},
        {"input_tokens", s.usage.input_tokens},
        {"output_tokens", s.usage.output_tokens},
        {"cost", compute_cost(s.usage, price_in, price_out).to_string()}};
}

} // namespace

void emit_results(std::span<const RunSummary> summaries, const Money& price_in,
                  const Money& price_out, ResultFormat format, std::ostream& out) {
    switch (format) {
        case ResultFormat::jsonl: {
            for (const auto& s : summaries) {
                out << summary_json(s, price_in, price_out).dump() << "\n";
            }
            Aggregates agg = aggregate(summaries, price_in, price_out);
            out << json{{"record", "aggregate"},
                        {"questions", agg.questions},
                        {"correct", agg.correct},
                        {"accuracy", render_double(agg.accuracy)},
                        {"mean_chains", render_double(agg.mean_chains)},
                        {"input_tokens", agg.usage.input_tokens},
                        {"output_tokens", agg.usage.output_tokens},
                        {"total_cost", agg.total_cost.to_string()}}
                       .dump()
                << "\n";
            break;
        }
        case ResultFormat::csv: {
            out << "question_id,method,task_kind,final_answer,gold_answer,correct,"
                   "chains,rounds,termination,input_tokens,output_tokens,cost\n";
            for (const auto& s : summaries) {
                out << csv_escape(s.question_id) << ',' << csv_escape(s.method) << ','
                    << csv_escape(s.task_kind) << ','
                    << csv_escape(s.final_answer.value_or("")) << ','
                    << csv_escape(s.gold_answer.value_or("")) << ','
                    << (s.correct ? "true" : "false") << ',' << s.chains_used << ','
                    << s.rounds << ',' << csv_escape(s.termination) << ','
                    << s.usage.input_tokens << ',' << s.usage.output_tokens << ','
                    << compute_cost(s.usage, price_in, price_out).to_string() << "\n";
            }
            break;
        }
        case ResultFormat::table: {
            Aggregates agg = aggregate(summaries, price_in, price_out);
            out << std::left << std::setw(24) << "question" << std::setw(7) << "method"
                << std::setw(12) << "answer" << std::setw(12) << "gold" << std::setw(9)
                << "correct" << std::setw(8) << "chains" << std::setw(12) << "cost"
                << "\n";
            for (const auto& s : summaries) {
                out << std::left << std::setw(24) << s.question_id << std::setw(7)
                    << s.method << std::setw(12) << s.final_answer.value_or("-")
                    << std::setw(12) << s.gold_answer.value_or("-") << std::setw(9)
                    << (s.correct ? "yes" : "no") << std::setw(8) << s.chains_used
                    << std::setw(12)
                    << compute_cost(s.usage, price_in, price_out).to_string() << "\n";
            }
            out << "total: " << agg.questions << " questions, accuracy "
                << render_double(agg.accuracy) << ", mean chains "
                << render_double(agg.mean_chains) << ", cost "
                << agg.total_cost.to_string() << "\n";
            break;
        }
    }
}

} // namespace aor
