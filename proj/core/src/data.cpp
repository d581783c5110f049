#include "aor/data.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "aor/extraction.hpp"

namespace aor {

using nlohmann::json;

const char* to_string(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::gsm8k_jsonl: return "gsm8k_jsonl";
        case DatasetFormat::aqua_jsonl: return "aqua_jsonl";
        case DatasetFormat::bbh_json: return "bbh_json";
        case DatasetFormat::generic_jsonl: return "generic_jsonl";
    }
    return "generic_jsonl";
}

DatasetFormat dataset_format_from_string(const std::string& name) {
    if (name == "gsm8k_jsonl") return DatasetFormat::gsm8k_jsonl;
    if (name == "aqua_jsonl") return DatasetFormat::aqua_jsonl;
    if (name == "bbh_json") return DatasetFormat::bbh_json;
    if (name == "generic_jsonl") return DatasetFormat::generic_jsonl;
    throw std::invalid_argument("unknown dataset format: " + name);
}

namespace {

[[noreturn]] void record_error(const std::filesystem::path& path, int record,
                               const std::string& what) {
    throw std::runtime_error(path.string() + ": record " + std::to_string(record) +
                             ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Canonicalize a gold answer or fail loudly; every record of a supported
/// dataset must round-trip.
std::string gold_or_fail(const std::filesystem::path& path, int record,
                         const std::string& raw, TaskKind kind) {
    auto canon = canonicalize(raw, kind);
    if (!canon) {
        record_error(path, record,
                     "gold answer '" + raw + "' not canonicalizable as " +
                         std::string(to_string(kind)));
    }
    return canon->value;
}

/// AQuA-style "A)option text" entries.
std::vector<ChoiceOption> parse_option_strings(const std::vector<std::string>& raw) {
    std::vector<ChoiceOption> options;
    for (const auto& entry : raw) {
        std::string t = trim(entry);
        if (t.empty()) continue;
        std::size_t i = 0;
        if (t[i] == '(') ++i;
        if (i >= t.size() || !std::isalpha(static_cast<unsigned char>(t[i]))) continue;
        char label = static_cast<char>(std::toupper(static_cast<unsigned char>(t[i])));
        ++i;
        while (i < t.size() && (t[i] == ')' || t[i] == '.' || t[i] == ':' || t[i] == ' ')) ++i;
        options.push_back(ChoiceOption{std::string(1, label), t.substr(i)});
    }
    return options;
}

/// BBH inputs often carry "Options:\n(A) ...\n(B) ..." inline.
std::vector<ChoiceOption> parse_inline_options(const std::string& text) {
    std::vector<ChoiceOption> options;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::string t = trim(line);
        if (t.size() >= 3 && t[0] == '(' &&
            std::isalpha(static_cast<unsigned char>(t[1])) && t[2] == ')') {
            char label = static_cast<char>(std::toupper(static_cast<unsigned char>(t[1])));
            options.push_back(ChoiceOption{std::string(1, label), trim(t.substr(3))});
        }
    }
    return options;
}

TaskKind infer_kind(const std::string& answer, bool has_options) {
    if (has_options) return TaskKind::multiple_choice;
    if (canonicalize_boolean(answer) &&
        (canonicalize_choice(answer) == std::nullopt)) {
        return TaskKind::boolean_answer;
    }
    std::string t = trim(answer);
    bool letter = t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0]));
    if (!letter && t.size() == 3 && t[0] == '(' && t[2] == ')') letter = true;
    if (letter) return TaskKind::multiple_choice;
    if (canonicalize_numeric(answer)) return TaskKind::numeric;
    if (canonicalize_boolean(answer)) return TaskKind::boolean_answer;
    throw std::invalid_argument("cannot infer task kind from answer '" + answer + "'");
}

std::vector<Question> load_jsonl(const std::filesystem::path& path,
                                 DatasetFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
    std::vector<Question> questions;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            record_error(path, lineno, std::string("invalid JSON: ") + e.what());
        }
        Question q;
        q.id = record.value("id", path.stem().string() + "-" + std::to_string(lineno));
        try {
            switch (format) {
                case DatasetFormat::gsm8k_jsonl: {
                    q.text = record.at("question").get<std::string>();
                    q.task_kind = TaskKind::numeric;
                    std::string answer = record.at("answer").get<std::string>();
                    std::size_t marker = answer.rfind("####");
                    std::string gold =
                        marker == std::string::npos ? answer : answer.substr(marker + 4);
                    q.gold_answer = gold_or_fail(path, lineno, gold, q.task_kind);
                    break;
                }
                case DatasetFormat::aqua_jsonl: {
                    q.text = record.at("question").get<std::string>();
                    q.task_kind = TaskKind::multiple_choice;
                    q.options = parse_option_strings(
                        record.at("options").get<std::vector<std::string>>());
                    q.gold_answer = gold_or_fail(
                        path, lineno, record.at("correct").get<std::string>(), q.task_kind);
                    break;
                }
                case DatasetFormat::generic_jsonl: {
                    q.text = record.at("question").get<std::string>();
                    std::string answer = record.at("answer").get<std::string>();
                    if (record.contains("options")) {
                        q.options = parse_option_strings(
                            record.at("options").get<std::vector<std::string>>());
                    }
                    q.task_kind = record.contains("task_kind")
                        ? task_kind_from_string(record.at("task_kind").get<std::string>())
                        : infer_kind(answer, !q.options.empty());
                    q.gold_answer = gold_or_fail(path, lineno, answer, q.task_kind);
                    break;
                }
                case DatasetFormat::bbh_json:
                    record_error(path, lineno, "bbh_json is a whole-file format");
            }
        } catch (const json::exception& e) {
            record_error(path, lineno, std::string("missing/invalid field: ") + e.what());
        }
        validate_question(q);
        questions.push_back(std::move(q));
    }
    return questions;
}

std::vector<Question> load_bbh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.contains("examples") || !doc["examples"].is_array()) {
        throw std::runtime_error(path.string() + ": expected top-level \"examples\" array");
    }
    std::vector<Question> questions;
    int index = 0;
    for (const auto& record : doc["examples"]) {
        ++index;
        Question q;
        q.id = path.stem().string() + "-" + std::to_string(index);
        try {
            q.text = record.at("input").get<std::string>();
            std::string target = record.at("target").get<std::string>();
            q.options = parse_inline_options(q.text);
            q.task_kind = infer_kind(target, !q.options.empty());
            q.gold_answer = gold_or_fail(path, index, target, q.task_kind);
        } catch (const json::exception& e) {
            record_error(path, index, std::string("missing/invalid field: ") + e.what());
        } catch (const std::invalid_argument& e) {
            record_error(path, index, e.what());
        }
        validate_question(q);
        questions.push_back(std::move(q));
    }
    return questions;
}

} // namespace

std::vector<Question> load_dataset(const std::filesystem::path& path,
                                   DatasetFormat format) {
    if (format == DatasetFormat::bbh_json) return load_bbh(path);
    return load_jsonl(path, format);
}

// ============================================================================
// Exemplars
// ============================================================================

ExemplarSet::ExemplarSet(std::string name, std::vector<Exemplar> exemplars,
                         ExemplarStyle style)
    : name_(std::move(name)), exemplars_(std::move(exemplars)), style_(style) {
    if (exemplars_.empty()) {
        throw std::invalid_argument("ExemplarSet '" + name_ + "' must be non-empty");
    }
    for (const auto& ex : exemplars_) {
        if (trim(ex.answer).empty()) {
            throw std::invalid_argument("ExemplarSet '" + name_ +
                                        "' has an exemplar with an empty answer");
        }
    }
}

ExemplarSet ExemplarSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open exemplar file: " + path.string());

    std::string name = path.stem().string();
    ExemplarStyle style = ExemplarStyle::cot;
    std::vector<Exemplar> exemplars;

    std::vector<std::string> block;
    auto flush_block = [&]() {
        if (block.empty()) return;
        // Header block: only "key: value" metadata lines.
        bool header = true;
        for (const auto& l : block) {
            if (l.rfind("style:", 0) != 0 && l.rfind("name:", 0) != 0) {
                header = false;
                break;
            }
        }
        if (header && exemplars.empty()) {
            for (const auto& l : block) {
                if (l.rfind("style:", 0) == 0) {
                    std::string v = trim(l.substr(6));
                    if (v == "complex_cot") style = ExemplarStyle::complex_cot;
                    else if (v != "cot") {
                        throw std::runtime_error(path.string() + ": unknown style '" + v + "'");
                    }
                } else {
                    name = trim(l.substr(5));
                }
            }
            block.clear();
            return;
        }
        Exemplar ex;
        std::string* field = nullptr;
        for (const auto& l : block) {
            if (l.rfind("Q:", 0) == 0) {
                field = &ex.question;
                *field = trim(l.substr(2));
            } else if (l.rfind("A:", 0) == 0) {
                field = &ex.rationale;
                *field = trim(l.substr(2));
            } else if (l.rfind("ANSWER:", 0) == 0) {
                ex.answer = trim(l.substr(7));
                field = nullptr;
            } else if (field) {
                *field += "\n" + l;
            } else {
                throw std::runtime_error(path.string() +
                                         ": unexpected line outside Q:/A:/ANSWER: '" + l + "'");
            }
        }
        if (ex.question.empty() || ex.rationale.empty() || ex.answer.empty()) {
            throw std::runtime_error(path.string() +
                                     ": exemplar block needs Q:, A: and ANSWER: entries");
        }
        exemplars.push_back(std::move(ex));
        block.clear();
    };

    std::string line;
    while (std::getline(in, line)) {
        if (trim(line) == "---") {
            flush_block();
        } else if (!block.empty() || !trim(line).empty()) {
            block.push_back(line);
        }
    }
    flush_block();
    return ExemplarSet(std::move(name), std::move(exemplars), style);
}

std::string render_question_text(const Question& question) {
    std::string text = question.text;
    if (question.task_kind == TaskKind::multiple_choice && !question.options.empty() &&
        text.find("(A)") == std::string::npos) {
        text += "\nAnswer Choices:";
        for (const auto& opt : question.options) {
            text += " (" + opt.label + ") " + opt.text;
        }
    }
    return text;
}

std::string build_cot_prompt(const ExemplarSet& exemplars, const Question& question) {
    std::string prompt;
    for (const auto& ex : exemplars.exemplars()) {
        prompt += "Q: " + ex.question + "\n";
        prompt += "A: " + ex.rationale;
        prompt += " The answer is " + ex.answer + ".\n\n";
    }
    prompt += "Q: " + render_question_text(question) + "\n";
    prompt += "A:";
    return prompt;
}

} // namespace aor
