#pragma once

/**
 * Dataset ingestion and few-shot prompt assembly.
 *
 * Supported dataset formats (one committed fixture each under
 * tests/fixtures/):
 *   gsm8k_jsonl  - {"question": "...", "answer": "... #### 18"} per line;
 *                  numeric questions, gold after "####".
 *   aqua_jsonl   - {"question", "options": ["A)...", ...], "correct": "B"};
 *                  multiple-choice questions.
 *   bbh_json     - {"examples": [{"input": "...", "target": "(B)"}]};
 *                  options parsed from "Options:" lines in the input when
 *                  present; target kind inferred per record (letter /
 *                  number / yes-no), generic letter fallback otherwise.
 *   generic_jsonl- {"id"?, "question", "answer", "task_kind"?, "options"?};
 *                  task kind inferred from the record when absent.
 *
 * Exemplar files are plain text: blocks separated by lines containing only
 * "---"; each block has "Q:" line(s), "A:" line(s) and a final
 * "ANSWER: <value>" line. An optional leading block may set
 * "style: cot|complex_cot" and "name: <set name>".
 */

#include <filesystem>
#include <string>
#include <vector>

#include "aor/core.hpp"

namespace aor {

enum class DatasetFormat { gsm8k_jsonl, aqua_jsonl, bbh_json, generic_jsonl };

const char* to_string(DatasetFormat format);
DatasetFormat dataset_format_from_string(const std::string& name);

/// Loads and canonicalizes a dataset. Malformed records raise
/// std::runtime_error naming the file and record (line or index).
std::vector<Question> load_dataset(const std::filesystem::path& path,
                                   DatasetFormat format);

enum class ExemplarStyle { cot, complex_cot };

struct Exemplar {
    std::string question;
    std::string rationale;
    std::string answer;
};

class ExemplarSet {
public:
    /// Throws std::invalid_argument when `exemplars` is empty.
    ExemplarSet(std::string name, std::vector<Exemplar> exemplars,
                ExemplarStyle style = ExemplarStyle::cot);

    static ExemplarSet load(const std::filesystem::path& path);

    const std::string& name() const { return name_; }
    const std::vector<Exemplar>& exemplars() const { return exemplars_; }
    ExemplarStyle style() const { return style_; }

private:
    std::string name_;
    std::vector<Exemplar> exemplars_;
    ExemplarStyle style_;
};

/// Few-shot prompt: each exemplar as a Q/A block whose answer line ends in
/// "The answer is <ans>.", then the target question and an empty answer
/// slot. Byte-stable for fixed inputs.
std::string build_cot_prompt(const ExemplarSet& exemplars, const Question& question);

/// The question text as rendered into prompts (options appended for
/// multiple choice).
std::string render_question_text(const Question& question);

} // namespace aor
