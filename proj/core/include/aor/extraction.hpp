#pragma once

/**
 * Answer extraction from generated rationales, canonicalization, and
 * answer equality.
 *
 * Extraction scans for the last occurrence of the trigger phrase
 * "the answer is" (case-insensitive) and parses whatever follows according
 * to the task kind:
 *   numeric  -> first numeric token; "$", "%", thousands commas and trailing
 *               periods stripped; "a/b" fractions evaluated; trailing unit
 *               words ("18 dollars") are dropped because only the numeric
 *               token is taken. Canonical form is the shortest decimal
 *               string that round-trips the parsed value.
 *   choice   -> first single-letter token, accepting "(B)", "B)", "B.",
 *               "option B"; canonical form is one uppercase letter.
 *   boolean  -> first yes/true/no/false token; canonical "true"/"false".
 *
 * Absence of a parseable answer is a value (nullopt), never an error.
 */

#include <optional>
#include <string>

#include "aor/core.hpp"

namespace aor {

inline constexpr const char* kAnswerTrigger = "the answer is";

struct CanonicalAnswer {
    TaskKind kind = TaskKind::numeric;
    std::string value;

    // Structural identity; semantic comparison is answers_equal().
    bool operator==(const CanonicalAnswer&) const = default;
};

/// Last-trigger-phrase extraction as described above. Pure.
std::optional<CanonicalAnswer> extract_answer(const std::string& text, TaskKind kind);

/// Numeric answers compare within relative tolerance 1e-6 (exact for
/// integers); choice and boolean answers compare by string equality.
/// Throws std::invalid_argument when kinds differ.
bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b);

// Canonicalizers used by dataset loading and by extraction itself.
// They accept a bare answer string (no trigger phrase required).
std::optional<std::string> canonicalize_numeric(const std::string& raw);
std::optional<std::string> canonicalize_choice(const std::string& raw);
std::optional<std::string> canonicalize_boolean(const std::string& raw);
std::optional<CanonicalAnswer> canonicalize(const std::string& raw, TaskKind kind);

} // namespace aor
