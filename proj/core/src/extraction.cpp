#include "aor/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace aor {

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Position just past the last case-insensitive occurrence of the trigger
/// phrase, or npos.
std::size_t after_last_trigger(const std::string& text) {
    const std::string lowered = to_lower(text);
    const std::string trigger = kAnswerTrigger;
    std::size_t pos = lowered.rfind(trigger);
    if (pos == std::string::npos) return std::string::npos;
    return pos + trigger.size();
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Shortest decimal string that round-trips `value`.
std::string render_double(double value) {
    if (value == 0.0) return "0"; // normalize -0
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Parses one number starting at `i` in `s` (sign, digits with optional
/// thousands commas, optional fraction part, optional $ prefix already
/// consumed by caller). Advances `i` past the token. Returns nullopt when
/// the digits do not form a valid number.
std::optional<double> parse_number_at(const std::string& s, std::size_t& i) {
    std::string digits;
    bool negative = false;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) {
        negative = (s[i] == '-');
        ++i;
        if (i < s.size() && s[i] == '$') ++i; // "-$5"
    }
    if (i >= s.size() || !is_digit(s[i])) return std::nullopt;
    while (i < s.size()) {
        char c = s[i];
        if (is_digit(c)) {
            digits.push_back(c);
            ++i;
        } else if (c == ',' && i + 1 < s.size() && is_digit(s[i + 1])) {
            ++i; // thousands separator
        } else if (c == '.' && i + 1 < s.size() && is_digit(s[i + 1]) &&
                   digits.find('.') == std::string::npos) {
            digits.push_back('.');
            ++i;
        } else {
            break;
        }
    }
    double value = 0.0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
        return std::nullopt;
    }
    return negative ? -value : value;
}

} // namespace

std::optional<std::string> canonicalize_numeric(const std::string& raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '$') continue; // currency prefix glued to the number
        if (!is_digit(c) && c != '-' && c != '+') continue;
        // Signs must be attached to digits (possibly through '$').
        if ((c == '-' || c == '+')) {
            std::size_t next = i + 1;
            if (next < raw.size() && raw[next] == '$') ++next;
            if (next >= raw.size() || !is_digit(raw[next])) continue;
        }
        std::size_t pos = i;
        auto numerator = parse_number_at(raw, pos);
        if (!numerator) continue;
        double value = *numerator;
        // Fraction "a/b" or "a / b".
        std::size_t slash = pos;
        while (slash < raw.size() && raw[slash] == ' ') ++slash;
        if (slash < raw.size() && raw[slash] == '/') {
            ++slash;
            while (slash < raw.size() && raw[slash] == ' ') ++slash;
            std::size_t dpos = slash;
            auto denominator = parse_number_at(raw, dpos);
            if (denominator && *denominator != 0.0) {
                value /= *denominator;
            }
        }
        // "%" and trailing unit words are dropped with the rest of the text.
        return render_double(value);
    }
    return std::nullopt;
}

std::optional<std::string> canonicalize_choice(const std::string& raw) {
    // Tokenize into alphanumeric runs; the first run that is exactly one
    // alphabetic character is the choice. Handles "(B)", "B)", "B.",
    // "option B" uniformly.
    std::size_t i = 0;
    while (i < raw.size()) {
        while (i < raw.size() && !std::isalnum(static_cast<unsigned char>(raw[i]))) ++i;
        std::size_t start = i;
        while (i < raw.size() && std::isalnum(static_cast<unsigned char>(raw[i]))) ++i;
        if (start == i) break;
        if (i - start == 1 && std::isalpha(static_cast<unsigned char>(raw[start]))) {
            return std::string(1, static_cast<char>(
                std::toupper(static_cast<unsigned char>(raw[start]))));
        }
    }
    return std::nullopt;
}

std::optional<std::string> canonicalize_boolean(const std::string& raw) {
    std::size_t i = 0;
    while (i < raw.size()) {
        while (i < raw.size() && !std::isalpha(static_cast<unsigned char>(raw[i]))) ++i;
        std::size_t start = i;
        while (i < raw.size() && std::isalpha(static_cast<unsigned char>(raw[i]))) ++i;
        if (start == i) break;
        const std::string token = to_lower(raw.substr(start, i - start));
        if (token == "yes" || token == "true") return std::string("true");
        if (token == "no" || token == "false") return std::string("false");
    }
    return std::nullopt;
}

std::optional<CanonicalAnswer> canonicalize(const std::string& raw, TaskKind kind) {
    std::optional<std::string> value;
    switch (kind) {
        case TaskKind::numeric: value = canonicalize_numeric(raw); break;
        case TaskKind::multiple_choice: value = canonicalize_choice(raw); break;
        case TaskKind::boolean_answer: value = canonicalize_boolean(raw); break;
    }
    if (!value) return std::nullopt;
    return CanonicalAnswer{kind, *value};
}

std::optional<CanonicalAnswer> extract_answer(const std::string& text, TaskKind kind) {
    const std::size_t start = after_last_trigger(text);
    if (start == std::string::npos) return std::nullopt;
    return canonicalize(text.substr(start), kind);
}

bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b) {
    if (a.kind != b.kind) {
        throw std::invalid_argument("answers_equal: kind mismatch");
    }
    if (a.kind != TaskKind::numeric) {
        return a.value == b.value;
    }
    double x = 0.0, y = 0.0;
    auto rx = std::from_chars(a.value.data(), a.value.data() + a.value.size(), x);
    auto ry = std::from_chars(b.value.data(), b.value.data() + b.value.size(), y);
    if (rx.ec != std::errc() || ry.ec != std::errc()) {
        return a.value == b.value; // non-numeric payload: fall back to string equality
    }
    if (x == y) return true;
    const bool both_integral =
        std::nearbyint(x) == x && std::nearbyint(y) == y &&
        std::abs(x) < 9.0e15 && std::abs(y) < 9.0e15;
    if (both_integral) return false; // integers compare exactly
    const double scale = std::max(std::abs(x), std::abs(y));
    return std::abs(x - y) <= 1e-6 * scale;
}

} // namespace aor
