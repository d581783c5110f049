#include <doctest.h>

#include <fstream>

#include "aor/data.hpp"
#include "aor/extraction.hpp"
#include "support/helpers.hpp"

using namespace aor;
using aor::test::fixtures_dir;
using aor::test::assets_dir;
using aor::test::make_temp_dir;

TEST_CASE("gsm8k loader: numeric questions, gold after the #### marker") {
    auto questions = load_dataset(fixtures_dir() / "gsm8k_sample.jsonl",
                                  DatasetFormat::gsm8k_jsonl);
    REQUIRE(questions.size() == 3);
    CHECK(questions[0].task_kind == TaskKind::numeric);
    CHECK(questions[0].gold_answer == std::optional<std::string>("16"));
    CHECK(questions[1].gold_answer == std::optional<std::string>("1000")); // "1,000"
    CHECK(questions[2].gold_answer == std::optional<std::string>("18"));
}

TEST_CASE("aqua loader: options and lettered gold") {
    auto questions = load_dataset(fixtures_dir() / "aqua_sample.jsonl",
                                  DatasetFormat::aqua_jsonl);
    REQUIRE(questions.size() == 2);
    CHECK(questions[0].task_kind == TaskKind::multiple_choice);
    REQUIRE(questions[0].options.size() == 5);
    CHECK(questions[0].options[1].label == "B");
    CHECK(questions[0].options[1].text == "25");
    CHECK(questions[0].gold_answer == std::optional<std::string>("C"));
}

TEST_CASE("bbh loader: inline options, per-record kind inference") {
    auto questions =
        load_dataset(fixtures_dir() / "bbh_sample.json", DatasetFormat::bbh_json);
    REQUIRE(questions.size() == 3);
    CHECK(questions[0].task_kind == TaskKind::multiple_choice);
    REQUIRE(questions[0].options.size() == 3);
    CHECK(questions[0].gold_answer == std::optional<std::string>("B"));
    CHECK(questions[1].task_kind == TaskKind::numeric);
    CHECK(questions[1].gold_answer == std::optional<std::string>("6"));
    CHECK(questions[2].task_kind == TaskKind::boolean_answer);
    CHECK(questions[2].gold_answer == std::optional<std::string>("true"));
}

TEST_CASE("every fixture gold answer canonicalizes under its kind") {
    const std::vector<std::pair<std::string, DatasetFormat>> files = {
        {"gsm8k_sample.jsonl", DatasetFormat::gsm8k_jsonl},
        {"aqua_sample.jsonl", DatasetFormat::aqua_jsonl},
        {"bbh_sample.json", DatasetFormat::bbh_json},
        {"generic_sample.jsonl", DatasetFormat::generic_jsonl},
        {"fig34_dataset.jsonl", DatasetFormat::generic_jsonl},
    };
    for (const auto& [name, format] : files) {
        auto questions = load_dataset(fixtures_dir() / name, format);
        CHECK_FALSE(questions.empty());
        for (const auto& q : questions) {
            REQUIRE_MESSAGE(q.gold_answer, name << "/" << q.id);
            auto canon = canonicalize(*q.gold_answer, q.task_kind);
            REQUIRE_MESSAGE(canon, name << "/" << q.id);
            CHECK(canon->value == *q.gold_answer); // already canonical
        }
    }
}

TEST_CASE("empty file loads as an empty dataset") {
    auto dir = make_temp_dir("aor-data");
    auto path = dir / "empty.jsonl";
    std::ofstream(path).close();
    CHECK(load_dataset(path, DatasetFormat::gsm8k_jsonl).empty());
}

TEST_CASE("malformed records are reported with their line number") {
    try {
        load_dataset(fixtures_dir() / "gsm8k_bad.jsonl", DatasetFormat::gsm8k_jsonl);
        FAIL("expected a parse failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("record 2") != std::string::npos);
    }
}

TEST_CASE("exemplar files parse with style header and block structure") {
    auto set = ExemplarSet::load(assets_dir() / "exemplars/gsm8k_cot.txt");
    CHECK(set.name() == "gsm8k_cot");
    CHECK(set.style() == ExemplarStyle::cot);
    CHECK(set.exemplars().size() == 8);

    auto complex = ExemplarSet::load(assets_dir() / "exemplars/gsm8k_complex_cot.txt");
    CHECK(complex.style() == ExemplarStyle::complex_cot);
    CHECK(complex.exemplars().size() == 3);
    CHECK(complex.exemplars()[0].rationale.find('\n') != std::string::npos);
}

TEST_CASE("empty exemplar sets are rejected at construction") {
    CHECK_THROWS_AS(ExemplarSet("empty", {}), std::invalid_argument);
}

TEST_CASE("prompt assembly: 8 exemplars yield 8 trigger phrases before the target") {
    auto set = ExemplarSet::load(assets_dir() / "exemplars/gsm8k_cot.txt");
    Question q;
    q.id = "q";
    q.text = "A pond gains 3 ducks every day. How many ducks arrive in 5 days?";
    q.task_kind = TaskKind::numeric;

    const std::string prompt = build_cot_prompt(set, q);
    const std::string target_marker = "Q: " + q.text;
    const std::size_t target_at = prompt.find(target_marker);
    REQUIRE(target_at != std::string::npos);

    int triggers = 0;
    std::size_t pos = 0;
    while ((pos = prompt.find("The answer is", pos)) != std::string::npos &&
           pos < target_at) {
        ++triggers;
        ++pos;
    }
    CHECK(triggers == 8);
    CHECK(prompt.rfind("A:") == prompt.size() - 2); // empty answer slot at the end
}

TEST_CASE("prompt assembly is byte-stable and injective in the target question") {
    auto set = ExemplarSet::load(assets_dir() / "exemplars/aqua_cot.txt");
    Question q;
    q.id = "q";
    q.text = "Which number is prime?";
    q.task_kind = TaskKind::multiple_choice;
    q.options = {{"A", "4"}, {"B", "7"}, {"C", "9"}};

    CHECK(build_cot_prompt(set, q) == build_cot_prompt(set, q));
    CHECK(build_cot_prompt(set, q).find("Answer Choices: (A) 4 (B) 7 (C) 9") !=
          std::string::npos);

    Question q2 = q;
    q2.text = "Which number is prime??";
    CHECK(build_cot_prompt(set, q) != build_cot_prompt(set, q2));
}
