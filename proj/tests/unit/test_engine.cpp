#include <doctest.h>

#include <random>
#include <set>

#include "aor/engine.hpp"
#include "aor/errors.hpp"
#include "support/fig34.hpp"
#include "support/helpers.hpp"

using namespace aor;
using aor::test::chains_from_answers;
using aor::test::load_fig34;

namespace {

Question plain_question(TaskKind kind = TaskKind::multiple_choice) {
    Question q;
    q.id = "q";
    q.text = "Pick the right option.";
    q.task_kind = kind;
    if (kind == TaskKind::multiple_choice) {
        q.options = {{"A", "1"}, {"B", "2"}, {"C", "3"}, {"D", "4"}, {"E", "5"}};
    }
    return q;
}

/// Chains whose rationale is "R<i>" so scripted judges can key off it.
std::vector<ReasoningChain> named_chains(const std::vector<std::string>& answers) {
    auto chains = chains_from_answers(answers);
    for (auto& chain : chains) {
        chain.rationale_text = "R" + std::to_string(chain.index);
    }
    return chains;
}

RunState state_from_chains(std::vector<ReasoningChain> chains) {
    RunState state;
    state.buckets = bucket_by_answer(chains);
    state.chains = std::move(chains);
    return state;
}

int count_global_calls(const AuditTrail& audit) {
    int n = 0;
    for (const auto& r : audit.records()) {
        if (r.kind == "judge_call" && r.phase == "global") ++n;
    }
    return n;
}

} // namespace

// ============================================================================
// margin_decision
// ============================================================================

TEST_CASE("margin_decision finalizes at or above theta") {
    std::map<std::string, ScoreMean> means{{"A", {9, 1}}, {"B", {6, 1}}};
    MarginOutcome out = margin_decision(means, 2.0);
    CHECK(out.decision == MarginDecision::finalize);
    CHECK(out.cause == Termination::margin_met);
    CHECK(out.margin == doctest::Approx(3.0));

    means = {{"A", {8, 1}}, {"B", {7, 1}}};
    out = margin_decision(means, 2.0);
    CHECK(out.decision == MarginDecision::continue_sampling);
    CHECK(out.margin == doctest::Approx(1.0));

    // Exactly theta finalizes (>=, not >).
    means = {{"A", {8, 1}}, {"B", {6, 1}}};
    CHECK(margin_decision(means, 2.0).decision == MarginDecision::finalize);
}

TEST_CASE("margin_decision: single candidate short-circuits") {
    std::map<std::string, ScoreMean> means{{"B", {21, 3}}};
    MarginOutcome out = margin_decision(means, 2.0);
    CHECK(out.decision == MarginDecision::finalize);
    CHECK(out.cause == Termination::single_candidate);

    CHECK_THROWS_AS(margin_decision({}, 2.0), std::invalid_argument);
}

TEST_CASE("margin_decision compares rational means exactly") {
    // 25/3 vs 19/3: margin 2 exactly, theta 2 -> finalize.
    std::map<std::string, ScoreMean> means{{"A", {25, 3}}, {"B", {19, 3}}};
    CHECK(margin_decision(means, 2.0).decision == MarginDecision::finalize);
    // 25/3 vs 20/3: margin 5/3 < 2 -> continue.
    means = {{"A", {25, 3}}, {"B", {20, 3}}};
    CHECK(margin_decision(means, 2.0).decision == MarginDecision::continue_sampling);
}

// ============================================================================
// local_scoring
// ============================================================================

TEST_CASE("local scoring promotes the worked-example representative sets") {
    auto fixture = load_fig34();
    ScriptedJudge judge(fixture.script.scores, fixture.script.default_score);
    AuditTrail audit;

    // The 10 initial chains of the worked scenario.
    std::vector<ReasoningChain> chains;
    for (int i = 0; i < 10; ++i) {
        ReasoningChain chain;
        chain.index = i + 1;
        chain.rationale_text = fixture.completions()[i];
        chain.extracted_answer =
            extract_answer(chain.rationale_text, TaskKind::multiple_choice)->value;
        chains.push_back(std::move(chain));
    }
    RunState state = state_from_chains(std::move(chains));
    local_scoring(state, fixture.question, judge, fixture.config, audit);

    CHECK(state.buckets.at("A").representatives == std::vector<int>{1});
    CHECK(state.buckets.at("B").representatives == std::vector<int>{2, 8});
    CHECK(state.buckets.at("C").representatives == std::vector<int>{3, 4, 7});
    CHECK(state.buckets.at("D").representatives == std::vector<int>{5, 9});

    // Every member is scored, and sub-epsilon members are not representatives.
    for (const auto& [answer, bucket] : state.buckets) {
        for (const auto& member : bucket.members) CHECK(member.score.has_value());
        for (int rep : bucket.representatives) {
            for (const auto& member : bucket.members) {
                if (member.chain_index == rep) CHECK(*member.score >= 6);
            }
        }
    }
}

TEST_CASE("a bucket where nothing clears epsilon keeps no representatives") {
    ScriptedJudge judge({}, /*default_score=*/4); // everything below epsilon 6
    AuditTrail audit;
    RunState state = state_from_chains(named_chains({"A", "A", "B"}));
    AoRConfig cfg;
    local_scoring(state, plain_question(), judge, cfg, audit);
    CHECK(state.buckets.at("A").representatives.empty());
    CHECK(state.buckets.at("B").representatives.empty());
}

TEST_CASE("a seven-member bucket with b=5 takes two calls, anchored second") {
    std::map<std::string, int> script{{"R1", 9}, {"R2", 4}, {"R3", 7}, {"R4", 6},
                                      {"R5", 8}, {"R6", 7}, {"R7", 5}};
    ScriptedJudge judge(script, 5);
    AuditTrail audit;
    RunState state =
        state_from_chains(named_chains({"A", "A", "A", "A", "A", "A", "A"}));
    AoRConfig cfg; // b = 5
    local_scoring(state, plain_question(), judge, cfg, audit);

    auto calls = judge.calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[0].items.size() == 5);
    CHECK(calls[0].anchors.empty());
    REQUIRE(calls[1].items.size() == 2);
    // Anchors are the best (R1=9) and worst (R2=4) of the first chunk.
    REQUIRE(calls[1].anchors.size() == 2);
    CHECK(calls[1].anchors[0].chain_index == 1);
    CHECK(calls[1].anchors[0].score == 9);
    CHECK(calls[1].anchors[1].chain_index == 2);
    CHECK(calls[1].anchors[1].score == 4);

    // k=3 representatives: scores 9(R1), 8(R5), 7(R3 beats R6 on index).
    CHECK(state.buckets.at("A").representatives == std::vector<int>{1, 5, 3});
}

// ============================================================================
// global_evaluation
// ============================================================================

namespace {

/// State with pre-scored buckets: answer -> (chain index, local score).
RunState scored_state(
    const std::vector<std::pair<std::string, std::vector<std::pair<int, int>>>>& spec,
    const AoRConfig& cfg) {
    std::vector<std::string> answers;
    int max_index = 0;
    for (const auto& [answer, members] : spec) {
        for (const auto& [index, score] : members) max_index = std::max(max_index, index);
    }
    answers.assign(max_index, "");
    for (const auto& [answer, members] : spec) {
        for (const auto& [index, score] : members) answers[index - 1] = answer;
    }
    RunState state = state_from_chains(named_chains(answers));
    for (const auto& [answer, members] : spec) {
        auto& bucket = state.buckets.at(answer);
        for (const auto& [index, score] : members) {
            for (auto& member : bucket.members) {
                if (member.chain_index == index) member.score = score;
            }
        }
        // Representatives: top-k by (score desc, index asc) at epsilon 6.
        std::vector<std::pair<int, int>> eligible;
        for (const auto& member : bucket.members) {
            if (*member.score >= cfg.epsilon) {
                eligible.emplace_back(*member.score, member.chain_index);
            }
        }
        std::sort(eligible.begin(), eligible.end(), [](auto a, auto b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        if (eligible.size() > static_cast<std::size_t>(cfg.k)) eligible.resize(cfg.k);
        for (auto [score, index] : eligible) bucket.representatives.push_back(index);
    }
    return state;
}

} // namespace

TEST_CASE("global means follow the round arithmetic; argmax picks the best") {
    AoRConfig cfg; // k = 3
    RunState state = scored_state(
        {{"B", {{1, 9}, {2, 8}, {3, 8}}}, {"C", {{4, 9}, {5, 8}, {6, 7}}}}, cfg);
    // Round t picks the t-th representative: B -> R1,R2,R3; C -> R4,R5,R6.
    ScriptedJudge judge({{"global:R1", 9}, {"global:R2", 9}, {"global:R3", 9},
                         {"global:R4", 7}, {"global:R5", 8}, {"global:R6", 9}},
                        0);
    AuditTrail audit;
    GlobalEvaluation eval =
        global_evaluation(state, plain_question(), judge, cfg, audit, 1);

    CHECK(eval.means.at("B") == ScoreMean{27, 3}); // (9,9,9)
    CHECK(eval.means.at("C") == ScoreMean{24, 3}); // (7,8,9)
    CHECK(eval.best_answer == "B");

    // Independent recomputation from the per-round audit entries.
    std::map<std::string, int> sums;
    std::map<std::string, int> counts;
    for (const auto& round : eval.rounds) {
        std::set<std::string> seen;
        for (const auto& entry : round.entries) {
            CHECK(seen.insert(entry.answer).second); // one entry per answer per round
            sums[entry.answer] += entry.score;
            counts[entry.answer] += 1;
        }
    }
    for (const auto& [answer, mean] : eval.means) {
        CHECK(mean.sum == sums[answer]);
        CHECK(mean.count == counts[answer]);
    }
}

TEST_CASE("single bucket: its own mean, judged k rounds") {
    AoRConfig cfg;
    RunState state = scored_state({{"B", {{1, 9}}}}, cfg);
    ScriptedJudge judge({{"global:R1", 8}}, 0);
    AuditTrail audit;
    GlobalEvaluation eval =
        global_evaluation(state, plain_question(), judge, cfg, audit, 1);
    CHECK(eval.best_answer == "B");
    CHECK(eval.means.at("B") == ScoreMean{24, 3}); // one rep resampled all 3 rounds
    CHECK(judge.calls().size() == 3);
    for (const auto& call : judge.calls()) {
        REQUIRE(call.items.size() == 1);
        CHECK(call.items[0].rationale == "R1");
    }
}

TEST_CASE("short buckets cycle their representatives from the top") {
    AoRConfig cfg; // k = 3
    RunState state =
        scored_state({{"B", {{1, 9}, {2, 7}}}, {"C", {{3, 8}}}}, cfg);
    ScriptedJudge judge({{"global:R1", 9}, {"global:R2", 7}, {"global:R3", 6}}, 0);
    AuditTrail audit;
    GlobalEvaluation eval =
        global_evaluation(state, plain_question(), judge, cfg, audit, 1);
    // B cycles R1,R2,R1 -> 9+7+9; C resamples R3 three times.
    CHECK(eval.means.at("B") == ScoreMean{25, 3});
    CHECK(eval.means.at("C") == ScoreMean{18, 3});
}

TEST_CASE("global ties break by bucket size, then earliest chain") {
    AoRConfig cfg;
    RunState state = scored_state(
        {{"B", {{2, 9}}}, {"C", {{1, 9}, {3, 8}, {4, 8}}}}, cfg);
    // Equal means; C has 3 members to B's 1.
    ScriptedJudge judge({{"global:R1", 8}, {"global:R2", 8}, {"global:R3", 8},
                         {"global:R4", 8}},
                        8);
    AuditTrail audit;
    GlobalEvaluation eval =
        global_evaluation(state, plain_question(), judge, cfg, audit, 1);
    CHECK(eval.best_answer == "C");
}

TEST_CASE("no eligible bucket aborts the global phase") {
    AoRConfig cfg;
    RunState state = state_from_chains(named_chains({"A"}));
    ScriptedJudge judge({}, 5);
    AuditTrail audit;
    CHECK_THROWS_AS(global_evaluation(state, plain_question(), judge, cfg, audit, 1),
                    AbstainError);
}

// ============================================================================
// dynamic_round
// ============================================================================

namespace {

struct DynamicSetup {
    RunState state;
    aor::test::Fig34 fixture;
    std::unique_ptr<ScriptedJudge> judge;
};

/// The worked scenario just after its first global evaluation.
DynamicSetup fig34_after_initial() {
    DynamicSetup setup;
    setup.fixture = load_fig34();
    setup.judge = std::make_unique<ScriptedJudge>(setup.fixture.script.scores,
                                                  setup.fixture.script.default_score);
    std::vector<ReasoningChain> chains;
    for (int i = 0; i < 10; ++i) {
        ReasoningChain chain;
        chain.index = i + 1;
        chain.rationale_text = setup.fixture.completions()[i];
        chain.extracted_answer =
            extract_answer(chain.rationale_text, TaskKind::multiple_choice)->value;
        chains.push_back(std::move(chain));
    }
    setup.state = state_from_chains(std::move(chains));
    AuditTrail audit;
    local_scoring(setup.state, setup.fixture.question, *setup.judge,
                  setup.fixture.config, audit);
    return setup;
}

} // namespace

TEST_CASE("dynamic round: promote into B, open E, reject the A arrival") {
    DynamicSetup setup = fig34_after_initial();
    std::vector<ReasoningChain> arrivals;
    for (int i = 10; i < 13; ++i) {
        ReasoningChain chain;
        chain.index = i + 1;
        chain.origin_round = 1;
        chain.rationale_text = setup.fixture.completions()[i];
        chain.extracted_answer =
            extract_answer(chain.rationale_text, TaskKind::multiple_choice)->value;
        arrivals.push_back(std::move(chain));
    }
    CHECK(arrivals[0].extracted_answer == std::optional<std::string>("B")); // R11
    CHECK(arrivals[1].extracted_answer == std::optional<std::string>("E")); // R12
    CHECK(arrivals[2].extracted_answer == std::optional<std::string>("A")); // R13

    const std::size_t calls_before = setup.judge->calls().size();
    AuditTrail audit;
    DynamicOutcome out =
        dynamic_round(setup.state, arrivals, setup.fixture.question, *setup.judge,
                      setup.fixture.config, audit, 1);

    CHECK(out.reevaluate);
    // R11 (local 9) beats B's minimum representative (R8, 7): promoted second.
    CHECK(setup.state.buckets.at("B").representatives == std::vector<int>{2, 11, 8});
    // R12 opens bucket E at score 8 >= epsilon.
    CHECK(setup.state.buckets.at("E").representatives == std::vector<int>{12});
    // R13 (local 7) fails to beat A's minimum representative (R1, 9).
    CHECK(setup.state.buckets.at("A").representatives == std::vector<int>{1});
    std::set<int> promoted(out.promoted_chain_indices.begin(),
                           out.promoted_chain_indices.end());
    CHECK(promoted == std::set<int>{11, 12});

    // Anchor audit: arrivals into established buckets see best+worst; the
    // new bucket sees none.
    auto calls = setup.judge->calls();
    REQUIRE(calls.size() == calls_before + 3);
    std::map<std::string, const JudgeRequest*> by_answer;
    for (std::size_t i = calls_before; i < calls.size(); ++i) {
        by_answer[calls[i].items.front().answer] = &calls[i];
    }
    REQUIRE(by_answer.count("A"));
    REQUIRE(by_answer.count("B"));
    REQUIRE(by_answer.count("E"));
    REQUIRE(by_answer.at("A")->anchors.size() == 2);
    CHECK(by_answer.at("A")->anchors[0].chain_index == 1);  // best: R1 = 9
    CHECK(by_answer.at("A")->anchors[0].score == 9);
    CHECK(by_answer.at("A")->anchors[1].chain_index == 10); // worst: R10 = 4
    CHECK(by_answer.at("A")->anchors[1].score == 4);
    REQUIRE(by_answer.at("B")->anchors.size() == 2);
    CHECK(by_answer.at("B")->anchors[0].chain_index == 2);  // best: R2 = 9
    CHECK(by_answer.at("B")->anchors[1].chain_index == 8);  // worst: R8 = 7
    CHECK(by_answer.at("E")->anchors.empty());
}

TEST_CASE("arrival equal to the current minimum is not promoted") {
    AoRConfig cfg;
    RunState state = scored_state({{"B", {{1, 9}, {2, 7}, {3, 7}}}}, cfg);
    // New chain scores exactly 7, tying the top-k minimum: strict surpass fails.
    ScriptedJudge judge({{"local:R4", 7}}, 0);
    ReasoningChain arrival;
    arrival.index = 4;
    arrival.rationale_text = "R4";
    arrival.extracted_answer = "B";
    AuditTrail audit;
    DynamicOutcome out = dynamic_round(state, {arrival}, plain_question(), judge, cfg,
                                       audit, 1);
    CHECK_FALSE(out.reevaluate);
    CHECK(state.buckets.at("B").representatives == std::vector<int>{1, 2, 3});
}

TEST_CASE("arrivals all below epsilon change nothing") {
    AoRConfig cfg;
    RunState state = scored_state({{"B", {{1, 9}}}}, cfg);
    ScriptedJudge judge({}, 3); // below epsilon
    std::vector<ReasoningChain> arrivals;
    for (int i = 2; i <= 4; ++i) {
        ReasoningChain chain;
        chain.index = i;
        chain.rationale_text = "R" + std::to_string(i);
        chain.extracted_answer = i == 4 ? "Z" : "B"; // includes a would-be new bucket
        arrivals.push_back(std::move(chain));
    }
    AuditTrail audit;
    DynamicOutcome out =
        dynamic_round(state, arrivals, plain_question(), judge, cfg, audit, 1);
    CHECK_FALSE(out.reevaluate);
    CHECK(out.promoted_chain_indices.empty());
    CHECK(state.buckets.at("B").representatives == std::vector<int>{1});
    CHECK(state.buckets.at("Z").representatives.empty());
}

TEST_CASE("an arrival into a bucket with no representatives promotes at epsilon") {
    AoRConfig cfg;
    RunState state = scored_state({{"B", {{1, 4}}}}, cfg); // all below epsilon
    REQUIRE(state.buckets.at("B").representatives.empty());
    ScriptedJudge judge({{"local:R2", 6}}, 0);
    ReasoningChain arrival;
    arrival.index = 2;
    arrival.rationale_text = "R2";
    arrival.extracted_answer = "B";
    AuditTrail audit;
    DynamicOutcome out =
        dynamic_round(state, {arrival}, plain_question(), judge, cfg, audit, 1);
    CHECK(out.reevaluate);
    CHECK(state.buckets.at("B").representatives == std::vector<int>{2});
}

// ============================================================================
// run_aor
// ============================================================================

TEST_CASE("worked-scenario composite run finalizes B after one dynamic round") {
    auto fixture = load_fig34();
    ScriptedClient sampler(fixture.completions());
    ScriptedJudge judge(fixture.script.scores, fixture.script.default_score);

    AoRResult result = run_aor(fixture.question, sampler, judge, fixture.config,
                               aor::test::tiny_exemplars());

    REQUIRE(result.final_answer);
    CHECK(result.final_answer->value == "B");
    CHECK(result.termination == Termination::margin_met);
    CHECK(result.total_chains == 13);
    CHECK(result.rounds == 1);
    CHECK(result.state.global_means.at("B") == ScoreMean{25, 3});
}

TEST_CASE("early margin pass stops at n_initial with one evaluation") {
    AoRConfig cfg;
    cfg.n_initial = 4;
    cfg.n_max = 10;
    cfg.d = 2;
    // Two answers; B's representative dominates globally.
    ScriptedClient sampler({"steady work. The answer is (B).",
                            "rushed guess. The answer is (C).",
                            "steady work again. The answer is (B).",
                            "rushed again. The answer is (C)."});
    ScriptedJudge judge({{"local:steady work. The answer is (B).", 9},
                         {"local:steady work again. The answer is (B).", 8},
                         {"local:rushed guess. The answer is (C).", 7},
                         {"local:rushed again. The answer is (C).", 6},
                         {"global:steady work. The answer is (B).", 9},
                         {"global:steady work again. The answer is (B).", 9},
                         {"global:rushed guess. The answer is (C).", 5},
                         {"global:rushed again. The answer is (C).", 5}},
                        5);
    AoRResult result =
        run_aor(plain_question(), sampler, judge, cfg, aor::test::tiny_exemplars());
    CHECK(result.total_chains == 4);
    CHECK(result.rounds == 0);
    CHECK(result.termination == Termination::margin_met);
    REQUIRE(result.final_answer);
    CHECK(result.final_answer->value == "B");
    CHECK(sampler.seen_tags().size() == 4); // exactly n_initial samples

    int sample_batches = 0;
    for (const auto& record : result.audit) {
        if (record.kind == "sample_batch") ++sample_batches;
    }
    CHECK(sample_batches == 1);
}

TEST_CASE("uniformly scored judge runs to n_max and tie-breaks deterministically") {
    AoRConfig cfg;
    cfg.n_initial = 6;
    cfg.n_max = 12;
    cfg.d = 3;
    ScriptedClient sampler({"path one. The answer is (B).",
                            "path two. The answer is (C).",
                            "path three. The answer is (B)."});
    ScriptedJudge judge({}, 7); // everything equal, above epsilon
    AoRResult result =
        run_aor(plain_question(), sampler, judge, cfg, aor::test::tiny_exemplars());
    CHECK(result.termination == Termination::n_max_reached);
    CHECK(result.total_chains == 12);
    REQUIRE(result.final_answer);
    CHECK(result.final_answer->value == "B"); // larger bucket on equal means

    AoRResult again =
        run_aor(plain_question(), sampler, judge, cfg, aor::test::tiny_exemplars());
    CHECK(to_json(again).dump() == to_json(result).dump());
}

TEST_CASE("no extractable answer ever: abstain at n_max") {
    AoRConfig cfg;
    cfg.n_initial = 3;
    cfg.n_max = 6;
    cfg.d = 3;
    ScriptedClient sampler({"I give up.", "No clue either.", "Still nothing."});
    ScriptedJudge judge({}, 9);
    AoRResult result =
        run_aor(plain_question(), sampler, judge, cfg, aor::test::tiny_exemplars());
    CHECK(result.termination == Termination::abstain);
    CHECK_FALSE(result.final_answer.has_value());
    CHECK(result.total_chains == 6);
}

TEST_CASE("a no-change dynamic round issues no fresh global judging") {
    AoRConfig cfg;
    cfg.n_initial = 4;
    cfg.n_max = 8;
    cfg.d = 2;
    cfg.theta = 3.0; // unreachable with these scripted scores
    ScriptedClient sampler({"first path. The answer is (B).",
                            "second path. The answer is (C)."});
    // All chains score identically: arrivals never beat the incumbents.
    ScriptedJudge judge({}, 7);

    AoRResult result =
        run_aor(plain_question(), sampler, judge, cfg, aor::test::tiny_exemplars());
    CHECK(result.termination == Termination::n_max_reached);

    // The initial evaluation ran; dynamic rounds promoted nothing, so no
    // further global calls appear.
    int epochs = 0;
    for (const auto& record : result.audit) {
        if (record.kind == "judge_call" && record.phase == "global") {
            epochs = std::max(epochs, record.epoch);
        }
    }
    CHECK(epochs == 1);
    CHECK(result.rounds == 2); // (8 - 4) / 2 sampling rounds still happened
}

TEST_CASE("single-answer runs finalize as single_candidate") {
    AoRConfig cfg;
    cfg.n_initial = 3;
    cfg.n_max = 6;
    ScriptedClient sampler({"same way. The answer is 8.",
                            "same again. The answer is 8.",
                            "once more. The answer is 8."});
    ScriptedJudge judge({}, 7);
    AoRResult result = run_aor(plain_question(TaskKind::numeric), sampler, judge, cfg,
                               aor::test::tiny_exemplars());
    CHECK(result.termination == Termination::single_candidate);
    REQUIRE(result.final_answer);
    CHECK(result.final_answer->value == "8");
    CHECK(result.total_chains == 3);
}

TEST_CASE("make_chains extracts, indexes, and tags origin rounds") {
    std::vector<Completion> completions;
    Completion a;
    a.text = "work shown. The answer is 12.";
    a.usage = {100, 20};
    Completion b;
    b.text = "nothing useful";
    completions = {a, b};
    auto chains = make_chains(completions, TaskKind::numeric, 5, 2);
    REQUIRE(chains.size() == 2);
    CHECK(chains[0].index == 5);
    CHECK(chains[1].index == 6);
    CHECK(chains[0].extracted_answer == std::optional<std::string>("12"));
    CHECK_FALSE(chains[1].extracted_answer.has_value());
    CHECK(chains[0].origin_round == 2);
    CHECK(chains[0].usage == TokenUsage{100, 20});
}
