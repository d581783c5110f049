#include "aor/engine.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "aor/errors.hpp"

namespace aor {

namespace {

const ReasoningChain& chain_at(const RunState& state, int index) {
    for (const auto& chain : state.chains) {
        if (chain.index == index) return chain;
    }
    throw std::logic_error("unknown chain index " + std::to_string(index));
}

int score_of(const AnswerBucket& bucket, int chain_index) {
    for (const auto& member : bucket.members) {
        if (member.chain_index == chain_index && member.score) return *member.score;
    }
    throw std::logic_error("chain " + std::to_string(chain_index) +
                           " has no score in bucket " + bucket.answer);
}

/// Top-k members with score >= epsilon, score descending then index
/// ascending.
std::vector<int> pick_representatives(const AnswerBucket& bucket, const AoRConfig& cfg) {
    std::vector<std::pair<int, int>> scored; // (score, index)
    for (const auto& member : bucket.members) {
        if (member.score && static_cast<double>(*member.score) >= cfg.epsilon) {
            scored.emplace_back(*member.score, member.chain_index);
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > static_cast<std::size_t>(cfg.k)) scored.resize(cfg.k);
    std::vector<int> reps;
    reps.reserve(scored.size());
    for (const auto& [score, index] : scored) reps.push_back(index);
    return reps;
}

/// Best and worst scored chains of a bucket, deduplicated, ties to the
/// earlier chain.
std::vector<JudgeAnchor> bucket_anchors(const RunState& state,
                                        const AnswerBucket& bucket) {
    const BucketMember* best = nullptr;
    const BucketMember* worst = nullptr;
    for (const auto& member : bucket.members) {
        if (!member.score) continue;
        if (!best || *member.score > *best->score ||
            (*member.score == *best->score && member.chain_index < best->chain_index)) {
            best = &member;
        }
        if (!worst || *member.score < *worst->score ||
            (*member.score == *worst->score && member.chain_index < worst->chain_index)) {
            worst = &member;
        }
    }
    std::vector<JudgeAnchor> anchors;
    if (!best) return anchors;
    const auto& best_chain = chain_at(state, best->chain_index);
    anchors.push_back(JudgeAnchor{best_chain.rationale_text, bucket.answer,
                                  *best->score, best->chain_index});
    if (worst->chain_index != best->chain_index) {
        const auto& worst_chain = chain_at(state, worst->chain_index);
        anchors.push_back(JudgeAnchor{worst_chain.rationale_text, bucket.answer,
                                      *worst->score, worst->chain_index});
    }
    return anchors;
}

int candidate_answer_count(const RunState& state) {
    return static_cast<int>(state.buckets.size());
}

/// One judge call over `chain_indices` (all members of `bucket`), recording
/// scores into the bucket and emitting an audit record.
void judge_local_chunk(RunState& state, AnswerBucket& bucket,
                       const std::vector<int>& chain_indices,
                       const std::vector<JudgeAnchor>& anchors,
                       const Question& question, JudgeInterface& judge,
                       AuditTrail& audit, int round) {
    JudgeRequest request;
    request.phase = JudgePhase::local;
    request.anchors = anchors;
    request.context.question_text = render_question_text(question);
    request.context.bucket_size = static_cast<int>(bucket.members.size());
    request.context.candidate_answers = candidate_answer_count(state);
    int display = 0;
    for (int index : chain_indices) {
        const auto& chain = chain_at(state, index);
        request.items.push_back(JudgeItem{++display, chain.rationale_text,
                                          bucket.answer, index,
                                          static_cast<int>(bucket.members.size())});
    }

    ScoreReport report = judge.score(request);
    if (report.scores.size() != chain_indices.size()) {
        throw std::logic_error("judge returned wrong score count");
    }
    for (std::size_t i = 0; i < chain_indices.size(); ++i) {
        for (auto& member : bucket.members) {
            if (member.chain_index == chain_indices[i]) {
                member.score = report.scores[i];
            }
        }
    }

    AuditRecord record;
    record.question_id = question.id;
    record.kind = "judge_call";
    record.phase = "local";
    record.round = round;
    record.bucket = bucket.answer;
    for (int index : chain_indices) {
        record.items.push_back(AuditItem{index, bucket.answer});
    }
    for (const auto& anchor : request.anchors) {
        record.anchors.push_back(AuditAnchor{anchor.chain_index, anchor.score});
    }
    record.scores = report.scores;
    record.usage = report.usage;
    record.prompt = report.prompt;
    record.raw_text = report.raw_text;
    audit.emit(std::move(record));
}

} // namespace

// ============================================================================
// local_scoring
// ============================================================================

void local_scoring(RunState& state, const Question& question, JudgeInterface& judge,
                   const AoRConfig& cfg, AuditTrail& audit) {
    for (auto& [answer, bucket] : state.buckets) {
        std::vector<int> pending;
        for (const auto& member : bucket.members) {
            if (!member.score) pending.push_back(member.chain_index);
        }
        for (std::size_t offset = 0; offset < pending.size();
             offset += static_cast<std::size_t>(cfg.b)) {
            const std::size_t end =
                std::min(pending.size(), offset + static_cast<std::size_t>(cfg.b));
            std::vector<int> chunk(pending.begin() + offset, pending.begin() + end);
            // First chunk has nothing scored yet; later chunks anchor on the
            // bucket's current best and worst.
            std::vector<JudgeAnchor> anchors =
                offset == 0 ? std::vector<JudgeAnchor>{} : bucket_anchors(state, bucket);
            judge_local_chunk(state, bucket, chunk, anchors, question, judge, audit,
                              /*round=*/0);
        }
        bucket.representatives = pick_representatives(bucket, cfg);
    }
}

// ============================================================================
// global_evaluation
// ============================================================================

namespace {

int min_member_index(const AnswerBucket& bucket) {
    int best = std::numeric_limits<int>::max();
    for (const auto& member : bucket.members) best = std::min(best, member.chain_index);
    return best;
}

std::string pick_best_answer(const std::map<std::string, ScoreMean>& means,
                             const std::map<std::string, AnswerBucket>& buckets) {
    std::string best;
    for (const auto& [answer, mean] : means) {
        if (best.empty()) {
            best = answer;
            continue;
        }
        const ScoreMean& incumbent = means.at(best);
        if (mean_less(incumbent, mean)) {
            best = answer;
        } else if (!mean_less(mean, incumbent)) {
            // Exact tie: larger bucket wins, then earliest chain index.
            const auto& cand = buckets.at(answer);
            const auto& held = buckets.at(best);
            if (cand.members.size() > held.members.size() ||
                (cand.members.size() == held.members.size() &&
                 min_member_index(cand) < min_member_index(held))) {
                best = answer;
            }
        }
    }
    return best;
}

} // namespace

GlobalEvaluation global_evaluation(const RunState& state, const Question& question,
                                   JudgeInterface& judge, const AoRConfig& cfg,
                                   AuditTrail& audit, int epoch) {
    std::vector<const AnswerBucket*> eligible;
    for (const auto& [answer, bucket] : state.buckets) {
        if (!bucket.representatives.empty()) eligible.push_back(&bucket);
    }
    if (eligible.empty()) {
        throw AbstainError("global_evaluation: no bucket has representatives");
    }

    GlobalEvaluation eval;
    for (int t = 1; t <= cfg.k; ++t) {
        GlobalRoundScore round_score;
        round_score.round = t;

        // Round t judges each bucket's t-th representative, cycling from the
        // top when a bucket has fewer than k.
        std::vector<std::pair<const AnswerBucket*, int>> lineup; // (bucket, chain)
        for (const auto* bucket : eligible) {
            const auto& reps = bucket->representatives;
            lineup.emplace_back(bucket, reps[(t - 1) % reps.size()]);
        }

        for (std::size_t offset = 0; offset < lineup.size();
             offset += static_cast<std::size_t>(cfg.b)) {
            const std::size_t end =
                std::min(lineup.size(), offset + static_cast<std::size_t>(cfg.b));

            JudgeRequest request;
            request.phase = JudgePhase::global;
            request.context.question_text = render_question_text(question);
            request.context.candidate_answers = candidate_answer_count(state);
            int display = 0;
            for (std::size_t i = offset; i < end; ++i) {
                const auto& [bucket, chain_index] = lineup[i];
                const auto& chain = chain_at(state, chain_index);
                request.items.push_back(
                    JudgeItem{++display, chain.rationale_text, bucket->answer,
                              chain_index, static_cast<int>(bucket->members.size())});
            }

            ScoreReport report = judge.score(request);
            if (report.scores.size() != request.items.size()) {
                throw std::logic_error("judge returned wrong score count");
            }

            AuditRecord record;
            record.question_id = question.id;
            record.kind = "judge_call";
            record.phase = "global";
            record.round = t;
            record.epoch = epoch;
            for (std::size_t i = offset; i < end; ++i) {
                const auto& [bucket, chain_index] = lineup[i];
                const int score = report.scores[i - offset];
                record.items.push_back(AuditItem{chain_index, bucket->answer});
                round_score.entries.push_back(
                    GlobalRoundScore::Entry{bucket->answer, chain_index, score});
                auto& mean = eval.means[bucket->answer];
                mean.sum += score;
                mean.count += 1;
            }
            record.scores = report.scores;
            record.usage = report.usage;
            record.prompt = report.prompt;
            record.raw_text = report.raw_text;
            audit.emit(std::move(record));
        }
        eval.rounds.push_back(std::move(round_score));
    }

    eval.best_answer = pick_best_answer(eval.means, state.buckets);
    return eval;
}

// ============================================================================
// margin_decision
// ============================================================================

MarginOutcome margin_decision(const std::map<std::string, ScoreMean>& means,
                              double theta) {
    if (means.empty()) {
        throw std::invalid_argument("margin_decision: no scored answers");
    }
    MarginOutcome outcome;
    if (means.size() == 1) {
        outcome.decision = MarginDecision::finalize;
        outcome.cause = Termination::single_candidate;
        outcome.margin = 0.0;
        return outcome;
    }
    const ScoreMean* best = nullptr;
    const ScoreMean* second = nullptr;
    for (const auto& [answer, mean] : means) {
        if (!best || mean_less(*best, mean)) {
            second = best;
            best = &mean;
        } else if (!second || mean_less(*second, mean)) {
            second = &mean;
        }
    }
    outcome.margin = best->mean() - second->mean();
    // Exact: sum_a*c_b - sum_b*c_a >= theta*c_a*c_b (small integers, so the
    // double products are exact for integral theta).
    const double lhs = static_cast<double>(best->sum) * second->count -
                       static_cast<double>(second->sum) * best->count;
    const double rhs = theta * best->count * second->count;
    if (lhs >= rhs) {
        outcome.decision = MarginDecision::finalize;
        outcome.cause = Termination::margin_met;
    } else {
        outcome.decision = MarginDecision::continue_sampling;
    }
    return outcome;
}

// ============================================================================
// dynamic_round
// ============================================================================

DynamicOutcome dynamic_round(RunState& state, std::vector<ReasoningChain> new_chains,
                             const Question& question, JudgeInterface& judge,
                             const AoRConfig& cfg, AuditTrail& audit, int round) {
    DynamicOutcome outcome;
    const double gate = cfg.new_chain_gate == AoRConfig::NewChainGate::epsilon_threshold
        ? cfg.epsilon
        : cfg.theta;

    // Group arrivals by answer, preserving index order within groups.
    std::map<std::string, std::vector<int>> arrivals;
    for (auto& chain : new_chains) {
        if (chain.extracted_answer) {
            arrivals[*chain.extracted_answer].push_back(chain.index);
        }
        state.chains.push_back(std::move(chain));
    }

    for (const auto& [answer, indices] : arrivals) {
        auto it = state.buckets.find(answer);
        const bool new_bucket = it == state.buckets.end();
        if (new_bucket) {
            auto& bucket = state.buckets[answer];
            bucket.answer = answer;
            it = state.buckets.find(answer);
        }
        AnswerBucket& bucket = it->second;
        // Anchors come from the pre-existing scored population.
        std::vector<JudgeAnchor> anchors =
            new_bucket ? std::vector<JudgeAnchor>{} : bucket_anchors(state, bucket);
        for (int index : indices) {
            bucket.members.push_back(BucketMember{index, std::nullopt});
        }

        for (std::size_t offset = 0; offset < indices.size();
             offset += static_cast<std::size_t>(cfg.b)) {
            const std::size_t end =
                std::min(indices.size(), offset + static_cast<std::size_t>(cfg.b));
            std::vector<int> chunk(indices.begin() + offset, indices.begin() + end);
            judge_local_chunk(state, bucket, chunk, anchors, question, judge, audit,
                              round);
        }

        if (new_bucket) {
            // A bucket born this round: its representatives are simply the
            // top-k arrivals that clear the gate.
            std::vector<std::pair<int, int>> cleared; // (score, index)
            for (int index : indices) {
                const int score = score_of(bucket, index);
                if (static_cast<double>(score) >= gate) cleared.emplace_back(score, index);
            }
            std::sort(cleared.begin(), cleared.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            if (cleared.size() > static_cast<std::size_t>(cfg.k)) cleared.resize(cfg.k);
            for (const auto& [score, index] : cleared) {
                bucket.representatives.push_back(index);
                outcome.promoted_chain_indices.push_back(index);
            }
            if (!bucket.representatives.empty()) outcome.reevaluate = true;
            continue;
        }

        // Arrivals into an established bucket, one at a time in sampling
        // order: the score must clear the gate and strictly beat the current
        // minimum representative score (ties never reshuffle the set).
        for (int index : indices) {
            const int score = score_of(bucket, index);
            if (static_cast<double>(score) < gate) continue;
            if (!bucket.representatives.empty()) {
                int current_min = std::numeric_limits<int>::max();
                for (int rep : bucket.representatives) {
                    current_min = std::min(current_min, score_of(bucket, rep));
                }
                if (score <= current_min) continue;
            }
            // Re-rank this chain against the incumbents.
            std::vector<int> pool = bucket.representatives;
            pool.push_back(index);
            std::sort(pool.begin(), pool.end(), [&](int a, int b) {
                int sa = score_of(bucket, a), sb = score_of(bucket, b);
                if (sa != sb) return sa > sb;
                return a < b;
            });
            if (pool.size() > static_cast<std::size_t>(cfg.k)) pool.resize(cfg.k);
            if (pool != bucket.representatives) {
                bucket.representatives = std::move(pool);
                outcome.reevaluate = true;
                outcome.promoted_chain_indices.push_back(index);
            }
        }
    }
    return outcome;
}

// ============================================================================
// run_aor
// ============================================================================

std::vector<ReasoningChain> make_chains(const std::vector<Completion>& completions,
                                        TaskKind kind, int first_index,
                                        int origin_round) {
    std::vector<ReasoningChain> chains;
    chains.reserve(completions.size());
    int index = first_index;
    for (const auto& completion : completions) {
        ReasoningChain chain;
        chain.index = index++;
        chain.rationale_text = completion.text;
        chain.usage = completion.usage;
        chain.origin_round = origin_round;
        if (auto answer = extract_answer(completion.text, kind)) {
            chain.extracted_answer = answer->value;
        }
        chains.push_back(std::move(chain));
    }
    return chains;
}

namespace {

void emit_sample_audit(AuditTrail& audit, const Question& question,
                       const std::vector<ReasoningChain>& chains, int round) {
    AuditRecord record;
    record.question_id = question.id;
    record.kind = "sample_batch";
    record.round = round;
    for (const auto& chain : chains) {
        record.items.push_back(AuditItem{chain.index, chain.extracted_answer});
        record.usage += chain.usage;
    }
    audit.emit(std::move(record));
}

TokenUsage total_usage(const RunState& state, const std::vector<AuditRecord>& records) {
    TokenUsage usage;
    for (const auto& chain : state.chains) usage += chain.usage;
    for (const auto& record : records) {
        if (record.kind == "judge_call") usage += record.usage;
    }
    return usage;
}

bool any_representatives(const RunState& state) {
    for (const auto& [answer, bucket] : state.buckets) {
        if (!bucket.representatives.empty()) return true;
    }
    return false;
}

} // namespace

AoRResult run_aor(const Question& question, CompletionClient& client,
                  JudgeInterface& judge, const AoRConfig& raw_cfg,
                  const ExemplarSet& exemplars) {
    const AoRConfig cfg = validate_config(raw_cfg);
    validate_question(question);

    const std::string prompt = build_cot_prompt(exemplars, question);
    SamplingParams params;
    params.temperature =
        cfg.temperature.value_or(default_temperature(client.model_name()));
    params.max_tokens = cfg.max_tokens_chain;

    AuditTrail audit;
    RunState state;

    // Initial batch: tags and indices 1..n_initial.
    params.sample_tag = 1;
    auto completions = sample_chains(client, prompt, cfg.n_initial, params);
    state.chains = make_chains(completions, question.task_kind, 1, 0);
    emit_sample_audit(audit, question, state.chains, 0);

    state.buckets = bucket_by_answer(state.chains);
    local_scoring(state, question, judge, cfg, audit);

    AoRResult result;
    GlobalEvaluation eval;
    bool eval_current = false;
    int epoch = 0;

    auto finish = [&](Termination cause, const std::optional<std::string>& answer) {
        state.terminated = cause;
        result.termination = cause;
        if (answer) {
            result.final_answer = CanonicalAnswer{question.task_kind, *answer};
        }
        result.total_chains = static_cast<int>(state.chains.size());
        result.rounds = state.rounds_completed;
        result.audit = audit.take();
        result.usage = total_usage(state, result.audit);
        result.state = std::move(state);
    };

    while (true) {
        const bool eligible = any_representatives(state);
        if (eligible) {
            if (!eval_current) {
                eval = global_evaluation(state, question, judge, cfg, audit, ++epoch);
                state.global_means = eval.means;
                eval_current = true;
            }
            MarginOutcome margin = margin_decision(state.global_means, cfg.theta);
            if (margin.decision == MarginDecision::finalize) {
                finish(margin.cause, eval.best_answer);
                return result;
            }
        }

        const int sampled = static_cast<int>(state.chains.size());
        if (sampled >= cfg.n_max || state.rounds_completed >= cfg.max_rounds_guard) {
            if (eligible) finish(Termination::n_max_reached, eval.best_answer);
            else finish(Termination::abstain, std::nullopt);
            return result;
        }

        // Sample the next batch and fold it in.
        const int count = std::min(cfg.d, cfg.n_max - sampled);
        params.sample_tag = sampled + 1;
        auto more = sample_chains(client, prompt, count, params);
        auto new_chains = make_chains(more, question.task_kind, sampled + 1,
                                      state.rounds_completed + 1);
        emit_sample_audit(audit, question, new_chains, state.rounds_completed + 1);

        DynamicOutcome dyn = dynamic_round(state, std::move(new_chains), question,
                                           judge, cfg, audit,
                                           state.rounds_completed + 1);
        state.rounds_completed += 1;
        if (dyn.reevaluate) eval_current = false;
    }
}

// ============================================================================
// Serialization
// ============================================================================

nlohmann::json to_json(const AoRResult& result) {
    using nlohmann::json;
    json buckets = json::object();
    for (const auto& [answer, bucket] : result.state.buckets) {
        json members = json::array();
        for (const auto& member : bucket.members) {
            members.push_back(json{{"chain_index", member.chain_index},
                                   {"score", member.score ? json(*member.score)
                                                          : json(nullptr)}});
        }
        buckets[answer] = json{{"members", std::move(members)},
                               {"representatives", bucket.representatives}};
    }
    json means = json::object();
    for (const auto& [answer, mean] : result.state.global_means) {
        means[answer] = json{{"sum", mean.sum}, {"count", mean.count}};
    }
    json chains = json::array();
    for (const auto& chain : result.state.chains) {
        chains.push_back(json{
            {"index", chain.index},
            {"answer", chain.extracted_answer ? json(*chain.extracted_answer)
                                              : json(nullptr)},
            {"origin_round", chain.origin_round},
            {"input_tokens", chain.usage.input_tokens},
            {"output_tokens", chain.usage.output_tokens}});
    }
    json audit = json::array();
    for (const auto& record : result.audit) audit.push_back(to_json(record));
    return json{
        {"final_answer",
         result.final_answer ? json(result.final_answer->value) : json(nullptr)},
        {"termination", to_string(result.termination)},
        {"total_chains", result.total_chains},
        {"rounds", result.rounds},
        {"input_tokens", result.usage.input_tokens},
        {"output_tokens", result.usage.output_tokens},
        {"buckets", std::move(buckets)},
        {"global_means", std::move(means)},
        {"chains", std::move(chains)},
        {"audit", std::move(audit)}};
}

} // namespace aor
