#include "aor/audit.hpp"

namespace aor {

using nlohmann::json;

json to_json(const AuditRecord& record) {
    json items = json::array();
    for (const auto& item : record.items) {
        json entry{{"chain_index", item.chain_index}};
        if (item.answer) entry["answer"] = *item.answer;
        else entry["answer"] = nullptr;
        items.push_back(std::move(entry));
    }
    json anchors = json::array();
    for (const auto& anchor : record.anchors) {
        anchors.push_back(json{{"chain_index", anchor.chain_index},
                               {"score", anchor.score}});
    }
    return json{{"seq", record.seq},
                {"question_id", record.question_id},
                {"kind", record.kind},
                {"phase", record.phase},
                {"round", record.round},
                {"epoch", record.epoch},
                {"bucket", record.bucket},
                {"items", std::move(items)},
                {"anchors", std::move(anchors)},
                {"scores", record.scores},
                {"input_tokens", record.usage.input_tokens},
                {"output_tokens", record.usage.output_tokens},
                {"prompt", record.prompt},
                {"raw_text", record.raw_text}};
}

AuditRecord audit_record_from_json(const json& j) {
    AuditRecord record;
    record.seq = j.value("seq", 0);
    record.question_id = j.value("question_id", std::string());
    record.kind = j.value("kind", std::string());
    record.phase = j.value("phase", std::string());
    record.round = j.value("round", 0);
    record.epoch = j.value("epoch", 0);
    record.bucket = j.value("bucket", std::string());
    if (j.contains("items")) {
        for (const auto& entry : j["items"]) {
            AuditItem item;
            item.chain_index = entry.value("chain_index", 0);
            if (entry.contains("answer") && !entry["answer"].is_null()) {
                item.answer = entry["answer"].get<std::string>();
            }
            record.items.push_back(std::move(item));
        }
    }
    if (j.contains("anchors")) {
        for (const auto& entry : j["anchors"]) {
            record.anchors.push_back(AuditAnchor{entry.value("chain_index", 0),
                                                 entry.value("score", 0)});
        }
    }
    if (j.contains("scores")) record.scores = j["scores"].get<std::vector<int>>();
    record.usage.input_tokens = j.value("input_tokens", static_cast<std::int64_t>(0));
    record.usage.output_tokens = j.value("output_tokens", static_cast<std::int64_t>(0));
    record.prompt = j.value("prompt", std::string());
    record.raw_text = j.value("raw_text", std::string());
    return record;
}

} // namespace aor
