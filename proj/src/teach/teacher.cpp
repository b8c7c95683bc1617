#include "duetkd/teacher.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "duetkd/rng.hpp"
#include "duetkd/spans.hpp"

namespace duetkd {

namespace {

void replace_all(std::string& text, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos;
         pos += to.size())
        text.replace(pos, from.size(), to);
}

// Whether the task's reply format carries a confidence field.
bool wants_confidence(const TaskKind& task, bool path_confidence) {
    return task.id != TaskId::PathClass || path_confidence;
}

std::vector<std::string> required_format_keys(const TaskKind& task) {
    switch (task.id) {
        case TaskId::BinaryGreen:
            return {"\"Answer\"", "\"Confidence\"", "\"Rationale\""};
        case TaskId::CausalityTokens:
            return {"\"Technology\"", "\"Environmental Effect\"", "\"Confidence\"",
                    "\"Rationale\""};
        case TaskId::PathClass:
            return {"\"Label\"", "\"Rationale\""};
    }
    throw ValueError("unknown task id");
}

// "Example:" block for one exemplar; the reply JSON doubles as the shown
// output so rendered exemplars parse under the task's own schema.
std::string render_example_block(const TeachingExample& ex, const TaskKind& task,
                                 const PromptOptions& opts) {
    ParsedTeacherOutput out{ex.label, ex.display_confidence / 100.0, ex.rationale};
    return "Example:\nContext: " + ex.context + "\nOutput: " +
           render_teacher_reply(out, task, ParseOptions{opts.path_confidence}) + "\n\n";
}

std::string format_reminder(const TaskKind& task, bool path_confidence) {
    std::string keys;
    const auto required = required_format_keys(task);
    for (std::size_t i = 0; i < required.size(); ++i) {
        if (i) keys += ", ";
        keys += required[i];
    }
    std::string text =
        "\n\nYour previous reply could not be parsed. Respond with exactly one JSON "
        "object with the fields " +
        keys + ".";
    if (wants_confidence(task, path_confidence))
        text += " Please output a confidence score as a percentage.";
    text += "\nOutput:";
    return text;
}

}  // namespace

bool TeachingTemplate::contains_source(const std::string& source_id) const {
    return std::any_of(examples.begin(), examples.end(),
                       [&](const TeachingExample& ex) { return ex.source_id == source_id; });
}

int display_confidence_for(std::uint64_t seed, const std::string& sample_id) {
    std::uint64_t key = fnv1a64(sample_id.data(), sample_id.size());
    return 60 + static_cast<int>(mix64(seed ^ key) % 31u);
}

TeacherPrediction gold_prediction(const Sample& s, const TaskKind& task) {
    if (!s.gold) throw ValueError("sample \"" + s.id + "\" has no label");
    if (task.token_level()) {
        const auto* labels = std::get_if<std::vector<int>>(&*s.gold);
        if (!labels)
            throw ValueError("sample \"" + s.id + "\" lacks token labels required by task " +
                             task_name(task.id));
        return spans_from_token_labels(tokenize_text(s.context), *labels);
    }
    const int* cls = std::get_if<int>(&*s.gold);
    if (!cls)
        throw ValueError("sample \"" + s.id + "\" carries token labels but task " +
                         task_name(task.id) + " is sequence-level");
    if (!task.label_space.contains(*cls))
        throw ValueError("sample \"" + s.id + "\" label " + std::to_string(*cls) +
                         " is outside task " + task_name(task.id));
    return *cls;
}

std::string prediction_label_text(const TeacherPrediction& pred, const TaskKind& task) {
    if (const SpanPair* sp = std::get_if<SpanPair>(&pred)) {
        if (!task.token_level())
            throw ValueError("span prediction on sequence task " + task_name(task.id));
        return "Technology: " + sp->technology + "; Environmental Effect: " + sp->effect;
    }
    if (task.token_level())
        throw ValueError("class prediction on token task " + task_name(task.id));
    return task.label_space.encode(std::get<int>(pred));
}

TeachingExample example_from_sample(const Sample& s, const TaskKind& task,
                                    std::string rationale, int display_confidence) {
    TeachingExample ex;
    ex.source_id = s.id;
    ex.context = s.context;
    ex.label = gold_prediction(s, task);
    ex.label_text = render_label_text(s, task);
    ex.rationale = std::move(rationale);
    ex.display_confidence = display_confidence;
    return ex;
}

TeachingTemplate make_template(const TaskKind& task, int n_shot,
                               const std::string& instruction_override) {
    if (n_shot < 0) throw ValueError("make_template: n_shot must be >= 0");
    TeachingTemplate tmpl;
    tmpl.task = &task;
    tmpl.instruction = instruction_override.empty() ? task.instruction : instruction_override;
    tmpl.n_shot = n_shot;
    return tmpl;
}

TeachingTemplate make_initial_template(const TaskKind& task, int n_shot, const Dataset& train,
                                       ChatBackend& rationale, RationaleCache& cache,
                                       std::uint64_t seed, const CallSink& sink,
                                       const std::function<void(const std::string&)>& warn,
                                       const std::string& instruction_override) {
    TeachingTemplate tmpl = make_template(task, n_shot, instruction_override);
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n_shot), train.size());

    // Reuse the retrieval-side rationale machinery (cache + fault
    // isolation) by dressing the seeds up as retrieved cases.
    std::vector<RetrievedCase> cases;
    cases.reserve(take);
    for (std::size_t i = 0; i < take; ++i) cases.push_back({train.samples[i], 0.0, {}});
    attach_rationales(cases, rationale, cache, task, sink, warn);

    for (const RetrievedCase& rc : cases)
        tmpl.examples.push_back(example_from_sample(
            rc.sample, task, rc.rationale.value_or(""),
            display_confidence_for(seed, rc.sample.id)));
    return tmpl;
}

ChatRequest build_prompt(const TeachingTemplate& tmpl,
                         const std::vector<RetrievedCase>& retrieved, const Sample& query,
                         const PromptOptions& opts) {
    if (!tmpl.task) throw ValueError("build_prompt: template has no task");
    const TaskKind& task = *tmpl.task;
    int budget = shot_budget(tmpl.n_shot);
    if (static_cast<int>(retrieved.size()) > budget)
        throw ValueError("build_prompt: " + std::to_string(retrieved.size()) +
                         " retrieved cases exceed the budget of " + std::to_string(budget) +
                         " for a " + std::to_string(tmpl.n_shot) + "-shot template");

    std::string text = tmpl.instruction + "\n\n";
    for (const TeachingExample& ex : tmpl.examples)
        text += render_example_block(ex, task, opts);
    for (const RetrievedCase& rc : retrieved) {
        TeachingExample ex;
        try {
            ex = example_from_sample(rc.sample, task, rc.rationale.value_or(""),
                                     display_confidence_for(opts.seed, rc.sample.id));
        } catch (const Error& e) {
            throw ValueError("build_prompt: retrieved case \"" + rc.sample.id +
                             "\" does not fit the task: " + e.what());
        }
        text += render_example_block(ex, task, opts);
    }
    text += "Context: " + query.context + "\nOutput:";

    ChatRequest req;
    req.user_text = std::move(text);
    req.temperature = opts.temperature;
    req.max_tokens = opts.max_tokens;
    req.tag = "teacher:" + query.id;
    return req;
}

ConfidenceStatus check_confidence(double score, double threshold) {
    if (!(score >= 0.0 && score <= 1.0))
        throw ValueError("check_confidence: score " + std::to_string(score) +
                         " outside [0,1]");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValueError("check_confidence: threshold " + std::to_string(threshold) +
                         " outside [0,1]");
    return score < threshold ? ConfidenceStatus::Unconfident : ConfidenceStatus::Confident;
}

RepromptDetail compose_reprompt_detail(const Sample& query,
                                       const std::vector<RetrievedCase>& retrieved,
                                       const TaskKind& task, const PromptOptions& opts) {
    std::string similar;
    if (!retrieved.empty()) {
        const RetrievedCase* best = &retrieved.front();
        for (const RetrievedCase& rc : retrieved)
            if (rc.similarity > best->similarity) best = &rc;
        ParsedTeacherOutput out{gold_prediction(best->sample, task),
                                display_confidence_for(opts.seed, best->sample.id) / 100.0,
                                best->rationale.value_or("")};
        similar = "Similar case:\nContext: " + best->sample.context + "\nOutput: " +
                  render_teacher_reply(out, task, ParseOptions{opts.path_confidence});
    }

    if (!opts.detail_template.empty()) {
        std::string text = opts.detail_template;
        replace_all(text, "{{context}}", query.context);
        replace_all(text, "{{similar}}", similar);
        if (text.empty())
            throw ConfigError("re-prompt detail template rendered to an empty string");
        return {text};
    }

    std::string text = "Context: " + query.context + "\n";
    if (!similar.empty()) text += similar + "\n";
    text +=
        "Your previous confidence was below the bar. Re-examine the context and answer "
        "again with your best judgment.";
    return {text};
}

TeacherVerdict teacher_infer(ChatBackend& backend, const TeachingTemplate& tmpl,
                             const std::vector<RetrievedCase>& retrieved, const Sample& query,
                             double threshold, const CallSink& sink, const PromptOptions& opts,
                             std::int64_t backoff_ms) {
    const TaskKind& task = *tmpl.task;
    const ParseOptions popts{opts.path_confidence};
    ChatRequest req = build_prompt(tmpl, retrieved, query, opts);

    TeacherVerdict v;
    ChatReply first_reply = complete(backend, req, sink, backoff_ms);
    v.calls = 1;
    std::optional<ParsedTeacherOutput> first;
    try {
        first = parse_teacher_reply(first_reply.text, task, popts);
    } catch (const ParseFailure&) {
        v.parse_failure_first = true;
    }
    v.first_parsed = first;

    if (first && check_confidence(first->confidence, threshold) == ConfidenceStatus::Confident) {
        v.parsed = first;
        v.status = ConfidenceStatus::Confident;
        return v;
    }

    // Exactly one re-prompt: detail for a low score, format reminder for
    // an unparseable reply. The full original prompt is retained.
    ChatRequest again = req;
    again.tag = req.tag + "#reprompt";
    if (first) {
        RepromptDetail detail = compose_reprompt_detail(query, retrieved, task, opts);
        again.user_text += "\n\n" + detail.detail_text + "\nOutput:";
    } else {
        again.user_text += format_reminder(task, opts.path_confidence);
    }

    ChatReply second_reply = complete(backend, again, sink, backoff_ms);
    v.calls = 2;
    v.reprompted = true;
    std::optional<ParsedTeacherOutput> second;
    try {
        second = parse_teacher_reply(second_reply.text, task, popts);
    } catch (const ParseFailure&) {
        v.parse_failure_second = true;
    }

    if (second) {
        // The second verdict is final, whatever its score.
        v.parsed = second;
        v.status = check_confidence(second->confidence, threshold);
    } else if (first) {
        // Unparseable re-prompt: the first (low-confidence) parse stands.
        v.parsed = first;
        v.status = ConfidenceStatus::Unconfident;
    } else {
        v.parsed = std::nullopt;
        v.status = ConfidenceStatus::Unconfident;
    }
    return v;
}

std::string template_to_json(const TeachingTemplate& tmpl) {
    if (!tmpl.task) throw ValueError("template_to_json: template has no task");
    nlohmann::ordered_json j;
    j["task"] = task_name(tmpl.task->id);
    j["n_shot"] = tmpl.n_shot;
    j["instruction"] = tmpl.instruction;
    j["examples"] = nlohmann::ordered_json::array();
    for (const TeachingExample& ex : tmpl.examples) {
        nlohmann::ordered_json je;
        je["source_id"] = ex.source_id;
        je["context"] = ex.context;
        if (const SpanPair* sp = std::get_if<SpanPair>(&ex.label)) {
            je["label"] = {{"technology", sp->technology}, {"effect", sp->effect}};
        } else {
            je["label"] = std::get<int>(ex.label);
        }
        je["label_text"] = ex.label_text;
        je["rationale"] = ex.rationale;
        je["display_confidence"] = ex.display_confidence;
        j["examples"].push_back(std::move(je));
    }
    return j.dump(2);
}

TeachingTemplate template_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValueError("template_from_json: not a JSON object");
    for (const char* key : {"task", "n_shot", "instruction", "examples"})
        if (!j.contains(key))
            throw ValueError(std::string("template_from_json: missing field \"") + key + "\"");

    const TaskKind& task = task_by_name(j["task"].get<std::string>());
    TeachingTemplate tmpl;
    tmpl.task = &task;
    tmpl.n_shot = j["n_shot"].get<int>();
    if (tmpl.n_shot < 0) throw ValueError("template_from_json: negative n_shot");
    tmpl.instruction = j["instruction"].get<std::string>();
    if (tmpl.instruction.empty()) throw ValueError("template_from_json: empty instruction");

    if (!j["examples"].is_array()) throw ValueError("template_from_json: examples not a list");
    for (const auto& je : j["examples"]) {
        for (const char* key : {"source_id", "context", "label", "label_text", "rationale",
                                "display_confidence"})
            if (!je.is_object() || !je.contains(key))
                throw ValueError(std::string("template_from_json: example missing field \"") +
                                 key + "\"");
        TeachingExample ex;
        ex.source_id = je.at("source_id").get<std::string>();
        ex.context = je.at("context").get<std::string>();
        const auto& jl = je.at("label");
        if (jl.is_object()) {
            if (!task.token_level())
                throw ValueError("template_from_json: span label on a sequence task");
            ex.label = SpanPair{jl.at("technology").get<std::string>(),
                                jl.at("effect").get<std::string>()};
        } else {
            int cls = jl.get<int>();
            if (task.token_level() || !task.label_space.contains(cls))
                throw ValueError("template_from_json: label " + std::to_string(cls) +
                                 " does not fit task " + task_name(task.id));
            ex.label = cls;
        }
        ex.label_text = je.at("label_text").get<std::string>();
        ex.rationale = je.at("rationale").get<std::string>();
        ex.display_confidence = je.at("display_confidence").get<int>();
        if (ex.display_confidence < 0 || ex.display_confidence > 100)
            throw ValueError("template_from_json: display_confidence outside [0,100]");
        tmpl.examples.push_back(std::move(ex));
    }
    if (static_cast<int>(tmpl.examples.size()) > tmpl.n_shot)
        throw ValueError("template_from_json: " + std::to_string(tmpl.examples.size()) +
                         " examples exceed n_shot " + std::to_string(tmpl.n_shot));
    return tmpl;
}

std::string load_instruction_override(const std::string& path, const TaskKind& task) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read instruction override: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    if (text.empty()) throw ConfigError("instruction override is empty: " + path);
    for (const std::string& key : required_format_keys(task))
        if (text.find(key) == std::string::npos)
            throw ConfigError("instruction override " + path + " does not mention " + key +
                              ", required by task " + task_name(task.id));
    return text;
}

}  // namespace duetkd
