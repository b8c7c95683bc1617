#include "duetkd/reply.hpp"

#include <cctype>
#include <cmath>

#include <json.hpp>

namespace duetkd {

namespace {

std::string lower_trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Find balanced {...} candidates in free text, respecting JSON strings.
std::vector<std::string> json_object_candidates(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        int depth = 0;
        bool in_string = false, escaped = false;
        std::size_t j = i;
        for (; j < text.size(); ++j) {
            char c = text[j];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                --depth;
                if (depth == 0) break;
            }
        }
        if (j < text.size() && depth == 0) {
            out.push_back(text.substr(i, j - i + 1));
            i = j + 1;
        } else {
            ++i;  // unbalanced; resume after this brace
        }
    }
    return out;
}

// Confidence fields arrive as numbers or numeric strings on the 0..100 scale.
std::optional<double> read_percent(const nlohmann::json& v) {
    double pct;
    if (v.is_number()) {
        pct = v.get<double>();
    } else if (v.is_string()) {
        try {
            std::size_t used = 0;
            const std::string s = v.get<std::string>();
            pct = std::stod(s, &used);
            if (used != s.size()) return std::nullopt;
        } catch (...) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (!(pct >= 0.0 && pct <= 100.0)) return std::nullopt;
    return pct;
}

std::optional<ParsedTeacherOutput> try_object(const nlohmann::json& j, const TaskKind& task,
                                              const ParseOptions& opts) {
    if (!j.is_object()) return std::nullopt;
    ParsedTeacherOutput out;

    auto read_rationale = [&](const char* key) -> bool {
        if (!j.contains(key) || !j[key].is_string()) return false;
        out.rationale = j[key].get<std::string>();
        return true;
    };

    switch (task.id) {
        case TaskId::BinaryGreen: {
            if (!j.contains("Answer") || !j.contains("Confidence")) return std::nullopt;
            if (!read_rationale("Rationale")) return std::nullopt;
            std::string ans;
            if (j["Answer"].is_string()) ans = lower_trim(j["Answer"].get<std::string>());
            if (ans != "yes" && ans != "no") return std::nullopt;
            auto pct = read_percent(j["Confidence"]);
            if (!pct) return std::nullopt;
            out.prediction = (ans == "yes") ? 1 : 0;
            out.confidence = *pct / 100.0;
            return out;
        }
        case TaskId::CausalityTokens: {
            if (!j.contains("Technology") || !j.contains("Environmental Effect") ||
                !j.contains("Confidence"))
                return std::nullopt;
            if (!read_rationale("Rationale")) return std::nullopt;
            if (!j["Technology"].is_string() || !j["Environmental Effect"].is_string())
                return std::nullopt;
            SpanPair sp{j["Technology"].get<std::string>(),
                        j["Environmental Effect"].get<std::string>()};
            if (sp.technology.empty() || sp.effect.empty()) return std::nullopt;
            auto pct = read_percent(j["Confidence"]);
            if (!pct) return std::nullopt;
            out.prediction = std::move(sp);
            out.confidence = *pct / 100.0;
            return out;
        }
        case TaskId::PathClass: {
            if (!j.contains("Label")) return std::nullopt;
            if (!read_rationale("Rationale")) return std::nullopt;
            int label;
            if (j["Label"].is_number_integer()) {
                label = j["Label"].get<int>();
            } else if (j["Label"].is_string()) {
                try {
                    std::size_t used = 0;
                    const std::string s = j["Label"].get<std::string>();
                    label = std::stoi(s, &used);
                    if (used != s.size()) return std::nullopt;
                } catch (...) {
                    return std::nullopt;
                }
            } else {
                return std::nullopt;
            }
            if (!task.label_space.contains(label)) return std::nullopt;
            out.prediction = label;
            // The stock template has no confidence field; default fully
            // confident unless the field was requested and present.
            out.confidence = 1.0;
            if (j.contains("Confidence")) {
                auto pct = read_percent(j["Confidence"]);
                if (!pct) return std::nullopt;
                out.confidence = *pct / 100.0;
            } else if (opts.path_confidence) {
                return std::nullopt;
            }
            return out;
        }
    }
    return std::nullopt;
}

// Percent values that came in as integers should go back out as integers.
nlohmann::ordered_json percent_json(double confidence) {
    double pct = confidence * 100.0;
    double rounded = std::round(pct);
    if (std::abs(pct - rounded) < 1e-9) return static_cast<std::int64_t>(rounded);
    return pct;
}

}  // namespace

ParsedTeacherOutput parse_teacher_reply(const std::string& text, const TaskKind& task,
                                        const ParseOptions& opts) {
    for (const std::string& cand : json_object_candidates(text)) {
        nlohmann::json j = nlohmann::json::parse(cand, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) continue;
        if (auto parsed = try_object(j, task, opts)) return *parsed;
    }
    throw ParseFailure("no object matching the " + task_name(task.id) + " reply schema", text);
}

std::string render_teacher_reply(const ParsedTeacherOutput& out, const TaskKind& task,
                                 const ParseOptions& opts) {
    nlohmann::ordered_json j;
    switch (task.id) {
        case TaskId::BinaryGreen: {
            int c = std::get<int>(out.prediction);
            j["Answer"] = task.label_space.encode(c);  // "no" / "yes"
            j["Confidence"] = percent_json(out.confidence);
            j["Rationale"] = out.rationale;
            break;
        }
        case TaskId::CausalityTokens: {
            const auto& sp = std::get<SpanPair>(out.prediction);
            j["Technology"] = sp.technology;
            j["Environmental Effect"] = sp.effect;
            j["Confidence"] = percent_json(out.confidence);
            j["Rationale"] = out.rationale;
            break;
        }
        case TaskId::PathClass: {
            j["Label"] = std::get<int>(out.prediction);
            if (opts.path_confidence) j["Confidence"] = percent_json(out.confidence);
            j["Rationale"] = out.rationale;
            break;
        }
    }
    return j.dump();
}

}  // namespace duetkd
