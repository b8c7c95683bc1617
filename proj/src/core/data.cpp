#include "duetkd/data.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "duetkd/rng.hpp"

namespace duetkd {

namespace {

inline bool is_word_char(unsigned char c) {
    if (c >= 0x80) return true;  // keep UTF-8 sequences inside word runs
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_space_char(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::vector<std::string> tokenize_text(const std::string& context) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = context.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(context[i]);
        if (is_space_char(c)) {
            ++i;
            continue;
        }
        if (is_word_char(c)) {
            std::size_t start = i;
            while (i < n && is_word_char(static_cast<unsigned char>(context[i]))) ++i;
            tokens.emplace_back(context.substr(start, i - start));
        } else {
            tokens.emplace_back(1, context[i]);
            ++i;
        }
    }
    return tokens;
}

TokenizedSample tokenize(const Sample& s) {
    if (s.context.empty()) throw ValueError("cannot tokenize empty context (sample " + s.id + ")");
    TokenizedSample ts;
    ts.sample_id = s.id;
    ts.tokens = tokenize_text(s.context);
    if (s.gold && std::holds_alternative<std::vector<int>>(*s.gold)) {
        ts.token_labels = std::get<std::vector<int>>(*s.gold);
    }
    return ts;
}

Sample parse_sample_json(const std::string& line, const TaskKind& task, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValueError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("context") || !j["context"].is_string()) {
        throw ValueError("line " + std::to_string(line_no) +
                         ": record must have string fields 'id' and 'context'");
    }
    Sample s;
    s.id = j["id"].get<std::string>();
    s.context = j["context"].get<std::string>();
    if (s.context.empty())
        throw ValueError("line " + std::to_string(line_no) + ": empty context (id " + s.id + ")");

    if (j.contains("label") && !j["label"].is_null()) {
        const auto& lab = j["label"];
        if (lab.is_number_integer()) {
            int c = lab.get<int>();
            if (!task.label_space.contains(c))
                throw ValueError("line " + std::to_string(line_no) + ": label " +
                                 std::to_string(c) + " outside label space of task " +
                                 task_name(task.id));
            if (task.token_level())
                throw ValueError("line " + std::to_string(line_no) +
                                 ": causality task requires an array label");
            s.gold = c;
        } else if (lab.is_array()) {
            if (!task.token_level())
                throw ValueError("line " + std::to_string(line_no) +
                                 ": array label only valid for the causality task");
            std::vector<int> seq;
            for (const auto& v : lab) {
                if (!v.is_number_integer())
                    throw ValueError("line " + std::to_string(line_no) +
                                     ": label array must contain integers");
                int c = v.get<int>();
                if (!task.label_space.contains(c))
                    throw ValueError("line " + std::to_string(line_no) + ": label " +
                                     std::to_string(c) + " outside label space of task " +
                                     task_name(task.id));
                seq.push_back(c);
            }
            std::size_t n_tokens = tokenize_text(s.context).size();
            if (seq.size() != n_tokens)
                throw ValueError("line " + std::to_string(line_no) + ": label array length " +
                                 std::to_string(seq.size()) + " != token count " +
                                 std::to_string(n_tokens) + " (id " + s.id + ")");
            s.gold = std::move(seq);
        } else {
            throw ValueError("line " + std::to_string(line_no) +
                             ": label must be an integer or integer array");
        }
    }
    return s;
}

Dataset load_dataset(const std::string& path, const TaskKind& task) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    Dataset ds;
    ds.task = &task;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Sample s = parse_sample_json(line, task, line_no);
        if (!seen.insert(s.id).second)
            throw ValueError("line " + std::to_string(line_no) + ": duplicate id \"" + s.id + "\"");
        ds.samples.push_back(std::move(s));
    }
    if (in.bad()) throw IoError("I/O failure while reading " + path);
    return ds;
}

std::pair<Dataset, Dataset> split_train_eval(const Dataset& ds, double ratio,
                                             std::uint64_t seed) {
    if (ds.empty()) throw ValueError("cannot split an empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ValueError("split ratio must be in (0, 1), got " + std::to_string(ratio));

    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(seed);
    fisher_yates_shuffle(order, rng);

    auto n_train = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(ds.size())));
    Dataset train, eval;
    train.task = ds.task;
    eval.task = ds.task;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train : eval).samples.push_back(ds.samples[order[i]]);
    }
    return {std::move(train), std::move(eval)};
}

}  // namespace duetkd
