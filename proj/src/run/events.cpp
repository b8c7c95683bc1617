#include "duetkd/events.hpp"

#include <fstream>

namespace duetkd {

namespace {

constexpr const char* kKindNames[] = {
    "TeacherCall", "Reprompt", "BatchTrained", "BorderlineSelected", "TemplateUpdated",
    "ParseFailure",
};

}  // namespace

std::string event_kind_name(EventKind k) {
    return kKindNames[static_cast<int>(k)];
}

EventKind event_kind_from_name(const std::string& name) {
    for (int i = 0; i < static_cast<int>(std::size(kKindNames)); ++i)
        if (name == kKindNames[i]) return static_cast<EventKind>(i);
    throw ValueError("unknown event kind: \"" + name + "\"");
}

std::string event_to_json(const RunEvent& e) {
    nlohmann::ordered_json j;
    j["kind"] = event_kind_name(e.kind);
    j["batch"] = e.batch_index;
    j["sample"] = e.sample_id;
    j["payload"] = e.payload;
    return j.dump();
}

RunEvent event_from_json(const std::string& line, std::size_t line_no) {
    auto context = [&] {
        return line_no ? " (events line " + std::to_string(line_no) + ")" : "";
    };
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValueError("malformed event record" + context());
    for (const char* key : {"kind", "batch", "sample", "payload"})
        if (!j.contains(key))
            throw ValueError(std::string("event record missing \"") + key + "\"" + context());
    RunEvent e;
    e.kind = event_kind_from_name(j["kind"].get<std::string>());
    e.batch_index = j["batch"].get<int>();
    e.sample_id = j["sample"].get<std::string>();
    e.payload = j["payload"];
    return e;
}

std::vector<RunEvent> read_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read event log: " + path);
    std::vector<RunEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        events.push_back(event_from_json(line, line_no));
    }
    return events;
}

void write_events(const std::string& path, const std::vector<RunEvent>& events) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write event log: " + path);
    for (const RunEvent& e : events) out << event_to_json(e) << '\n';
}

EventLog::EventLog(std::string path) : path_(std::move(path)) {
    std::ifstream probe(path_);
    if (probe) {
        probe.close();
        events_ = read_events(path_);
    }
}

void EventLog::append(RunEvent e) {
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw IoError("cannot append to event log: " + path_);
        out << event_to_json(e) << '\n';
    }
    events_.push_back(std::move(e));
}

void EventLog::truncate_from_batch(int first_batch) {
    std::erase_if(events_, [&](const RunEvent& e) { return e.batch_index >= first_batch; });
    if (!path_.empty()) write_events(path_, events_);
}

}  // namespace duetkd
