#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "duetkd/errors.hpp"

namespace duetkd {

// The run's observable steps. One TeacherCall per first completion, one
// Reprompt per second completion; batch-level events carry no sample id.
enum class EventKind {
    TeacherCall,
    Reprompt,
    BatchTrained,
    BorderlineSelected,
    TemplateUpdated,
    ParseFailure,
};

std::string event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct RunEvent {
    EventKind kind = EventKind::TeacherCall;
    int batch_index = 0;
    std::string sample_id;  // empty for batch-level events
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();
};

// One JSONL line (no trailing newline). Field order is fixed, so equal
// events serialize to equal bytes.
std::string event_to_json(const RunEvent& e);
RunEvent event_from_json(const std::string& line, std::size_t line_no = 0);

std::vector<RunEvent> read_events(const std::string& path);
void write_events(const std::string& path, const std::vector<RunEvent>& events);

// Append-only write-through log backed by events.jsonl. The constructor
// loads whatever the file already holds (resume), and every append lands
// on disk immediately so an interrupted run keeps a usable prefix.
class EventLog {
public:
    EventLog() = default;  // in-memory only
    explicit EventLog(std::string path);

    void append(RunEvent e);
    const std::vector<RunEvent>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }

    // Drop events of batches >= first_batch (a partially logged batch from
    // an interrupted run) and rewrite the file.
    void truncate_from_batch(int first_batch);

private:
    std::vector<RunEvent> events_;
    std::string path_;
};

}  // namespace duetkd
