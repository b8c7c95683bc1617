#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "duetkd/backend.hpp"
#include "duetkd/data.hpp"
#include "duetkd/embedding.hpp"

namespace duetkd {

// A labeled training case retrieved for a query, with its similarity and
// (once attached) an LLM-generated rationale.
struct RetrievedCase {
    Sample sample;
    double similarity = 0.0;
    std::optional<std::string> rationale;
};

// Read-only store of embedded labeled samples; exact-scan retrieval.
class EmbeddingStore {
public:
    struct Entry {
        std::string sample_id;
        EmbeddingVector vec;
        Sample sample;
    };

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t dim() const { return dim_; }

    friend EmbeddingStore build_store(const Dataset& train, const EmbeddingProvider& provider);

private:
    std::vector<Entry> entries_;
    std::size_t dim_ = 0;
};

// Embed every (labeled) training sample. Unlabeled or zero-norm entries
// are an error, reported with the offending sample id.
EmbeddingStore build_store(const Dataset& train, const EmbeddingProvider& provider);

// Top-k by cosine similarity, descending; ties broken by ascending
// sample_id; exclude_id (the query's own sample) is never returned.
std::vector<RetrievedCase> top_k_similar(const EmbeddingStore& store,
                                         const EmbeddingVector& query, std::size_t k,
                                         const std::optional<std::string>& exclude_id = {});

// Retrieval budget for an n-shot prompt:
//   0        if n == 0
//   1        if n in {1,2,3}
//   ceil((n-1)/2)  if n > 3
int shot_budget(int n_shot);

// Persistent sample_id -> rationale map backed by a JSONL file of
// {"id", "rationale"} records, appended as rationales are generated.
class RationaleCache {
public:
    RationaleCache() = default;
    // Binds the cache to a file, loading existing records if present.
    explicit RationaleCache(std::string path);

    std::optional<std::string> lookup(const std::string& id) const;
    void insert(const std::string& id, const std::string& rationale);
    std::size_t size() const { return map_.size(); }
    // Records appended so far (= file lines); checkpoints store this so a
    // resumed run can roll the file back to the committed state.
    std::size_t lines() const { return lines_; }

private:
    std::unordered_map<std::string, std::string> map_;
    std::size_t lines_ = 0;
    std::string path_;  // empty = in-memory only
};

// Rewrite a JSONL file keeping only its first `keep_lines` lines (resume
// rollback of append-only logs).
void truncate_jsonl(const std::string& path, std::size_t keep_lines);

// The prompt used to elicit a rationale for a (context, label) pair.
ChatRequest make_rationale_request(const std::string& context, const std::string& label_text,
                                   const std::string& tag);

// Fill in the rationale of each retrieved case by prompting the backend
// with (context, label). Results are cached by sample id; a case whose
// backend call fails (after the one complete() retry) keeps an empty
// rationale and the failure is logged via warn. Cases are processed and
// written in input order.
void attach_rationales(std::vector<RetrievedCase>& cases, ChatBackend& backend,
                       RationaleCache& cache, const TaskKind& task,
                       const CallSink& sink = nullptr,
                       const std::function<void(const std::string&)>& warn = nullptr,
                       std::int64_t backoff_ms = 250);

// Render a gold label as exemplar text: "yes"/"no" for the binary task,
// the class name for the path task, and "Technology: ...; Environmental
// Effect: ..." decoded from BIO token labels for the causality task.
std::string render_label_text(const Sample& s, const TaskKind& task);

}  // namespace duetkd
