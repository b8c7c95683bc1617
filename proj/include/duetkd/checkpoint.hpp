#pragma once

#include <cstdint>
#include <string>

#include "duetkd/features.hpp"
#include "duetkd/student.hpp"

namespace duetkd {

// Everything besides the parameters needed to pick a run back up: which
// task and featurization the weights belong to, how many distillation
// batches completed, how far the (scripted) backends and the rationale
// cache have advanced, and the teaching template as of the last committed
// batch. The checkpoint is the single commit point — template.json and
// rationale_cache.jsonl are rolled back to it on resume, so a crash
// between file writes cannot leave a half-committed batch behind.
struct CheckpointMeta {
    std::string task_name;
    FeatureSpec features;
    int batches_done = 0;
    std::uint64_t teacher_pos = 0;
    std::uint64_t rationale_pos = 0;
    std::uint64_t cache_lines = 0;
    std::string template_json;  // single-line JSON; empty when not tracked
};

struct LoadedCheckpoint {
    StudentModel model;
    CheckpointMeta meta;
};

// Text checkpoint: header lines, hexfloat parameter rows (exact binary
// round-trip), and a trailing FNV-1a content hash. Loading verifies the
// hash and every dimension; a mismatch is an IntegrityError.
void save_checkpoint(const std::string& path, const StudentModel& model,
                     const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace duetkd
