#include "duetkd/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "duetkd/rng.hpp"
#include "duetkd/task.hpp"

namespace duetkd {

namespace {

constexpr const char* kMagic = "DUETKD-CKPT 1";

std::string hex_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_hex_double(const std::string& token, const std::string& what) {
    const char* begin = token.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw IntegrityError("checkpoint: bad " + what + " value \"" + token + "\"");
    return v;
}

// "key value..." line reader that insists on the expected key.
std::string expect_line(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line))
        throw IntegrityError("checkpoint: truncated before \"" + key + "\"");
    if (line.rfind(key + " ", 0) != 0)
        throw IntegrityError("checkpoint: expected \"" + key + "\", found \"" + line + "\"");
    return line.substr(key.size() + 1);
}

}  // namespace

void save_checkpoint(const std::string& path, const StudentModel& model,
                     const CheckpointMeta& meta) {
    std::ostringstream body;
    body << kMagic << '\n';
    body << "task " << meta.task_name << '\n';
    body << "classes " << model.num_classes() << '\n';
    body << "dim " << model.dim() << '\n';
    body << "step " << model.step_count() << '\n';
    body << "batches " << meta.batches_done << '\n';
    body << "teacher_pos " << meta.teacher_pos << '\n';
    body << "rationale_pos " << meta.rationale_pos << '\n';
    body << "cache_lines " << meta.cache_lines << '\n';
    body << "features " << meta.features.kind << ' ' << meta.features.dim << ' '
         << meta.features.seed << ' '
         << (meta.features.endpoint.empty() ? "-" : meta.features.endpoint) << '\n';
    if (meta.template_json.find('\n') != std::string::npos)
        throw ValueError("checkpoint template_json must be a single line");
    body << "template " << (meta.template_json.empty() ? "-" : meta.template_json) << '\n';

    const auto& w = model.weights();
    for (int c = 0; c < model.num_classes(); ++c) {
        body << 'W' << c;
        for (std::size_t k = 0; k < model.dim(); ++k)
            body << ' ' << hex_double(w[static_cast<std::size_t>(c) * model.dim() + k]);
        body << '\n';
    }
    body << 'B';
    for (double b : model.bias()) body << ' ' << hex_double(b);
    body << '\n';

    std::string text = body.str();
    char hash[24];
    std::snprintf(hash, sizeof(hash), "hash %016llx\n",
                  static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));

    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << text << hash;
    if (!out) throw IoError("short write to checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    std::ostringstream raw;
    raw << in.rdbuf();
    std::string text = raw.str();

    // Verify the content hash first: everything up to the final line must
    // hash to the recorded value.
    std::size_t hash_pos = text.rfind("hash ");
    if (hash_pos == std::string::npos || (hash_pos != 0 && text[hash_pos - 1] != '\n'))
        throw IntegrityError("checkpoint: missing hash line in " + path);
    std::string hashed_part = text.substr(0, hash_pos);
    std::string hash_line = text.substr(hash_pos + 5);
    while (!hash_line.empty() && (hash_line.back() == '\n' || hash_line.back() == '\r'))
        hash_line.pop_back();
    char expected[17];
    std::snprintf(expected, sizeof(expected), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(hashed_part.data(), hashed_part.size())));
    if (hash_line != expected)
        throw IntegrityError("checkpoint: content hash mismatch in " + path);

    std::istringstream is(hashed_part);
    std::string line;
    if (!std::getline(is, line) || line != kMagic)
        throw IntegrityError("checkpoint: bad magic in " + path);

    CheckpointMeta meta;
    meta.task_name = expect_line(is, "task");
    const TaskKind& task = task_by_name(meta.task_name);
    int classes = std::stoi(expect_line(is, "classes"));
    if (classes != task.label_space.size())
        throw IntegrityError("checkpoint: class count " + std::to_string(classes) +
                             " does not match task " + meta.task_name);
    std::size_t dim = std::stoull(expect_line(is, "dim"));
    std::uint64_t step = std::stoull(expect_line(is, "step"));
    meta.batches_done = std::stoi(expect_line(is, "batches"));
    meta.teacher_pos = std::stoull(expect_line(is, "teacher_pos"));
    meta.rationale_pos = std::stoull(expect_line(is, "rationale_pos"));
    meta.cache_lines = std::stoull(expect_line(is, "cache_lines"));

    {
        std::istringstream fs(expect_line(is, "features"));
        std::string endpoint;
        if (!(fs >> meta.features.kind >> meta.features.dim >> meta.features.seed >> endpoint))
            throw IntegrityError("checkpoint: malformed features line in " + path);
        meta.features.endpoint = endpoint == "-" ? "" : endpoint;
        if (meta.features.feature_dim() != dim)
            throw IntegrityError("checkpoint: feature dim " +
                                 std::to_string(meta.features.feature_dim()) +
                                 " does not match model dim " + std::to_string(dim));
    }
    meta.template_json = expect_line(is, "template");
    if (meta.template_json == "-") meta.template_json.clear();

    StudentModel model(task.label_space, dim);
    model.set_step_count(step);
    for (int c = 0; c < classes; ++c) {
        std::istringstream ws(expect_line(is, "W" + std::to_string(c)));
        std::string token;
        for (std::size_t k = 0; k < dim; ++k) {
            if (!(ws >> token))
                throw IntegrityError("checkpoint: weight row " + std::to_string(c) +
                                     " is short");
            model.weights()[static_cast<std::size_t>(c) * dim + k] =
                parse_hex_double(token, "weight");
        }
        if (std::string extra; ws >> extra)
            throw IntegrityError("checkpoint: weight row " + std::to_string(c) + " is long");
    }
    {
        std::istringstream bs(expect_line(is, "B"));
        std::string token;
        for (int c = 0; c < classes; ++c) {
            if (!(bs >> token)) throw IntegrityError("checkpoint: bias row is short");
            model.bias()[static_cast<std::size_t>(c)] = parse_hex_double(token, "bias");
        }
        if (std::string extra; bs >> extra)
            throw IntegrityError("checkpoint: bias row is long");
    }

    return LoadedCheckpoint{std::move(model), std::move(meta)};
}

}  // namespace duetkd
