#include "duetkd/task.hpp"

namespace duetkd {

int LabelSpace::decode(const std::string& name) const {
    for (int c = 0; c < size(); ++c) {
        if (names[static_cast<std::size_t>(c)] == name) return c;
    }
    throw ValueError("unknown label name: " + name);
}

namespace {

const char* kBinaryGreenInstruction =
    "Determine if the following text belongs to the Green Innovation category. "
    "Answer with 'yes' or 'no', and rate your confidence on a scale of 100 points. "
    "Return the answer, confidence, and rationale in the following JSON format: "
    "{\"Answer\": Answer, \"Confidence\": Confidence, \"Rationale\": Rationale}.";

const char* kCausalityInstruction =
    "Identify the technology and the ultimate environmental effect within the "
    "following sentence related to Green Innovation. Extract both the technology "
    "and the environmental effect, and rate your confidence on a scale of 100 "
    "points. Return the technology, environmental effect, confidence, and "
    "rationale in the following JSON format: {\"Technology\": Technology, "
    "\"Environmental Effect\": Environmental Effect, \"Confidence\": Confidence, "
    "\"Rationale\": Rationale}.";

const char* kPathClassInstruction =
    "Classify the environmental issue that the technology in the following "
    "sentence related to Green Innovation can ultimately resolve, using the "
    "labels (0,1,2,3): 0: Energy efficiency and consumption reduction - Content "
    "related to reducing all forms of energy consumption and improving "
    "efficiency, 1: Renewable energy and emission reduction - Content related to "
    "promoting the use of renewable energy and reducing emissions and greenhouse "
    "gases, 2: Waste management and recycling - Content related to waste "
    "reduction, improving recycling efficiency, and resource circulation, 3: "
    "Product development and technological innovation - Content related to "
    "developing new technologies and improving the durability and safety of "
    "products. Select one label from (0,1,2,3), and return the label and "
    "rationale in the following JSON format: {\"Label\": Label, \"Rationale\": "
    "Rationale}.";

}  // namespace

const TaskKind& task_binary_green() {
    static const TaskKind t{TaskId::BinaryGreen, kBinaryGreenInstruction,
                            LabelSpace{{"no", "yes"}}};
    return t;
}

const TaskKind& task_causality_tokens() {
    static const TaskKind t{TaskId::CausalityTokens, kCausalityInstruction,
                            LabelSpace{{"O", "B-TECH", "I-TECH", "B-EFF", "I-EFF"}}};
    return t;
}

const TaskKind& task_path_class() {
    static const TaskKind t{
        TaskId::PathClass, kPathClassInstruction,
        LabelSpace{{"Energy efficiency and consumption reduction",
                    "Renewable energy and emission reduction",
                    "Waste management and recycling",
                    "Product development and technological innovation"}}};
    return t;
}

const TaskKind& task_by_name(const std::string& name) {
    if (name == "binary_green") return task_binary_green();
    if (name == "causality_tokens") return task_causality_tokens();
    if (name == "path_class") return task_path_class();
    throw ConfigError("unknown task name: " + name);
}

std::string task_name(TaskId id) {
    switch (id) {
        case TaskId::BinaryGreen: return "binary_green";
        case TaskId::CausalityTokens: return "causality_tokens";
        case TaskId::PathClass: return "path_class";
    }
    throw ValueError("bad TaskId");
}

}  // namespace duetkd
