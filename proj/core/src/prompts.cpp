#include "dfrag/prompts.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dfrag/error.hpp"

#ifndef DFRAG_INSTALLED_PROMPT_DIR
#define DFRAG_INSTALLED_PROMPT_DIR ""
#endif
#ifndef DFRAG_SOURCE_PROMPT_DIR
#define DFRAG_SOURCE_PROMPT_DIR ""
#endif

namespace dfrag {

std::string_view toString(PromptKind kind) {
    switch (kind) {
        case PromptKind::Planner: return "planner";
        case PromptKind::Evaluator: return "evaluator";
        case PromptKind::Generator: return "generator";
    }
    return "unknown";
}

const std::set<std::string>& requiredPlaceholders(PromptKind kind) {
    static const std::set<std::string> planner{"question"};
    static const std::set<std::string> evaluator{"few_shot_examples", "plan", "chunks"};
    static const std::set<std::string> generator{"context", "query"};
    switch (kind) {
        case PromptKind::Planner: return planner;
        case PromptKind::Evaluator: return evaluator;
        case PromptKind::Generator: return generator;
    }
    return planner;
}

namespace {

bool isNameChar(char c) {
    return (c >= 'a' && c <= 'z') || c == '_';
}

// Length of the placeholder name starting after '{' at `open`, or 0.
std::size_t placeholderAt(std::string_view body, std::size_t open) {
    std::size_t i = open + 1;
    while (i < body.size() && isNameChar(body[i])) {
        ++i;
    }
    if (i == open + 1 || i >= body.size() || body[i] != '}') {
        return 0;
    }
    return i - open - 1;
}

std::string readFile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot read " + path.string(), path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (!text.empty() && text.back() == '\n') {
        text.pop_back();
    }
    return text;
}

}  // namespace

std::set<std::string> placeholdersIn(std::string_view body) {
    std::set<std::string> names;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        if (const std::size_t len = placeholderAt(body, i)) {
            names.emplace(body.substr(i + 1, len));
            i += len + 1;
        }
    }
    return names;
}

PromptTemplate PromptTemplate::make(PromptKind kind, std::string body) {
    const auto found = placeholdersIn(body);
    if (found != requiredPlaceholders(kind)) {
        std::string names;
        for (const auto& n : found) names += " {" + n + "}";
        throw Error(ErrorKind::ConfigError,
                    std::string(toString(kind)) + " template has placeholders:" + names);
    }
    return PromptTemplate{kind, std::move(body)};
}

std::string renderPrompt(const PromptTemplate& tmpl, const PromptBindings& bindings) {
    const std::string_view body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            if (const std::size_t len = placeholderAt(body, i)) {
                const std::string_view name = body.substr(i + 1, len);
                auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw Error(ErrorKind::MissingPlaceholder,
                                std::string(toString(tmpl.kind)) + " prompt needs {" +
                                    std::string(name) + "}",
                                std::string(name));
                }
                out += it->second;
                i += len + 2;
                continue;
            }
        }
        out += body[i++];
    }
    return out;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    PromptSet set;
    set.planner = PromptTemplate::make(PromptKind::Planner, readFile(dir / "planner.txt"));
    set.evaluator = PromptTemplate::make(PromptKind::Evaluator, readFile(dir / "evaluator.txt"));
    set.generator = PromptTemplate::make(PromptKind::Generator, readFile(dir / "generator.txt"));
    set.fewShotExamples = readFile(dir / "evaluator_few_shot.txt");
    return set;
}

std::filesystem::path defaultPromptDir() {
    if (const char* env = std::getenv("DFRAG_PROMPT_DIR"); env && *env) {
        return env;
    }
    const std::filesystem::path installed = DFRAG_INSTALLED_PROMPT_DIR;
    if (!installed.empty() && std::filesystem::exists(installed / "planner.txt")) {
        return installed;
    }
    return DFRAG_SOURCE_PROMPT_DIR;
}

}  // namespace dfrag
