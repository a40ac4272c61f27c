#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace dfrag {

enum class PromptKind { Planner, Evaluator, Generator };

std::string_view toString(PromptKind kind);

/// Placeholders each template kind must carry, exactly.
const std::set<std::string>& requiredPlaceholders(PromptKind kind);

/// `{name}` tokens (name = [a-z_]+) occurring in `body`.
std::set<std::string> placeholdersIn(std::string_view body);

struct PromptTemplate {
    PromptKind kind = PromptKind::Planner;
    std::string body;

    /// Throws ConfigError when the body's placeholders differ from the
    /// required set for `kind`.
    static PromptTemplate make(PromptKind kind, std::string body);
};

using PromptBindings = std::map<std::string, std::string, std::less<>>;

/// Single-pass substitution; bound values are never re-scanned. Throws
/// MissingPlaceholder (detail = name) for an unbound placeholder.
std::string renderPrompt(const PromptTemplate& tmpl, const PromptBindings& bindings);

/// The templates and the evaluator's few-shot block, read from text files
/// planner.txt, evaluator.txt, evaluator_few_shot.txt and generator.txt.
struct PromptSet {
    PromptTemplate planner;
    PromptTemplate evaluator;
    PromptTemplate generator;
    std::string fewShotExamples;

    static PromptSet load(const std::filesystem::path& dir);
};

/// $DFRAG_PROMPT_DIR if set, else the installed prompt directory when it
/// exists, else the source tree's copy.
std::filesystem::path defaultPromptDir();

}  // namespace dfrag
