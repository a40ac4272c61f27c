#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfrag/backend.hpp"
#include "dfrag/corpus.hpp"
#include "dfrag/llm.hpp"
#include "dfrag/prompts.hpp"
#include "dfrag/retrieval.hpp"

namespace dfrag {

class EmbeddingCache;

struct Plan {
    std::vector<std::string> steps;
    std::string rawText;
};

/// Evaluator output for one candidate set against one plan.
/// Invariant: perStep.size() == plan size, each in [0, 5], total == sum.
struct StepScores {
    std::vector<int> perStep;
    std::vector<std::string> explanations;
    int total = 0;
    std::vector<std::string> warnings;
};

enum class DfragMode { Dfrag, DfragIc };
enum class SamplerKind { Uniform, BinarySearch };

struct DfragResult {
    double chosenLambda = 1.0;
    CandidateSet chosenSet;
    Plan plan;
    std::map<double, StepScores> allScores;
    std::string answer;
    DfragMode mode = DfragMode::Dfrag;
    std::map<std::string, double> timings;
    // Every candidate set the sampler produced, in grid order.
    std::vector<CandidateSet> candidateSets;
    std::vector<std::string> warnings;
};

struct OracleResult {
    double bestLambda = 0.0;
    double bestF1 = 0.0;
    std::map<double, double> perLambdaF1;
    std::map<double, std::string> answers;
    std::string answerAtBest;
    std::vector<CandidateSet> candidateSets;
};

struct RetrievedAnswer {
    std::string answer;
    CandidateSet set;
};

struct MaxTokens {
    int planner = 512;
    int evaluator = 1024;
    int generator = 256;
};

struct PipelineConfig {
    std::size_t chunkWords = 200;
    std::size_t k = kDefaultK;
    LambdaGrid dfragGrid = LambdaGrid::dfragDefault();
    LambdaGrid sweepGrid = LambdaGrid::sweepDefault();
    SamplerKind sampler = SamplerKind::Uniform;
    Selector selector = Selector::Gmmr;
    // Concurrent Evaluator calls per query.
    std::size_t workers = 4;
    std::size_t maxPlanSteps = 10;
    // Leave a short final window out of the pool once the document has k
    // full windows, so every retrieved context is exactly k·w words.
    bool dropShortTail = true;
    std::string chatModel = "meta-llama/Llama-3.3-70B-Instruct";
    EmbedOptions embed;
    MaxTokens maxTokens;
    RetryPolicy retry;
};

/// External collaborators of a pipeline run. All are borrowed.
struct Services {
    ChatBackend& chat;
    EmbeddingBackend& embedder;
    EmbeddingCache* cache = nullptr;
    const PromptSet& prompts;
};

/// A query embedded against its chunked, embedded document.
struct PreparedQuery {
    Embedding query;
    std::vector<Chunk> pool;
};

PreparedQuery prepareQuery(const QARecord& record, const PipelineConfig& config, const Services& services);

// --- Planner ---------------------------------------------------------------

/// Lines of the form "<n>) step" or "<n>. step" become steps, in order,
/// up to `maxSteps`. Throws PlanParseError (detail = raw text) when none do.
Plan parsePlan(std::string_view raw, std::size_t maxSteps = 10);

/// "1) first\n2) second"
std::string renderPlan(const Plan& plan);

Plan planQuery(const std::string& question, const PipelineConfig& config, const Services& services);

// --- Evaluator -------------------------------------------------------------

/// Parses "<i>. Score: <d>. Short Explanation: ..." lines and the final
/// "Total Score: <n>". Per-step digits clamp into [0, 5]; the per-step sum
/// wins over a disagreeing stated total (a warning is recorded). A bare
/// total is spread across steps, five points at a time. Throws
/// EvalParseError when neither form is present.
StepScores parseEvaluatorOutput(std::string_view raw, std::size_t planSteps);

/// Each chunk on its own line, double-quoted.
std::string renderChunks(const CandidateSet& set);

StepScores scoreCandidateSet(const Plan& plan, const CandidateSet& set, const PipelineConfig& config,
                             const Services& services);

// --- Tie-breaking gate -----------------------------------------------------

/// Argmax λ by score; ties resolve to the median of the tied λ values, the
/// upper median when their count is even.
double selectLambda(const std::map<double, int>& scores);

// --- Generator -------------------------------------------------------------

/// Chunk texts in selection order, separated by blank lines. A non-empty
/// `reasoningNotes` is placed first under a "Reasoning notes:" header.
std::string buildGeneratorContext(const CandidateSet& set, const std::string& reasoningNotes = {});

/// Plan followed by the Evaluator's per-step explanations.
std::string buildIncrementalContext(const Plan& plan, const StepScores& scores);

std::string generateAnswer(const std::string& question, const CandidateSet& set, const PipelineConfig& config,
                           const Services& services, const std::string& reasoningNotes = {});

// --- End-to-end runs -------------------------------------------------------

DfragResult runDfrag(const QARecord& record, const PipelineConfig& config, const Services& services,
                     DfragMode mode = DfragMode::Dfrag);

/// Per-λ generation over config.sweepGrid; keeps the λ with the best F1
/// against the gold answers (lowest λ on ties). A failed generation scores 0.
OracleResult runOracle(const QARecord& record, const PipelineConfig& config, const Services& services);

RetrievedAnswer runFixedLambda(const QARecord& record, double lambda, const PipelineConfig& config,
                               const Services& services);

RetrievedAnswer runVanilla(const QARecord& record, const PipelineConfig& config, const Services& services);

// Same pipelines over an already prepared query (no embedding calls).
DfragResult runDfrag(const QARecord& record, const PreparedQuery& prepared, const PipelineConfig& config,
                     const Services& services, DfragMode mode = DfragMode::Dfrag);
OracleResult runOracle(const QARecord& record, const PreparedQuery& prepared, const PipelineConfig& config,
                       const Services& services);
RetrievedAnswer runFixedLambda(const QARecord& record, const PreparedQuery& prepared, double lambda,
                               const PipelineConfig& config, const Services& services);
RetrievedAnswer runVanilla(const QARecord& record, const PreparedQuery& prepared, const PipelineConfig& config,
                           const Services& services);

std::map<double, std::size_t> lambdaHistogram(std::span<const DfragResult> results);
std::map<double, std::size_t> lambdaHistogram(std::span<const OracleResult> results);

/// Mean plan length across results; 0 for an empty span.
double meanPlanSteps(std::span<const DfragResult> results);

}  // namespace dfrag
