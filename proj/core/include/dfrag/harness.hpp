#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfrag/backend.hpp"
#include "dfrag/corpus.hpp"
#include "dfrag/pipeline.hpp"

namespace dfrag {

enum class RunMode { Vanilla, Fixed, Dfrag, DfragIc, Oracle, ClassicMmr };

/// "vanilla", "fixed", "dfrag", "dfrag_ic", "oracle", "classic_mmr".
std::optional<RunMode> parseRunMode(std::string_view name);
std::string_view toString(RunMode mode);

struct ExperimentConfig {
    // Run in this order over every record.
    std::vector<RunMode> modes{RunMode::Dfrag};
    std::filesystem::path datasetPath;
    DatasetFormat datasetFormat = DatasetFormat::LongBenchJsonl;
    std::size_t chunkWords = 200;
    std::size_t k = kDefaultK;
    std::optional<double> lambda;
    SamplerKind sampler = SamplerKind::Uniform;
    // Concurrent Evaluator calls per query.
    std::size_t workers = 4;
    // Records processed concurrently.
    std::size_t recordWorkers = 1;
    std::string endpoint = "http://127.0.0.1:8000";
    std::string chatModel = "meta-llama/Llama-3.3-70B-Instruct";
    std::string embedModel = "multi-qa-mpnet-base-cos-v1";
    std::optional<std::filesystem::path> cachePath;
    std::filesystem::path outputDir = "results";
    std::optional<std::size_t> limit;
    std::optional<std::filesystem::path> mockFixtures;
    std::optional<std::filesystem::path> promptDir;
    // When false, latency_ms is written as 0 so reports are byte-stable.
    bool recordTimings = true;

    /// Throws ConfigError. Fixed mode requires lambda; other modes reject it.
    void validate() const;

    PipelineConfig pipeline() const;
};

/// One record under one mode.
struct QueryRow {
    std::string id;
    std::string dataset;
    RunMode mode = RunMode::Vanilla;
    std::optional<double> lambda;
    double f1 = 0.0;
    double latencyMs = 0.0;
    std::optional<std::size_t> planSteps;
    std::optional<int> supportTotal;
    std::map<std::string, double> stageTimings;
    std::string answer;
    // Candidate-set overlap across the λ grid (DF-RAG modes, uniform sampler).
    std::optional<double> jaccardAdjacent;
    std::optional<double> jaccardOffDiagonal;
};

struct RunReport {
    // Grouped by mode (config order), records in file order within a mode.
    std::vector<QueryRow> perQuery;
    std::map<RunMode, std::size_t> failures;
    std::vector<std::string> failureNotes;
    std::vector<std::pair<std::string, std::string>> configEcho;
    bool recordTimings = true;

    std::vector<RunMode> modes() const;
    std::vector<std::string> datasets() const;
    /// Arithmetic mean of f1 over matching rows; nullopt when there are none.
    std::optional<double> meanF1(RunMode mode, std::optional<std::string_view> dataset = std::nullopt) const;
};

/// Means over ids present under vanilla, oracle and `dfragMode`, fed to
/// gapClosure. nullopt when any mode is absent or the gap vanishes.
std::optional<double> joinedGapClosure(std::span<const QueryRow> rows, RunMode dfragMode = RunMode::Dfrag);

/// Loads the dataset and dispatches every mode over every record. Record
/// failures are counted and logged; throws only on config or dataset
/// errors, or when no query succeeded. Backends come from mockFixtures when
/// set, else the configured endpoint.
RunReport runExperiment(const ExperimentConfig& config);

/// Same, with caller-owned backends.
RunReport runExperiment(const ExperimentConfig& config, ChatBackend& chat, EmbeddingBackend& embedder);

/// Writes per_query.csv and summary.md into `dir`; returns their paths.
/// Output bytes depend only on the report. Throws IoError.
std::vector<std::filesystem::path> emitReport(const RunReport& report, const std::filesystem::path& dir);

/// Column order of per_query.csv.
inline constexpr std::string_view kPerQueryHeader = "id,mode,lambda,f1,latency_ms,plan_steps,support_total";

/// Mean wall-clock milliseconds of the Evaluator stage per record, for each
/// worker count. Planning and retrieval run once per record, untimed.
std::map<std::size_t, double> measureLatency(const ExperimentConfig& config, std::span<const std::size_t> workerCounts);
std::map<std::size_t, double> measureLatency(const ExperimentConfig& config, std::span<const std::size_t> workerCounts,
                                             ChatBackend& chat, EmbeddingBackend& embedder);

}  // namespace dfrag
