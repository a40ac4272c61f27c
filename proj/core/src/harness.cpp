#include "dfrag/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dfrag/embedding_cache.hpp"
#include "dfrag/error.hpp"
#include "dfrag/llm.hpp"
#include "dfrag/metrics.hpp"
#include "dfrag/mock_backend.hpp"
#include "dfrag/openai_backend.hpp"
#include "dfrag/parallel.hpp"

namespace dfrag {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::pair<RunMode, std::string_view> kModeNames[] = {
    {RunMode::Vanilla, "vanilla"}, {RunMode::Fixed, "fixed"},   {RunMode::Dfrag, "dfrag"},
    {RunMode::DfragIc, "dfrag_ic"}, {RunMode::Oracle, "oracle"}, {RunMode::ClassicMmr, "classic_mmr"},
};

std::string_view displayName(RunMode mode) {
    switch (mode) {
        case RunMode::Vanilla: return "Vanilla RAG";
        case RunMode::Fixed: return "Fixed-λ RAG";
        case RunMode::Dfrag: return "DF-RAG";
        case RunMode::DfragIc: return "DF-RAG (IC)";
        case RunMode::Oracle: return "Oracle";
        case RunMode::ClassicMmr: return "DF-RAG (classic MMR)";
    }
    return "?";
}

std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string fixed(double v, int precision) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return std::string(buf, end);
}

std::string csvField(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

double msSince(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool isDfragMode(RunMode m) {
    return m == RunMode::Dfrag || m == RunMode::DfragIc || m == RunMode::ClassicMmr;
}

void widenInflightLimit(std::size_t needed) {
    auto& limiter = globalInflightLimiter();
    if (limiter.limit() < needed) limiter.setLimit(needed);
}

struct Backends {
    std::unique_ptr<MockBackend> mock;
    std::unique_ptr<OpenAiCompatibleBackend> remote;
    ChatBackend* chat = nullptr;
    EmbeddingBackend* embedder = nullptr;
};

Backends makeBackends(const ExperimentConfig& config) {
    Backends b;
    if (config.mockFixtures) {
        b.mock = MockBackend::fromFixtureFile(*config.mockFixtures);
        b.chat = b.mock.get();
        b.embedder = b.mock.get();
    } else {
        ServiceConfig sc;
        sc.baseUrl = config.endpoint;
        sc.applyEnvironment();
        b.remote = std::make_unique<OpenAiCompatibleBackend>(sc);
        b.chat = b.remote.get();
        b.embedder = b.remote.get();
    }
    return b;
}

std::vector<QARecord> loadRecords(const ExperimentConfig& config) {
    auto records = loadDataset(config.datasetPath, config.datasetFormat);
    if (config.limit && records.size() > *config.limit) records.resize(*config.limit);
    return records;
}

PromptSet loadPrompts(const ExperimentConfig& config) {
    return PromptSet::load(config.promptDir.value_or(defaultPromptDir()));
}

QueryRow runMode(RunMode mode, const QARecord& record, const PreparedQuery& prepared, const ExperimentConfig& config,
                 const Services& services) {
    PipelineConfig pc = config.pipeline();
    QueryRow row;
    row.id = record.id;
    row.dataset = record.datasetName;
    row.mode = mode;
    const auto start = Clock::now();

    auto fillDfrag = [&](const DfragResult& r) {
        row.lambda = r.chosenLambda;
        row.answer = r.answer;
        row.planSteps = r.plan.steps.size();
        row.supportTotal = r.allScores.at(r.chosenLambda).total;
        row.stageTimings = r.timings;
        if (r.candidateSets.size() >= 2 && pc.sampler == SamplerKind::Uniform) {
            const auto m = jaccardMatrix(r.candidateSets);
            row.jaccardAdjacent = m.meanAdjacent();
            row.jaccardOffDiagonal = m.meanOffDiagonal();
        }
    };

    switch (mode) {
        case RunMode::Vanilla: {
            auto r = runVanilla(record, prepared, pc, services);
            row.answer = r.answer;
            break;
        }
        case RunMode::Fixed: {
            auto r = runFixedLambda(record, prepared, *config.lambda, pc, services);
            row.lambda = *config.lambda;
            row.answer = r.answer;
            break;
        }
        case RunMode::Dfrag:
            fillDfrag(runDfrag(record, prepared, pc, services, DfragMode::Dfrag));
            break;
        case RunMode::DfragIc:
            fillDfrag(runDfrag(record, prepared, pc, services, DfragMode::DfragIc));
            break;
        case RunMode::ClassicMmr:
            pc.selector = Selector::ClassicMmr;
            fillDfrag(runDfrag(record, prepared, pc, services, DfragMode::Dfrag));
            break;
        case RunMode::Oracle: {
            auto r = runOracle(record, prepared, pc, services);
            row.lambda = r.bestLambda;
            row.answer = r.answerAtBest;
            row.f1 = r.bestF1;
            break;
        }
    }
    if (mode != RunMode::Oracle) {
        row.f1 = tokenF1(row.answer, record.goldAnswers).f1;
    }
    row.latencyMs = config.recordTimings ? msSince(start) : 0.0;
    if (!config.recordTimings) row.stageTimings.clear();
    return row;
}

}  // namespace

std::optional<RunMode> parseRunMode(std::string_view name) {
    for (const auto& [mode, n] : kModeNames) {
        if (n == name) return mode;
    }
    return std::nullopt;
}

std::string_view toString(RunMode mode) {
    for (const auto& [m, n] : kModeNames) {
        if (m == mode) return n;
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (modes.empty()) {
        fail(ErrorKind::ConfigError, "at least one mode is required");
    }
    const bool hasFixed = std::find(modes.begin(), modes.end(), RunMode::Fixed) != modes.end();
    if (hasFixed && !lambda) {
        fail(ErrorKind::ConfigError, "mode 'fixed' requires a lambda");
    }
    if (!hasFixed && lambda) {
        fail(ErrorKind::ConfigError, "lambda is only accepted with mode 'fixed'");
    }
    if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) {
        fail(ErrorKind::ConfigError, "lambda must lie in [0, 1]");
    }
    if (chunkWords == 0) fail(ErrorKind::ConfigError, "chunk words must be positive");
    if (k == 0) fail(ErrorKind::ConfigError, "k must be positive");
    if (workers == 0 || recordWorkers == 0) fail(ErrorKind::ConfigError, "worker counts must be positive");
    if (datasetPath.empty()) fail(ErrorKind::ConfigError, "a dataset path is required");
    if (limit && *limit == 0) fail(ErrorKind::ConfigError, "limit must be positive");
}

PipelineConfig ExperimentConfig::pipeline() const {
    PipelineConfig pc;
    pc.chunkWords = chunkWords;
    pc.k = k;
    pc.sampler = sampler;
    pc.workers = workers;
    pc.chatModel = chatModel;
    pc.embed.modelId = embedModel;
    return pc;
}

std::vector<RunMode> RunReport::modes() const {
    std::vector<RunMode> out;
    for (const auto& r : perQuery) {
        if (std::find(out.begin(), out.end(), r.mode) == out.end()) out.push_back(r.mode);
    }
    return out;
}

std::vector<std::string> RunReport::datasets() const {
    std::set<std::string> names;
    for (const auto& r : perQuery) names.insert(r.dataset);
    return {names.begin(), names.end()};
}

std::optional<double> RunReport::meanF1(RunMode mode, std::optional<std::string_view> dataset) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : perQuery) {
        if (r.mode != mode || (dataset && r.dataset != *dataset)) continue;
        sum += r.f1;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> joinedGapClosure(std::span<const QueryRow> rows, RunMode dfragMode) {
    std::map<std::string, double> vanilla, oracle, dfrag;
    for (const auto& r : rows) {
        if (r.mode == RunMode::Vanilla) vanilla.emplace(r.id, r.f1);
        else if (r.mode == RunMode::Oracle) oracle.emplace(r.id, r.f1);
        else if (r.mode == dfragMode) dfrag.emplace(r.id, r.f1);
    }
    double v = 0.0, o = 0.0, d = 0.0;
    std::size_t n = 0;
    for (const auto& [id, f1] : dfrag) {
        auto vi = vanilla.find(id);
        auto oi = oracle.find(id);
        if (vi == vanilla.end() || oi == oracle.end()) continue;
        v += vi->second;
        o += oi->second;
        d += f1;
        ++n;
    }
    if (n == 0) return std::nullopt;
    const auto count = static_cast<double>(n);
    return gapClosure(v / count, d / count, o / count);
}

RunReport runExperiment(const ExperimentConfig& config) {
    config.validate();
    auto backends = makeBackends(config);
    return runExperiment(config, *backends.chat, *backends.embedder);
}

RunReport runExperiment(const ExperimentConfig& config, ChatBackend& chat, EmbeddingBackend& embedder) {
    config.validate();
    const auto records = loadRecords(config);
    const auto prompts = loadPrompts(config);
    std::unique_ptr<EmbeddingCache> cache =
        config.cachePath ? std::make_unique<EmbeddingCache>(*config.cachePath) : std::make_unique<EmbeddingCache>();
    const Services services{chat, embedder, cache.get(), prompts};
    widenInflightLimit(config.workers * config.recordWorkers);

    const std::size_t nModes = config.modes.size();
    std::vector<std::optional<QueryRow>> slots(records.size() * nModes);
    std::vector<std::string> errors(records.size() * nModes);

    parallelFor(records.size(), config.recordWorkers, [&](std::size_t i) {
        const auto& record = records[i];
        std::optional<PreparedQuery> prepared;
        std::string prepError;
        try {
            prepared = prepareQuery(record, config.pipeline(), services);
        } catch (const std::exception& e) {
            prepError = std::string("prepare: ") + e.what();
        }
        for (std::size_t m = 0; m < nModes; ++m) {
            const std::size_t slot = m * records.size() + i;
            if (!prepared) {
                errors[slot] = prepError;
                continue;
            }
            try {
                slots[slot] = runMode(config.modes[m], record, *prepared, config, services);
            } catch (const std::exception& e) {
                errors[slot] = e.what();
            }
        }
    });

    RunReport report;
    report.recordTimings = config.recordTimings;
    std::size_t ok = 0;
    for (std::size_t m = 0; m < nModes; ++m) {
        report.failures[config.modes[m]] += 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const std::size_t slot = m * records.size() + i;
            if (slots[slot]) {
                report.perQuery.push_back(std::move(*slots[slot]));
                ++ok;
            } else {
                ++report.failures[config.modes[m]];
                const auto note = records[i].id + " [" + std::string(toString(config.modes[m])) + "]: " + errors[slot];
                spdlog::warn("record failed: {}", note);
                report.failureNotes.push_back(note);
            }
        }
    }
    if (ok == 0 && !records.empty()) {
        throw Error(ErrorKind::ServiceError, "no query succeeded",
                    report.failureNotes.empty() ? std::string{} : report.failureNotes.front());
    }

    std::string modes;
    for (auto m : config.modes) {
        if (!modes.empty()) modes += ',';
        modes += toString(m);
    }
    report.configEcho = {
        {"modes", modes},
        {"dataset", config.datasetPath.filename().string()},
        {"format", std::string(toString(config.datasetFormat))},
        {"records", std::to_string(records.size())},
        {"chunk_words", std::to_string(config.chunkWords)},
        {"k", std::to_string(config.k)},
        {"lambda", config.lambda ? shortest(*config.lambda) : "-"},
        {"sampler", config.sampler == SamplerKind::Uniform ? "uniform" : "binary"},
        {"workers", std::to_string(config.workers)},
        {"chat_model", config.chatModel},
        {"embed_model", config.embedModel},
        {"backend", config.mockFixtures ? "mock" : config.endpoint},
    };
    return report;
}

std::vector<std::filesystem::path> emitReport(const RunReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create output directory: " + ec.message(), dir.string());
    }
    const auto csvPath = dir / "per_query.csv";
    const auto mdPath = dir / "summary.md";

    std::ostringstream csv;
    csv << kPerQueryHeader << '\n';
    for (const auto& r : report.perQuery) {
        csv << csvField(r.id) << ',' << toString(r.mode) << ',' << (r.lambda ? shortest(*r.lambda) : "") << ','
            << shortest(r.f1) << ',' << fixed(report.recordTimings ? r.latencyMs : 0.0, 3) << ','
            << (r.planSteps ? std::to_string(*r.planSteps) : "") << ','
            << (r.supportTotal ? std::to_string(*r.supportTotal) : "") << '\n';
    }

    const auto modes = report.modes();
    const auto datasets = report.datasets();
    std::ostringstream md;
    md << "# Run summary\n\n";
    std::size_t failed = 0;
    for (const auto& [m, n] : report.failures) failed += n;
    md << "Samples: " << report.perQuery.size() << " (failed: " << failed << ")\n\n";

    if (report.perQuery.empty()) {
        md << "No successful samples.\n\n";
    } else {
        md << "## F1 (x100)\n\n| Method |";
        for (const auto& d : datasets) md << ' ' << d << " |";
        md << " Avg |\n|---|";
        for (std::size_t i = 0; i < datasets.size(); ++i) md << "---:|";
        md << "---:|\n";
        for (auto m : modes) {
            md << "| " << displayName(m) << " |";
            for (const auto& d : datasets) {
                const auto v = report.meanF1(m, d);
                md << ' ' << (v ? fixed(*v * 100.0, 1) : "-") << " |";
            }
            md << ' ' << fixed(*report.meanF1(m) * 100.0, 1) << " |\n";
        }
        md << '\n';

        std::vector<RunMode> lambdaModes;
        for (auto m : modes) {
            if (m != RunMode::Vanilla && m != RunMode::Fixed) lambdaModes.push_back(m);
        }
        if (!lambdaModes.empty()) {
            std::map<RunMode, std::map<double, std::size_t>> hist;
            std::set<double> keys;
            for (auto m : lambdaModes) {
                std::vector<double> ls;
                for (const auto& r : report.perQuery) {
                    if (r.mode == m && r.lambda) ls.push_back(*r.lambda);
                }
                hist[m] = lambdaHistogram(std::span<const double>(ls));
                for (const auto& [l, n] : hist[m]) keys.insert(l);
            }
            md << "## Chosen λ\n\n| λ |";
            for (auto m : lambdaModes) md << ' ' << displayName(m) << " |";
            md << "\n|---:|";
            for (std::size_t i = 0; i < lambdaModes.size(); ++i) md << "---:|";
            md << '\n';
            for (double l : keys) {
                md << "| " << fixed(l, 1) << " |";
                for (auto m : lambdaModes) {
                    const auto it = hist[m].find(l);
                    md << ' ' << (it == hist[m].end() ? 0 : it->second) << " |";
                }
                md << '\n';
            }
            md << '\n';
        }

        bool jaccardHeader = false;
        for (auto m : modes) {
            double adj = 0.0, off = 0.0;
            std::size_t n = 0;
            for (const auto& r : report.perQuery) {
                if (r.mode != m || !r.jaccardAdjacent) continue;
                adj += *r.jaccardAdjacent;
                off += *r.jaccardOffDiagonal;
                ++n;
            }
            if (n == 0) continue;
            if (!jaccardHeader) {
                md << "## Candidate-set overlap (Jaccard)\n\n| Method | Adjacent λ | All pairs | Queries |\n"
                      "|---|---:|---:|---:|\n";
                jaccardHeader = true;
            }
            md << "| " << displayName(m) << " | " << fixed(adj / static_cast<double>(n), 3) << " | "
               << fixed(off / static_cast<double>(n), 3) << " | " << n << " |\n";
        }
        if (jaccardHeader) md << '\n';

        bool gapHeader = false;
        for (auto m : modes) {
            if (!isDfragMode(m)) continue;
            const auto g = joinedGapClosure(report.perQuery, m);
            if (!g) continue;
            if (!gapHeader) {
                md << "## Gap closure\n\n| Method | Closure |\n|---|---:|\n";
                gapHeader = true;
            }
            md << "| " << displayName(m) << " | " << fixed(*g * 100.0, 1) << "% |\n";
        }
        if (gapHeader) md << '\n';

        bool planHeader = false;
        for (auto m : modes) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& r : report.perQuery) {
                if (r.mode != m || !r.planSteps) continue;
                sum += static_cast<double>(*r.planSteps);
                ++n;
            }
            if (n == 0) continue;
            if (!planHeader) {
                md << "## Planner\n\n| Method | Mean steps |\n|---|---:|\n";
                planHeader = true;
            }
            md << "| " << displayName(m) << " | " << fixed(sum / static_cast<double>(n), 2) << " |\n";
        }
        if (planHeader) md << '\n';
    }

    md << "## Failures\n\n| Mode | Failed |\n|---|---:|\n";
    for (const auto& [m, n] : report.failures) md << "| " << toString(m) << " | " << n << " |\n";
    md << '\n';

    if (!report.configEcho.empty()) {
        md << "## Configuration\n\n";
        for (const auto& [k, v] : report.configEcho) md << "- " << k << ": " << v << '\n';
    }

    for (const auto& [path, body] : {std::pair{csvPath, csv.str()}, std::pair{mdPath, md.str()}}) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << body;
        if (!out) {
            throw Error(ErrorKind::IoError, "cannot write report file", path.string());
        }
    }
    return {csvPath, mdPath};
}

std::map<std::size_t, double> measureLatency(const ExperimentConfig& config,
                                             std::span<const std::size_t> workerCounts) {
    auto backends = makeBackends(config);
    return measureLatency(config, workerCounts, *backends.chat, *backends.embedder);
}

std::map<std::size_t, double> measureLatency(const ExperimentConfig& config, std::span<const std::size_t> workerCounts,
                                             ChatBackend& chat, EmbeddingBackend& embedder) {
    if (workerCounts.empty()) {
        fail(ErrorKind::ConfigError, "at least one worker count is required");
    }
    for (auto w : workerCounts) {
        if (w == 0) fail(ErrorKind::ConfigError, "worker counts must be positive");
    }
    const auto records = loadRecords(config);
    const auto prompts = loadPrompts(config);
    EmbeddingCache cache;
    const Services services{chat, embedder, &cache, prompts};
    const PipelineConfig pc = config.pipeline();
    widenInflightLimit(*std::max_element(workerCounts.begin(), workerCounts.end()));

    struct Sample {
        Plan plan;
        std::vector<CandidateSet> sets;
    };
    std::vector<Sample> samples;
    for (const auto& record : records) {
        const auto prepared = prepareQuery(record, pc, services);
        samples.push_back({planQuery(record.question, pc, services),
                           sampleUniform(prepared.query, prepared.pool, pc.k, pc.dfragGrid, pc.selector)});
    }
    if (samples.empty()) {
        fail(ErrorKind::DatasetError, "no records to time", config.datasetPath.string());
    }

    std::map<std::size_t, double> out;
    for (auto w : workerCounts) {
        double total = 0.0;
        for (const auto& s : samples) {
            const auto start = Clock::now();
            parallelFor(s.sets.size(), w, [&](std::size_t i) { scoreCandidateSet(s.plan, s.sets[i], pc, services); });
            total += msSince(start);
        }
        out[w] = total / static_cast<double>(samples.size());
    }
    return out;
}

}  // namespace dfrag
