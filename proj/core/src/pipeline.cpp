#include "dfrag/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <mutex>
#include <regex>
#include <sstream>

#include "dfrag/error.hpp"
#include "dfrag/metrics.hpp"
#include "dfrag/parallel.hpp"

namespace dfrag {

namespace {

using Clock = std::chrono::steady_clock;

double msSince(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

ChatRequest makeRequest(const std::string& prompt, const std::string& stage, int maxTokens,
                        const PipelineConfig& config) {
    ChatRequest req;
    req.modelId = config.chatModel;
    req.messages.push_back({Role::User, prompt});
    req.temperature = 0.0;
    req.maxTokens = maxTokens;
    req.stage = stage;
    return req;
}

const CandidateSet& setWithLambda(const std::vector<CandidateSet>& sets, double lambda) {
    for (const auto& s : sets) {
        if (s.lambda == lambda) return s;
    }
    fail(ErrorKind::InvalidArgument, "no candidate set at λ = " + std::to_string(lambda));
}

}  // namespace

PreparedQuery prepareQuery(const QARecord& record, const PipelineConfig& config, const Services& services) {
    auto chunks = chunkDocument(record.context, config.chunkWords);
    if (config.dropShortTail && chunks.size() > config.k && chunks.back().wordCount < config.chunkWords) {
        chunks.pop_back();
    }
    auto pool = embedChunks(std::move(chunks), services.embedder, services.cache, config.embed);
    auto query = embedText(record.question, services.embedder, services.cache, config.embed);
    return PreparedQuery{std::move(query), std::move(pool)};
}

Plan parsePlan(std::string_view raw, std::size_t maxSteps) {
    static const std::regex kStep(R"(^\s*\d+[\).]\s+(.*)$)");
    Plan plan;
    plan.rawText = std::string(raw);
    for (const auto& line : lines(raw)) {
        std::smatch m;
        if (!std::regex_match(line, m, kStep)) continue;
        std::string step = trim(m[1].str());
        if (step.empty()) continue;
        if (plan.steps.size() == maxSteps) break;
        plan.steps.push_back(std::move(step));
    }
    if (plan.steps.empty()) {
        throw Error(ErrorKind::PlanParseError, "planner output has no numbered steps", plan.rawText);
    }
    return plan;
}

std::string renderPlan(const Plan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        if (i) out += '\n';
        out += std::to_string(i + 1) + ") " + plan.steps[i];
    }
    return out;
}

Plan planQuery(const std::string& question, const PipelineConfig& config, const Services& services) {
    if (trim(question).empty()) {
        fail(ErrorKind::InvalidArgument, "empty question");
    }
    const auto prompt = renderPrompt(services.prompts.planner, {{"question", question}});
    const auto raw = complete(makeRequest(prompt, "planner", config.maxTokens.planner, config), services.chat,
                              config.retry);
    return parsePlan(raw, config.maxPlanSteps);
}

StepScores parseEvaluatorOutput(std::string_view raw, std::size_t planSteps) {
    static const std::regex kTotal(R"(total\s+score\s*:?\s*\**\s*(-?\d+))", std::regex::icase);
    static const std::regex kStep(R"(^\s*(?:\d+\s*[\).:]?\s*)?\**\s*score\s*:?\s*\**\s*(-?\d+)\s*\**\.?\s*(.*)$)",
                                  std::regex::icase);
    static const std::regex kExplanation(R"(short\s+explanation\s*:\s*(.*)$)", std::regex::icase);

    std::vector<int> parsed;
    std::vector<std::string> explanations;
    std::optional<int> statedTotal;
    for (const auto& line : lines(raw)) {
        std::smatch m;
        if (std::regex_search(line, m, kTotal)) {
            statedTotal = std::stoi(m[1].str());
            continue;
        }
        if (std::regex_match(line, m, kStep)) {
            parsed.push_back(std::stoi(m[1].str()));
            const std::string rest = m[2].str();
            std::smatch e;
            explanations.push_back(std::regex_search(rest, e, kExplanation) ? trim(e[1].str()) : trim(rest));
        }
    }

    StepScores out;
    if (parsed.empty() && !statedTotal) {
        throw Error(ErrorKind::EvalParseError, "evaluator output has no scores",
                    std::string(raw.substr(0, 300)));
    }

    if (!parsed.empty()) {
        for (int& s : parsed) {
            const int clamped = std::clamp(s, 0, 5);
            if (clamped != s) {
                out.warnings.push_back("step score " + std::to_string(s) + " clamped to " + std::to_string(clamped));
                s = clamped;
            }
        }
        if (parsed.size() != planSteps) {
            out.warnings.push_back("evaluator scored " + std::to_string(parsed.size()) + " steps, plan has " +
                                   std::to_string(planSteps));
        }
        parsed.resize(planSteps, 0);
        explanations.resize(planSteps);
        out.perStep = std::move(parsed);
        out.explanations = std::move(explanations);
        for (int s : out.perStep) out.total += s;
        if (statedTotal && *statedTotal != out.total) {
            out.warnings.push_back("stated total " + std::to_string(*statedTotal) + " differs from step sum " +
                                   std::to_string(out.total));
        }
        return out;
    }

    int remaining = std::clamp(*statedTotal, 0, static_cast<int>(5 * planSteps));
    out.warnings.push_back("no per-step scores; spreading total " + std::to_string(remaining));
    for (std::size_t i = 0; i < planSteps; ++i) {
        const int s = std::min(5, remaining);
        out.perStep.push_back(s);
        remaining -= s;
    }
    out.explanations.assign(planSteps, {});
    for (int s : out.perStep) out.total += s;
    return out;
}

std::string renderChunks(const CandidateSet& set) {
    std::string out;
    for (std::size_t i = 0; i < set.chunks.size(); ++i) {
        if (i) out += '\n';
        out += '"' + set.chunks[i].text + '"';
    }
    return out;
}

StepScores scoreCandidateSet(const Plan& plan, const CandidateSet& set, const PipelineConfig& config,
                             const Services& services) {
    if (plan.steps.empty()) {
        fail(ErrorKind::InvalidArgument, "cannot score against an empty plan");
    }
    if (set.chunks.empty()) {
        fail(ErrorKind::EmptySet, "cannot score an empty candidate set");
    }
    const auto prompt = renderPrompt(services.prompts.evaluator, {{"few_shot_examples", services.prompts.fewShotExamples},
                                                                  {"plan", renderPlan(plan)},
                                                                  {"chunks", renderChunks(set)}});
    const auto raw = complete(makeRequest(prompt, "evaluator", config.maxTokens.evaluator, config), services.chat,
                              config.retry);
    return parseEvaluatorOutput(raw, plan.steps.size());
}

double selectLambda(const std::map<double, int>& scores) {
    if (scores.empty()) {
        fail(ErrorKind::InvalidArgument, "selectLambda needs at least one score");
    }
    int best = scores.begin()->second;
    for (const auto& [lambda, s] : scores) best = std::max(best, s);
    std::vector<double> tied;
    for (const auto& [lambda, s] : scores) {
        if (s == best) tied.push_back(lambda);
    }
    // Map order keeps `tied` ascending; size/2 is the middle element for odd
    // counts and the upper of the two middles for even counts.
    return tied[tied.size() / 2];
}

std::string buildGeneratorContext(const CandidateSet& set, const std::string& reasoningNotes) {
    std::string out;
    if (!reasoningNotes.empty()) {
        out += "Reasoning notes:\n" + reasoningNotes + "\n\n";
    }
    for (std::size_t i = 0; i < set.chunks.size(); ++i) {
        if (i) out += "\n\n";
        out += set.chunks[i].text;
    }
    return out;
}

std::string buildIncrementalContext(const Plan& plan, const StepScores& scores) {
    std::string out = "Plan:\n" + renderPlan(plan);
    bool header = false;
    for (std::size_t i = 0; i < scores.explanations.size(); ++i) {
        if (scores.explanations[i].empty()) continue;
        if (!header) {
            out += "\nEvidence:";
            header = true;
        }
        out += "\n" + std::to_string(i + 1) + ". " + scores.explanations[i];
    }
    return out;
}

std::string generateAnswer(const std::string& question, const CandidateSet& set, const PipelineConfig& config,
                           const Services& services, const std::string& reasoningNotes) {
    const auto prompt = renderPrompt(services.prompts.generator,
                                     {{"context", buildGeneratorContext(set, reasoningNotes)}, {"query", question}});
    return trim(complete(makeRequest(prompt, "generator", config.maxTokens.generator, config), services.chat,
                         config.retry));
}

DfragResult runDfrag(const QARecord& record, const PipelineConfig& config, const Services& services,
                     DfragMode mode) {
    const auto start = Clock::now();
    const auto prepared = prepareQuery(record, config, services);
    const double prepMs = msSince(start);
    auto result = runDfrag(record, prepared, config, services, mode);
    result.timings["prepare"] = prepMs;
    result.timings["total"] += prepMs;
    return result;
}

DfragResult runDfrag(const QARecord& record, const PreparedQuery& prepared, const PipelineConfig& config,
                     const Services& services, DfragMode mode) {
    const auto start = Clock::now();
    DfragResult result;
    result.mode = mode;

    std::mutex scoresMutex;
    auto scoreOne = [&](const Plan& plan, const CandidateSet& set) {
        StepScores scores;
        try {
            scores = scoreCandidateSet(plan, set, config, services);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EvalParseError) throw;
            scores.perStep.assign(plan.steps.size(), 0);
            scores.explanations.assign(plan.steps.size(), {});
            scores.warnings.push_back(e.what());
        }
        std::lock_guard lock(scoresMutex);
        for (const auto& w : scores.warnings) {
            result.warnings.push_back("λ=" + std::to_string(set.lambda) + ": " + w);
        }
        result.allScores[set.lambda] = scores;
        return scores.total;
    };

    if (config.sampler == SamplerKind::Uniform) {
        // Planner and candidate retrieval are independent; run them together.
        auto planStart = Clock::now();
        auto planFuture = std::async(std::launch::async, [&] {
            auto p = planQuery(record.question, config, services);
            return std::make_pair(std::move(p), msSince(planStart));
        });
        const auto sampleStart = Clock::now();
        std::vector<CandidateSet> sets;
        try {
            sets = sampleUniform(prepared.query, prepared.pool, config.k, config.dfragGrid, config.selector);
        } catch (...) {
            planFuture.wait();
            throw;
        }
        result.timings["sample"] = msSince(sampleStart);
        auto [plan, planMs] = planFuture.get();
        result.plan = std::move(plan);
        result.timings["plan"] = planMs;

        const auto evalStart = Clock::now();
        parallelFor(sets.size(), config.workers, [&](std::size_t i) {
            const int total = scoreOne(result.plan, sets[i]);
            sets[i].supportScore = total;
        });
        result.timings["evaluate"] = msSince(evalStart);

        std::map<double, int> totals;
        for (const auto& s : sets) totals[s.lambda] = *s.supportScore;
        result.chosenLambda = selectLambda(totals);
        result.chosenSet = setWithLambda(sets, result.chosenLambda);
        result.candidateSets = std::move(sets);
    } else {
        const auto planStart = Clock::now();
        result.plan = planQuery(record.question, config, services);
        result.timings["plan"] = msSince(planStart);

        const auto evalStart = Clock::now();
        auto search = sampleBinarySearch(prepared.query, prepared.pool, config.k, config.dfragGrid,
                                         [&](const CandidateSet& s) { return scoreOne(result.plan, s); },
                                         config.selector);
        result.timings["evaluate"] = msSince(evalStart);
        result.chosenLambda = config.dfragGrid[search.bestIndex];
        result.chosenSet = std::move(search.bestSet);
        result.candidateSets = std::move(search.probedSets);
        std::sort(result.candidateSets.begin(), result.candidateSets.end(),
                  [](const CandidateSet& a, const CandidateSet& b) { return a.lambda < b.lambda; });
    }

    std::string notes;
    if (mode == DfragMode::DfragIc) {
        notes = buildIncrementalContext(result.plan, result.allScores.at(result.chosenLambda));
    }
    const auto genStart = Clock::now();
    result.answer = generateAnswer(record.question, result.chosenSet, config, services, notes);
    result.timings["generate"] = msSince(genStart);
    result.timings["total"] = msSince(start);
    return result;
}

OracleResult runOracle(const QARecord& record, const PipelineConfig& config, const Services& services) {
    return runOracle(record, prepareQuery(record, config, services), config, services);
}

OracleResult runOracle(const QARecord& record, const PreparedQuery& prepared, const PipelineConfig& config,
                       const Services& services) {
    if (record.goldAnswers.empty()) {
        fail(ErrorKind::InvalidArgument, "Oracle needs gold answers for record " + record.id);
    }
    const auto& grid = config.sweepGrid;
    OracleResult result;
    result.candidateSets = sampleUniform(prepared.query, prepared.pool, config.k, grid, config.selector);

    std::vector<std::string> answers(grid.size());
    std::vector<double> f1s(grid.size(), 0.0);
    parallelFor(grid.size(), config.workers, [&](std::size_t i) {
        try {
            answers[i] = generateAnswer(record.question, result.candidateSets[i], config, services);
            f1s[i] = tokenF1(answers[i], record.goldAnswers).f1;
        } catch (const Error&) {
            answers[i].clear();
            f1s[i] = 0.0;
        }
    });

    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        result.perLambdaF1[grid[i]] = f1s[i];
        result.answers[grid[i]] = answers[i];
        if (f1s[i] > f1s[best]) best = i;
    }
    result.bestLambda = grid[best];
    result.bestF1 = f1s[best];
    result.answerAtBest = answers[best];
    return result;
}

RetrievedAnswer runFixedLambda(const QARecord& record, double lambda, const PipelineConfig& config,
                               const Services& services) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        fail(ErrorKind::LambdaOutOfRange, "λ = " + std::to_string(lambda));
    }
    return runFixedLambda(record, prepareQuery(record, config, services), lambda, config, services);
}

RetrievedAnswer runFixedLambda(const QARecord& record, const PreparedQuery& prepared, double lambda,
                               const PipelineConfig& config, const Services& services) {
    RetrievedAnswer out;
    out.set = selectChunks(config.selector, prepared.query, prepared.pool, config.k, lambda);
    out.answer = generateAnswer(record.question, out.set, config, services);
    return out;
}

RetrievedAnswer runVanilla(const QARecord& record, const PipelineConfig& config, const Services& services) {
    return runVanilla(record, prepareQuery(record, config, services), config, services);
}

RetrievedAnswer runVanilla(const QARecord& record, const PreparedQuery& prepared, const PipelineConfig& config,
                           const Services& services) {
    RetrievedAnswer out;
    out.set = selectTopKCosine(prepared.query, prepared.pool, config.k);
    out.answer = generateAnswer(record.question, out.set, config, services);
    return out;
}

std::map<double, std::size_t> lambdaHistogram(std::span<const DfragResult> results) {
    std::vector<double> lambdas;
    for (const auto& r : results) lambdas.push_back(r.chosenLambda);
    return lambdaHistogram(std::span<const double>(lambdas));
}

std::map<double, std::size_t> lambdaHistogram(std::span<const OracleResult> results) {
    std::vector<double> lambdas;
    for (const auto& r : results) lambdas.push_back(r.bestLambda);
    return lambdaHistogram(std::span<const double>(lambdas));
}

double meanPlanSteps(std::span<const DfragResult> results) {
    if (results.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : results) sum += static_cast<double>(r.plan.steps.size());
    return sum / static_cast<double>(results.size());
}

}  // namespace dfrag
