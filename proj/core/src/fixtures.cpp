#include "dfrag/fixtures.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dfrag/error.hpp"

namespace dfrag {

namespace {

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ren", "tu", "sa", "vel", "dor", "ish", "pa",
                                      "nor", "qui", "zen", "ba", "lit", "mor", "fa", "gre", "hol", "ost"};

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

    std::string word(std::size_t minSyl, std::size_t maxSyl) {
        const std::size_t n = minSyl + pick(maxSyl - minSyl + 1);
        std::string w;
        for (std::size_t i = 0; i < n; ++i) w += kSyllables[pick(std::size(kSyllables))];
        return w;
    }

    std::string name(std::size_t minSyl, std::size_t maxSyl) {
        auto w = word(minSyl, maxSyl);
        w[0] = static_cast<char>(w[0] - 'a' + 'A');
        return w;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates on the raw engine so output does not depend on the
        // standard library's distribution implementations.
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(i)]);
    }

private:
    std::mt19937_64 rng_;
};

// Pads `sentence` with filler words to exactly `w` words.
std::string padTo(const std::string& sentence, std::size_t w, Gen& gen) {
    auto words = splitWords(sentence);
    if (words.size() > w) {
        fail(ErrorKind::InvalidArgument, "fixture chunk size too small for its sentence");
    }
    std::string out = sentence;
    for (std::size_t i = words.size(); i < w; ++i) out += ' ' + gen.word(2, 3);
    return out;
}

}  // namespace

PlantedFixture makePlantedFixture(const FixtureOptions& options) {
    if (options.queries == 0 || options.redundantChunks == 0) {
        fail(ErrorKind::InvalidArgument, "fixture needs at least one query and one subject chunk");
    }
    Gen gen(options.seed);
    PlantedFixture fx;
    nlohmann::ordered_json plans = nlohmann::ordered_json::object();

    for (std::size_t q = 0; q < options.queries; ++q) {
        const std::string company = gen.name(2, 3) + "corp";
        const std::string founder = gen.name(2, 2) + " " + gen.name(2, 3);
        const std::string city = gen.name(3, 3);
        std::string wrong = gen.name(3, 3);
        while (wrong == city) wrong = gen.name(3, 3);

        const std::string subjectLines[] = {
            "The founder of " + company + " built the company from a small workshop.",
            company + " is a trading company whose founder still chairs the board.",
            "Reports on " + company + " describe the founder as a careful manager.",
            "Under its founder " + company + " grew into a regional company.",
        };

        std::vector<std::string> chunks;
        chunks.push_back(padTo("The founder of " + company + " is " + founder + ".", options.chunkWords, gen));
        for (std::size_t r = 1; r < options.redundantChunks; ++r) {
            chunks.push_back(padTo(subjectLines[(r - 1) % std::size(subjectLines)], options.chunkWords, gen));
        }
        chunks.push_back(padTo("The founder of " + company + " once opened an office in [[" + wrong + "]].",
                               options.chunkWords, gen));
        chunks.push_back(padTo(founder + " was born in [[" + city + "]] before moving abroad.", options.chunkWords, gen));
        for (std::size_t f = 0; f < options.fillerChunks; ++f) {
            chunks.push_back(padTo(gen.name(2, 3) + " is mentioned here.", options.chunkWords, gen));
        }
        gen.shuffle(chunks);

        QARecord rec;
        rec.id = "planted-" + std::to_string(q);
        rec.question = "Where was the founder of " + company + " born?";
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (i) rec.context += ' ';
            rec.context += chunks[i];
        }
        rec.goldAnswers = {city};
        rec.datasetName = "planted";
        plans[rec.question] = "1) Identify the founder of " + company + "\n2) Identify where the founder of " +
                              company + " was born";
        fx.records.push_back(std::move(rec));
    }

    nlohmann::ordered_json mock;
    mock["embedding_dim"] = options.embeddingDim;
    mock["planner"] = {{"rule", "scripted"}, {"plans", plans}};
    mock["evaluator"] = {{"rule", "keyword_overlap"}};
    mock["generator"] = {{"rule", "marker"}};
    fx.mockJson = mock.dump(2) + "\n";
    return fx;
}

void writeLongBenchJsonl(const std::vector<QARecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write dataset", path.string());
    }
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["_id"] = r.id;
        j["input"] = r.question;
        j["context"] = r.context;
        j["answers"] = r.goldAnswers;
        j["dataset"] = r.datasetName;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed", path.string());
    }
}

FixturePaths writePlantedFixture(const PlantedFixture& fixture, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot create fixture directory: " + ec.message(), dir.string());
    }
    FixturePaths paths{dir / "dataset.jsonl", dir / "mock.json"};
    writeLongBenchJsonl(fixture.records, paths.dataset);
    std::ofstream out(paths.mock, std::ios::binary);
    out << fixture.mockJson;
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write mock fixture", paths.mock.string());
    }
    return paths;
}

}  // namespace dfrag
