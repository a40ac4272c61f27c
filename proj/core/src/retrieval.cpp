#include "dfrag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfrag/error.hpp"
#include "dfrag/parallel.hpp"

namespace dfrag {

LambdaGrid LambdaGrid::fromValues(std::vector<double> values) {
    if (values.empty()) {
        fail(ErrorKind::InvalidGrid, "λ grid is empty");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
            fail(ErrorKind::InvalidGrid, "λ value outside [0, 1]: " + std::to_string(values[i]));
        }
        if (i > 0 && !(values[i] > values[i - 1])) {
            fail(ErrorKind::InvalidGrid, "λ grid must be strictly increasing");
        }
    }
    LambdaGrid grid;
    grid.values_ = std::move(values);
    return grid;
}

LambdaGrid LambdaGrid::sweepDefault() {
    std::vector<double> v;
    for (int i = 0; i <= 10; ++i) v.push_back(i / 10.0);
    return fromValues(std::move(v));
}

LambdaGrid LambdaGrid::dfragDefault() {
    std::vector<double> v;
    for (int i = 1; i <= 10; ++i) v.push_back(i / 10.0);
    return fromValues(std::move(v));
}

std::vector<std::size_t> CandidateSet::chunkIds() const {
    std::vector<std::size_t> ids;
    ids.reserve(chunks.size());
    for (const auto& c : chunks) ids.push_back(c.chunkId);
    return ids;
}

namespace {

const Embedding& embeddingOf(const Chunk& c) {
    if (!c.embedding) {
        fail(ErrorKind::NotEmbedded, "chunk " + std::to_string(c.chunkId) + " has no embedding");
    }
    return *c.embedding;
}

void checkLambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        fail(ErrorKind::LambdaOutOfRange, "λ = " + std::to_string(lambda));
    }
}

void checkPool(std::span<const Chunk> pool, std::size_t k) {
    if (pool.empty()) {
        fail(ErrorKind::EmptyPool, "candidate pool is empty");
    }
    if (k == 0) {
        fail(ErrorKind::InvalidArgument, "k must be positive");
    }
    for (const auto& c : pool) {
        embeddingOf(c);
    }
}

struct Best {
    double score = 0.0;
    std::size_t index = 0;
    bool found = false;

    void offer(double s, std::size_t i, std::span<const Chunk> pool) {
        if (!found || s > score || (s == score && pool[i].chunkId < pool[index].chunkId)) {
            score = s;
            index = i;
            found = true;
        }
    }
};

std::vector<double> queryCosines(const Embedding& query, std::span<const Chunk> pool) {
    std::vector<double> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out[i] = cosine(query, embeddingOf(pool[i]));
    }
    return out;
}

// Greedy skeleton shared by gMMR and classic MMR. `makeScorer` is called
// once per step with the current selection and returns a functor scoring a
// pool index.
template <typename MakeScorer>
CandidateSet greedySelect(const Embedding& query, std::span<const Chunk> pool, std::size_t k, double lambda,
                          MakeScorer&& makeScorer) {
    checkLambda(lambda);
    checkPool(pool, k);
    const auto relevance = queryCosines(query, pool);
    const std::size_t target = std::min(k, pool.size());

    CandidateSet out;
    out.lambda = lambda;
    out.chunks.reserve(target);
    std::vector<bool> used(pool.size(), false);

    Best first;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        first.offer(relevance[i], i, pool);
    }
    used[first.index] = true;
    out.chunks.push_back(pool[first.index]);

    while (out.chunks.size() < target) {
        auto scorer = makeScorer(std::span<const Chunk>(out.chunks), relevance);
        Best best;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (!used[i]) {
                best.offer(scorer(i), i, pool);
            }
        }
        used[best.index] = true;
        out.chunks.push_back(pool[best.index]);
    }
    return out;
}

Centroid centroidOfChunks(std::span<const Chunk> chunks) {
    std::vector<const Embedding*> ptrs;
    ptrs.reserve(chunks.size());
    for (const auto& c : chunks) ptrs.push_back(&embeddingOf(c));
    return centroid(std::span<const Embedding* const>(ptrs));
}

double maxCosineTo(const Embedding& e, std::span<const Chunk> selected) {
    double best = -1.0;
    for (const auto& s : selected) {
        best = std::max(best, cosine(e, embeddingOf(s)));
    }
    return best;
}

}  // namespace

CandidateSet selectTopKCosine(const Embedding& query, std::span<const Chunk> pool, std::size_t k) {
    checkPool(pool, k);
    const auto relevance = queryCosines(query, pool);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
        return pool[a].chunkId < pool[b].chunkId;
    });
    CandidateSet out;
    out.lambda = 1.0;
    for (std::size_t i = 0; i < std::min(k, pool.size()); ++i) {
        out.chunks.push_back(pool[order[i]]);
    }
    return out;
}

double gmmrScore(const Embedding& query, const Chunk& candidate, std::span<const Chunk> selected,
                 double lambda) {
    checkLambda(lambda);
    if (selected.empty()) {
        fail(ErrorKind::EmptySet, "gMMR needs a non-empty selected set");
    }
    const Embedding& c = embeddingOf(candidate);
    return lambda * cosine(query, c) + (1.0 - lambda) * diversityDistance(c, centroidOfChunks(selected));
}

double classicMmrScore(const Embedding& query, const Chunk& candidate, std::span<const Chunk> selected,
                       double lambda) {
    checkLambda(lambda);
    if (selected.empty()) {
        fail(ErrorKind::EmptySet, "MMR needs a non-empty selected set");
    }
    const Embedding& c = embeddingOf(candidate);
    return lambda * cosine(query, c) - (1.0 - lambda) * maxCosineTo(c, selected);
}

CandidateSet selectGmmr(const Embedding& query, std::span<const Chunk> pool, std::size_t k, double lambda) {
    return greedySelect(query, pool, k, lambda, [&](std::span<const Chunk> selected, const std::vector<double>& rel) {
        Centroid ctr = centroidOfChunks(selected);
        return [&pool, &rel, lambda, ctr = std::move(ctr)](std::size_t i) {
            return lambda * rel[i] + (1.0 - lambda) * diversityDistance(*pool[i].embedding, ctr);
        };
    });
}

CandidateSet selectClassicMmr(const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                              double lambda) {
    return greedySelect(query, pool, k, lambda, [&](std::span<const Chunk> selected, const std::vector<double>& rel) {
        return [&pool, &rel, lambda, selected](std::size_t i) {
            return lambda * rel[i] - (1.0 - lambda) * maxCosineTo(*pool[i].embedding, selected);
        };
    });
}

CandidateSet selectChunks(Selector selector, const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                    double lambda) {
    return selector == Selector::Gmmr ? selectGmmr(query, pool, k, lambda)
                                      : selectClassicMmr(query, pool, k, lambda);
}

std::vector<CandidateSet> sampleUniform(const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                                        const LambdaGrid& grid, Selector selector, std::size_t workers) {
    std::vector<CandidateSet> sets(grid.size());
    parallelFor(grid.size(), workers, [&](std::size_t i) { sets[i] = selectChunks(selector, query, pool, k, grid[i]); });
    return sets;
}

BinarySearchResult sampleBinarySearch(const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                                      const LambdaGrid& grid, const SetScoreFn& scoreFn, Selector selector) {
    const std::size_t n = grid.size();
    if (n < 2) {
        fail(ErrorKind::GridTooSmall, "binary search needs at least two λ values");
    }
    std::vector<std::optional<CandidateSet>> sets(n);
    std::vector<std::size_t> probeOrder;

    auto setAt = [&](std::size_t i) -> CandidateSet& {
        if (!sets[i]) {
            sets[i] = selectChunks(selector, query, pool, k, grid[i]);
        }
        return *sets[i];
    };
    auto scoreAt = [&](std::size_t i) {
        CandidateSet& s = setAt(i);
        if (!s.supportScore) {
            s.supportScore = scoreFn(s);
            probeOrder.push_back(i);
        }
        return *s.supportScore;
    };

    std::size_t lo = 0;
    std::size_t hi = n - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (scoreAt(mid) < scoreAt(mid + 1)) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }

    BinarySearchResult result;
    result.bestIndex = lo;
    result.bestSet = setAt(lo);
    for (std::size_t i : probeOrder) {
        result.probedSets.push_back(*sets[i]);
    }
    return result;
}

}  // namespace dfrag
