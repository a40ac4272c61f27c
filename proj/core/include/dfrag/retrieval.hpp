#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dfrag/corpus.hpp"
#include "dfrag/vecspace.hpp"

namespace dfrag {

inline constexpr std::size_t kDefaultK = 5;

/// Strictly increasing λ values in [0, 1].
class LambdaGrid {
public:
    /// Throws InvalidGrid on out-of-range, unsorted or duplicate values.
    static LambdaGrid fromValues(std::vector<double> values);
    /// {0.0, 0.1, ..., 1.0}: fixed-λ sweeps and the Oracle.
    static LambdaGrid sweepDefault();
    /// {0.1, ..., 1.0}: DF-RAG candidate sets; λ = 0 is excluded.
    static LambdaGrid dfragDefault();

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    bool includesZero() const noexcept { return !values_.empty() && values_.front() == 0.0; }

private:
    std::vector<double> values_;
};

/// k chunks picked at one λ, in selection order.
struct CandidateSet {
    double lambda = 1.0;
    std::vector<Chunk> chunks;
    std::optional<int> supportScore;

    std::vector<std::size_t> chunkIds() const;
};

enum class Selector { Gmmr, ClassicMmr };

/// Top-k by cosine to the query, descending; ties go to the lower chunkId.
/// The set's lambda is recorded as 1.0.
CandidateSet selectTopKCosine(const Embedding& query, std::span<const Chunk> pool, std::size_t k);

/// λ·cos(q, c) + (1 − λ)·diversityDistance(c, centroid(selected)).
double gmmrScore(const Embedding& query, const Chunk& candidate, std::span<const Chunk> selected,
                 double lambda);

/// λ·cos(q, c) − (1 − λ)·max_{s ∈ selected} cos(c, s).
double classicMmrScore(const Embedding& query, const Chunk& candidate, std::span<const Chunk> selected,
                       double lambda);

/// Greedy gMMR selection. The first pick is the global cosine argmax
/// regardless of λ; each later pick maximizes gmmrScore over the remaining
/// pool. Returns min(k, |pool|) chunks; score ties go to the lower chunkId.
CandidateSet selectGmmr(const Embedding& query, std::span<const Chunk> pool, std::size_t k, double lambda);

/// Same greedy loop using the classical MMR score.
CandidateSet selectClassicMmr(const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                              double lambda);

CandidateSet selectChunks(Selector selector, const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                    double lambda);

/// One candidate set per grid value, in grid order. Selections run on up to
/// `workers` threads.
std::vector<CandidateSet> sampleUniform(const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                                        const LambdaGrid& grid, Selector selector = Selector::Gmmr,
                                        std::size_t workers = 1);

using SetScoreFn = std::function<int(const CandidateSet&)>;

struct BinarySearchResult {
    CandidateSet bestSet;
    std::size_t bestIndex = 0;
    // Every set scored, in first-probe order; scores are in supportScore.
    std::vector<CandidateSet> probedSets;
};

/// Discrete peak search over the grid. Keeps [lo, hi]; at each step scores
/// mid and mid + 1 (memoized, never rescored) and moves lo past mid when
/// score(mid) < score(mid + 1), else pulls hi to mid. Stops at lo == hi.
/// Uses at most 2·ceil(log2 n) scoreFn calls. Throws GridTooSmall for n < 2.
BinarySearchResult sampleBinarySearch(const Embedding& query, std::span<const Chunk> pool, std::size_t k,
                                      const LambdaGrid& grid, const SetScoreFn& scoreFn,
                                      Selector selector = Selector::Gmmr);

}  // namespace dfrag
