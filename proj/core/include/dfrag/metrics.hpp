#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfrag/retrieval.hpp"

namespace dfrag {

struct F1Score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// LongBench answer normalization: lowercase, drop ASCII punctuation, drop
/// the articles a/an/the as whole words, fold whitespace.
std::string normalizeAnswer(std::string_view text);

/// Bag-of-tokens F1 of the normalized prediction against each gold answer;
/// returns the best-scoring gold. Empty prediction or no golds give 0.
F1Score tokenF1(std::string_view prediction, std::span<const std::string> goldAnswers);

/// |ids(a) ∩ ids(b)| / |ids(a) ∪ ids(b)|, with two empty sets defined as 1.
double jaccard(const CandidateSet& a, const CandidateSet& b);

struct JaccardMatrix {
    std::vector<double> lambdas;
    std::vector<std::vector<double>> cells;

    /// Mean of cells[i][i+1]: overlap between neighbouring λ values.
    double meanAdjacent() const;
    /// Mean over all i != j.
    double meanOffDiagonal() const;
};

/// Pairwise Jaccard over sets ordered by λ. Needs >= 2 sets with distinct λ.
JaccardMatrix jaccardMatrix(std::span<const CandidateSet> sets);

/// (dfrag - vanilla) / (oracle - vanilla); nullopt when the gap is below
/// 1e-9 or negative. Values below 0 (DF-RAG under vanilla) pass through.
std::optional<double> gapClosure(double vanillaF1, double dfragF1, double oracleF1);

/// Count per λ. Keys are rounded to 6 decimals so values produced by
/// different arithmetic paths land in one bucket.
std::map<double, std::size_t> lambdaHistogram(std::span<const double> lambdas);

}  // namespace dfrag
