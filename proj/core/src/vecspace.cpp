#include "dfrag/vecspace.hpp"

#include <algorithm>
#include <cmath>

#include "dfrag/error.hpp"

namespace dfrag {

namespace {

template <typename T>
Embedding normalizeImpl(std::span<const T> raw, Embedding (*make)(std::vector<double>), bool keepUnit = false) {
    if (raw.empty()) {
        fail(ErrorKind::ZeroVector, "cannot normalize an empty vector");
    }
    std::vector<double> values(raw.begin(), raw.end());
    double sq = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) {
            fail(ErrorKind::NonFinite, "vector contains NaN or Inf");
        }
        sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm <= kZeroNormEpsilon) {
        fail(ErrorKind::ZeroVector, "vector norm is zero");
    }
    if (keepUnit && std::abs(norm - 1.0) <= 1e-9) {
        return make(std::move(values));
    }
    for (double& v : values) {
        v /= norm;
    }
    return make(std::move(values));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void requireSameDim(std::size_t a, std::size_t b) {
    if (a != b) {
        fail(ErrorKind::DimMismatch,
             "dimension " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

template <typename Get>
Centroid centroidOf(std::size_t n, Get get) {
    if (n == 0) {
        fail(ErrorKind::EmptySet, "centroid of an empty set");
    }
    Centroid out;
    out.values.assign(get(0).dim(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Embedding& e = get(i);
        requireSameDim(out.values.size(), e.dim());
        const auto v = e.values();
        for (std::size_t j = 0; j < v.size(); ++j) {
            out.values[j] += v[j];
        }
    }
    const double count = static_cast<double>(n);
    for (double& v : out.values) {
        v /= count;
    }
    out.count = n;
    return out;
}

}  // namespace

Embedding Embedding::normalize(std::span<const double> raw) {
    return normalizeImpl<double>(raw, [](std::vector<double> v) { return Embedding(std::move(v)); });
}

Embedding Embedding::fromUnit(std::span<const double> values) {
    return normalizeImpl<double>(values, [](std::vector<double> v) { return Embedding(std::move(v)); }, true);
}

Embedding Embedding::normalize(std::span<const float> raw) {
    return normalizeImpl<float>(raw, [](std::vector<double> v) { return Embedding(std::move(v)); });
}

double cosine(const Embedding& a, const Embedding& b) {
    requireSameDim(a.dim(), b.dim());
    return std::clamp(dot(a.values(), b.values()), -1.0, 1.0);
}

Centroid centroid(std::span<const Embedding> vectors) {
    return centroidOf(vectors.size(), [&](std::size_t i) -> const Embedding& { return vectors[i]; });
}

Centroid centroid(std::span<const Embedding* const> vectors) {
    return centroidOf(vectors.size(), [&](std::size_t i) -> const Embedding& { return *vectors[i]; });
}

double cosineToCentroid(const Embedding& c, const Centroid& ctr) {
    requireSameDim(c.dim(), ctr.values.size());
    const double norm = std::sqrt(dot(ctr.values, ctr.values));
    if (norm <= kZeroNormEpsilon) {
        return 0.0;
    }
    return std::clamp(dot(c.values(), ctr.values) / norm, -1.0, 1.0);
}

double diversityDistance(const Embedding& c, const Centroid& ctr) {
    const double arg = std::clamp(2.0 - 2.0 * cosineToCentroid(c, ctr), 0.0, 4.0);
    return std::sqrt(arg);
}

}  // namespace dfrag
