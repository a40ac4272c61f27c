#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dfrag {

/// Unit-norm dense vector in the retrieval space.
///
/// The only ways to build one are `normalize` and `fromUnit`, so every instance satisfies
/// |values| == 1 (within 1e-6), dim >= 1 and finite entries.
class Embedding {
public:
    static Embedding normalize(std::span<const double> raw);
    static Embedding normalize(std::span<const float> raw);
    /// Keeps values bit-for-bit when already unit-norm (within 1e-9), else
    /// normalizes. For reloading stored embeddings.
    static Embedding fromUnit(std::span<const double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}
    std::vector<double> values_;
};

/// Arithmetic mean of `count` unit vectors. Not unit-norm in general.
struct Centroid {
    std::vector<double> values;
    std::size_t count = 0;
};

/// Norm at or below which a vector (or centroid) has no usable direction.
inline constexpr double kZeroNormEpsilon = 1e-12;

/// Dot product of two unit vectors, clamped into [-1, 1].
double cosine(const Embedding& a, const Embedding& b);

Centroid centroid(std::span<const Embedding> vectors);
Centroid centroid(std::span<const Embedding* const> vectors);

/// Cosine between `c` and the centroid's direction; 0 for a zero centroid.
double cosineToCentroid(const Embedding& c, const Centroid& ctr);

/// sqrt(2 - 2 cos(c, ctr)), the Euclidean distance between `c` and the
/// unit vector along the centroid.
double diversityDistance(const Embedding& c, const Centroid& ctr);

}  // namespace dfrag
