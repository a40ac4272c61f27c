#include "dfrag/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include "dfrag/corpus.hpp"
#include "dfrag/error.hpp"

namespace dfrag {

namespace {

bool isAsciiPunct(unsigned char c) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
}

// Lowercases ASCII and the Latin-1 supplement capitals (U+00C0..U+00DE,
// except U+00D7) in UTF-8.
std::string lowercase(std::string_view s) {
    std::string out(s);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto c = static_cast<unsigned char>(out[i]);
        if (c >= 'A' && c <= 'Z') {
            out[i] = static_cast<char>(c + 32);
        } else if (c == 0xC3 && i + 1 < out.size()) {
            auto n = static_cast<unsigned char>(out[i + 1]);
            if (n >= 0x80 && n <= 0x9E && n != 0x97) {
                out[i + 1] = static_cast<char>(n + 0x20);
            }
            ++i;
        }
    }
    return out;
}

// Byte length of the code point at s[i] and whether it counts as a regex
// word character. Non-ASCII is treated as a word character except the
// Latin-1 symbol range and the General Punctuation block.
std::pair<std::size_t, bool> wordCharAt(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        return {1, std::isalnum(b0) != 0 || b0 == '_'};
    }
    std::size_t len = 1;
    if ((b0 & 0xE0) == 0xC0) len = 2;
    else if ((b0 & 0xF0) == 0xE0) len = 3;
    else if ((b0 & 0xF8) == 0xF0) len = 4;
    len = std::min(len, s.size() - i);
    if (len >= 2 && b0 == 0xC2) {
        return {len, false};  // U+0080..U+00BF
    }
    if (len >= 2 && b0 == 0xC3) {
        const auto b1 = static_cast<unsigned char>(s[i + 1]);
        return {len, b1 != 0x97 && b1 != 0xB7};  // × ÷
    }
    if (len >= 3 && b0 == 0xE2) {
        const auto b1 = static_cast<unsigned char>(s[i + 1]);
        return {len, !(b1 >= 0x80 && b1 <= 0x81)};  // U+2000..U+207F
    }
    return {len, true};
}

std::string removeArticles(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        auto [len, word] = wordCharAt(s, i);
        if (!word) {
            out.append(s.substr(i, len));
            i += len;
            continue;
        }
        const std::size_t start = i;
        while (i < s.size()) {
            auto [l, w] = wordCharAt(s, i);
            if (!w) break;
            i += l;
        }
        const std::string_view run = s.substr(start, i - start);
        if (run == "a" || run == "an" || run == "the") {
            out += ' ';
        } else {
            out.append(run);
        }
    }
    return out;
}

F1Score f1Tokens(const std::vector<std::string_view>& pred, const std::vector<std::string_view>& gold) {
    std::unordered_map<std::string_view, int> goldCounts;
    for (auto t : gold) ++goldCounts[t];
    int same = 0;
    for (auto t : pred) {
        auto it = goldCounts.find(t);
        if (it != goldCounts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) {
        return {};
    }
    F1Score s;
    s.precision = static_cast<double>(same) / static_cast<double>(pred.size());
    s.recall = static_cast<double>(same) / static_cast<double>(gold.size());
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

}  // namespace

std::string normalizeAnswer(std::string_view text) {
    std::string lowered = lowercase(text);
    std::string noPunct;
    noPunct.reserve(lowered.size());
    for (char c : lowered) {
        if (!isAsciiPunct(static_cast<unsigned char>(c))) noPunct += c;
    }
    const std::string noArticles = removeArticles(noPunct);
    std::string out;
    for (auto w : splitWords(noArticles)) {
        if (!out.empty()) out += ' ';
        out.append(w);
    }
    return out;
}

F1Score tokenF1(std::string_view prediction, std::span<const std::string> goldAnswers) {
    const std::string pred = normalizeAnswer(prediction);
    const auto predTokens = splitWords(pred);
    F1Score best;
    for (const auto& gold : goldAnswers) {
        const std::string g = normalizeAnswer(gold);
        const F1Score s = f1Tokens(predTokens, splitWords(g));
        if (s.f1 > best.f1) best = s;
    }
    return best;
}

double jaccard(const CandidateSet& a, const CandidateSet& b) {
    const auto idsA = a.chunkIds();
    const auto idsB = b.chunkIds();
    const std::set<std::size_t> sa(idsA.begin(), idsA.end());
    const std::set<std::size_t> sb(idsB.begin(), idsB.end());
    if (sa.empty() && sb.empty()) {
        return 1.0;
    }
    std::size_t inter = 0;
    for (auto id : sa) inter += sb.count(id);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double JaccardMatrix::meanAdjacent() const {
    if (cells.size() < 2) return 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) sum += cells[i][i + 1];
    return sum / static_cast<double>(cells.size() - 1);
}

double JaccardMatrix::meanOffDiagonal() const {
    if (cells.size() < 2) return 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = 0; j < cells.size(); ++j)
            if (i != j) sum += cells[i][j];
    const auto n = static_cast<double>(cells.size());
    return sum / (n * (n - 1));
}

JaccardMatrix jaccardMatrix(std::span<const CandidateSet> sets) {
    if (sets.size() < 2) {
        fail(ErrorKind::InvalidArgument, "Jaccard matrix needs at least two sets");
    }
    JaccardMatrix m;
    for (const auto& s : sets) {
        if (std::find(m.lambdas.begin(), m.lambdas.end(), s.lambda) != m.lambdas.end()) {
            fail(ErrorKind::InvalidArgument, "duplicate λ in Jaccard matrix input");
        }
        m.lambdas.push_back(s.lambda);
    }
    const std::size_t n = sets.size();
    m.cells.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            m.cells[i][j] = m.cells[j][i] = jaccard(sets[i], sets[j]);
        }
    }
    return m;
}

std::optional<double> gapClosure(double vanillaF1, double dfragF1, double oracleF1) {
    const double gap = oracleF1 - vanillaF1;
    if (!(gap >= 1e-9)) {
        return std::nullopt;
    }
    return (dfragF1 - vanillaF1) / gap;
}

std::map<double, std::size_t> lambdaHistogram(std::span<const double> lambdas) {
    std::map<double, std::size_t> counts;
    for (double l : lambdas) {
        ++counts[std::round(l * 1e6) / 1e6];
    }
    return counts;
}

}  // namespace dfrag
