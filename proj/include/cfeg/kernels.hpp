#pragma once

// Data-parallel inner loops of the metrics and similarity code. Each kernel
// has a serial reference in cfeg::kernels::serial and an OpenMP version in
// cfeg::kernels::parallel; the two must agree exactly (tests compare them and
// bench/ times them).

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cfeg::kernels {

using Tokens = std::vector<std::string>;
/// Sorted, deduplicated token ids.
using TokenSet = std::vector<std::uint32_t>;

class Interner {
public:
    std::uint32_t id(std::string_view token);
    TokenSet set_of(const Tokens& tokens);

private:
    std::unordered_map<std::string, std::uint32_t> ids_;
};

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

/// Smoothing numerator used for zero n-gram matches.
inline constexpr double kBleuEpsilon = 0.1;

/// Sentence BLEU up to order n with uniform weights, brevity penalty, and
/// add-epsilon smoothing of zero match counts. Empty hypothesis -> 0.
double sentence_bleu(const Tokens& hypothesis, const Tokens& reference, int n);

struct NgramCounts {
    std::size_t unique = 0;
    std::size_t total = 0;
};

namespace serial {
std::vector<double> jaccard_scores(const TokenSet& query, const std::vector<TokenSet>& pool);
double mean_bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references, int n);
NgramCounts ngram_counts(const std::vector<Tokens>& docs, int n);
}  // namespace serial

namespace parallel {
std::vector<double> jaccard_scores(const TokenSet& query, const std::vector<TokenSet>& pool);
double mean_bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references, int n);
NgramCounts ngram_counts(const std::vector<Tokens>& docs, int n);
}  // namespace parallel

}  // namespace cfeg::kernels
