#include "cfeg/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "cfeg/common.hpp"

namespace cfeg::kernels {

std::uint32_t Interner::id(std::string_view token) {
    auto [it, inserted] = ids_.try_emplace(std::string(token), static_cast<std::uint32_t>(ids_.size()));
    return it->second;
}

TokenSet Interner::set_of(const Tokens& tokens) {
    TokenSet s;
    s.reserve(tokens.size());
    for (const auto& t : tokens) s.push_back(id(t));
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
    std::size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++common;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

namespace {

std::string ngram_key(const Tokens& t, std::size_t start, int n) {
    std::string key;
    for (int k = 0; k < n; ++k) {
        if (k) key += '\x1f';
        key += t[start + static_cast<std::size_t>(k)];
    }
    return key;
}

std::map<std::string, std::size_t> ngram_bag(const Tokens& t, int n) {
    std::map<std::string, std::size_t> bag;
    if (t.size() < static_cast<std::size_t>(n)) return bag;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i) ++bag[ngram_key(t, i, n)];
    return bag;
}

}  // namespace

double sentence_bleu(const Tokens& hyp, const Tokens& ref, int n) {
    if (n < 1) throw PreconditionError("sentence_bleu: order must be >= 1");
    if (hyp.empty()) return 0.0;
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        const auto h = ngram_bag(hyp, k);
        const auto r = ngram_bag(ref, k);
        std::size_t matched = 0;
        std::size_t total = 0;
        for (const auto& [g, c] : h) {
            total += c;
            if (auto it = r.find(g); it != r.end()) matched += std::min(c, it->second);
        }
        const double denom = static_cast<double>(std::max<std::size_t>(total, 1));
        const double p = matched == 0 ? kBleuEpsilon / denom : static_cast<double>(matched) / denom;
        log_sum += std::log(p) / n;
    }
    const double c = static_cast<double>(hyp.size());
    const double rl = static_cast<double>(ref.size());
    const double bp = c > rl ? 1.0 : std::exp(1.0 - rl / c);
    return bp * std::exp(log_sum);
}

namespace serial {

std::vector<double> jaccard_scores(const TokenSet& query, const std::vector<TokenSet>& pool) {
    std::vector<double> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) out[i] = jaccard(query, pool[i]);
    return out;
}

double mean_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, int n) {
    if (hyps.size() != refs.size()) throw PreconditionError("mean_bleu: length mismatch");
    if (hyps.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) sum += sentence_bleu(hyps[i], refs[i], n);
    return sum / static_cast<double>(hyps.size());
}

NgramCounts ngram_counts(const std::vector<Tokens>& docs, int n) {
    if (n < 1) throw PreconditionError("ngram_counts: order must be >= 1");
    std::unordered_set<std::string> seen;
    NgramCounts c;
    for (const auto& d : docs) {
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= d.size(); ++i) {
            seen.insert(ngram_key(d, i, n));
            ++c.total;
        }
    }
    c.unique = seen.size();
    return c;
}

}  // namespace serial

namespace parallel {

std::vector<double> jaccard_scores(const TokenSet& query, const std::vector<TokenSet>& pool) {
    std::vector<double> out(pool.size());
    const auto n = static_cast<std::ptrdiff_t>(pool.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = jaccard(query, pool[static_cast<std::size_t>(i)]);
    return out;
}

double mean_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, int n) {
    if (hyps.size() != refs.size()) throw PreconditionError("mean_bleu: length mismatch");
    if (n < 1) throw PreconditionError("sentence_bleu: order must be >= 1");
    if (hyps.empty()) return 0.0;
    // Per-example scores, then an ordered sum, so the result is bitwise equal
    // to the serial version.
    std::vector<double> scores(hyps.size());
    const auto count = static_cast<std::ptrdiff_t>(hyps.size());
#pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto k = static_cast<std::size_t>(i);
        scores[k] = sentence_bleu(hyps[k], refs[k], n);
    }
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(hyps.size());
}

NgramCounts ngram_counts(const std::vector<Tokens>& docs, int n) {
    if (n < 1) throw PreconditionError("ngram_counts: order must be >= 1");
    const int threads = omp_get_max_threads();
    std::vector<std::unordered_set<std::string>> local(static_cast<std::size_t>(threads));
    std::size_t total = 0;
    const auto count = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : total)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        auto& seen = local[static_cast<std::size_t>(omp_get_thread_num())];
        const auto& d = docs[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j + static_cast<std::size_t>(n) <= d.size(); ++j) {
            seen.insert(ngram_key(d, j, n));
            ++total;
        }
    }
    for (std::size_t t = 1; t < local.size(); ++t) {
        local[0].merge(local[t]);
    }
    return {local[0].size(), total};
}

}  // namespace parallel

}  // namespace cfeg::kernels
