#include "cfeg/metrics.hpp"

#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "cfeg/cause.hpp"
#include "cfeg/common.hpp"
#include "cfeg/kernels.hpp"

namespace cfeg::metrics {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

double emotion_accuracy(const std::vector<templates::ParsedResponse>& parsed, const std::vector<std::string>& gold) {
    if (parsed.size() != gold.size()) throw PreconditionError("emotion_accuracy: length mismatch");
    if (gold.empty()) throw PreconditionError("emotion_accuracy: no examples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (parsed[i].emotion && to_lower(trim(*parsed[i].emotion)) == to_lower(trim(gold[i]))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double distinct_n(const std::vector<std::string>& responses, int n) {
    if (n < 1) throw PreconditionError("distinct_n: n must be >= 1");
    std::vector<kernels::Tokens> docs;
    docs.reserve(responses.size());
    for (const auto& r : responses) docs.push_back(tokenize(r));
    const auto c = kernels::parallel::ngram_counts(docs, n);
    if (c.total == 0) throw PreconditionError("distinct_n: no " + std::to_string(n) + "-grams in any response");
    return static_cast<double>(c.unique) / static_cast<double>(c.total);
}

double bleu_n(std::string_view hypothesis, std::string_view reference, int n) {
    if (n != 2 && n != 4) throw PreconditionError("bleu_n: n must be 2 or 4");
    return kernels::sentence_bleu(tokenize(hypothesis), tokenize(reference), n);
}

std::optional<double> perplexity(const std::vector<std::vector<double>>& token_logprobs) {
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& seq : token_logprobs) {
        for (double lp : seq) nll -= lp;
        tokens += seq.size();
    }
    if (tokens == 0) return std::nullopt;
    return std::exp(nll / static_cast<double>(tokens));
}

std::vector<chat::Message> scoring_messages(const ScoringItem& item) {
    return {{"user", item.prompt}, {"assistant", item.target}};
}

std::optional<double> backend_perplexity(const std::vector<ScoringItem>& items, chat::Backend& backend,
                                         const ScoringConfig& cfg, std::string* warning) {
    auto warn = [&](std::string w) {
        if (warning) *warning = std::move(w);
        return std::nullopt;
    };
    if (!backend.supports_logprobs()) return warn("backend " + backend.identity() + " does not provide logprobs; PPL omitted");
    std::vector<std::vector<double>> lps(items.size());
    std::vector<char> missing(items.size(), 0);
    bounded_for(items.size(), cfg.parallelism, [&](std::size_t i) {
        chat::Request req{cfg.model, scoring_messages(items[i]), 0.0, 0, true};
        auto resp = with_retry(cfg.retry, [&] { return backend.complete(req); });
        if (resp.token_logprobs) {
            lps[i] = std::move(*resp.token_logprobs);
        } else {
            missing[i] = 1;
        }
    });
    for (char m : missing) {
        if (m) return warn("backend " + backend.identity() + " returned no logprobs; PPL omitted");
    }
    return perplexity(lps);
}

MetricRow evaluate_run(const StrategyRun& run, const GoldSet& gold) {
    if (run.dialogue_ids != gold.dialogue_ids || run.parsed.size() != gold.dialogue_ids.size()) {
        throw PreconditionError("build_report: strategy " + run.strategy + " was not evaluated on the gold set");
    }
    MetricRow row;
    row.strategy = run.strategy;
    row.n_examples = gold.dialogue_ids.size();
    row.acc = emotion_accuracy(run.parsed, gold.emotions);
    row.ppl = run.ppl;

    std::vector<std::string> responses;
    std::vector<kernels::Tokens> hyps, refs;
    for (std::size_t i = 0; i < run.parsed.size(); ++i) {
        responses.push_back(run.parsed[i].response);
        hyps.push_back(tokenize(run.parsed[i].response));
        refs.push_back(tokenize(gold.responses[i]));
    }
    // a run with no n-grams at all (every reply failed or is one word) reports 0
    auto distinct_or_zero = [&](int n) {
        try {
            return distinct_n(responses, n);
        } catch (const PreconditionError&) {
            return 0.0;
        }
    };
    row.dist1 = distinct_or_zero(1);
    row.dist2 = distinct_or_zero(2);
    row.bleu2 = kernels::parallel::mean_bleu(hyps, refs, 2);
    row.bleu4 = kernels::parallel::mean_bleu(hyps, refs, 4);

    bool any_cause = false;
    for (const auto& p : run.parsed) any_cause = any_cause || p.cause_text.has_value();
    if (gold.causes && any_cause) {
        double total = 0.0;
        for (std::size_t i = 0; i < run.parsed.size(); ++i) {
            // an unparsed cause scores 0
            if (!run.parsed[i].cause_text) continue;
            total += cause::token_f1(split_whitespace(*run.parsed[i].cause_text), split_whitespace((*gold.causes)[i]));
        }
        row.cause_f1 = total / static_cast<double>(run.parsed.size());
    }
    return row;
}

MetricReport build_report(const std::vector<StrategyRun>& runs, const GoldSet& gold) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<MetricRow>> by_strategy;
    for (const auto& r : runs) {
        if (!by_strategy.count(r.strategy)) order.push_back(r.strategy);
        by_strategy[r.strategy].push_back(evaluate_run(r, gold));
    }
    MetricReport report;
    for (const auto& name : order) {
        const auto& rows = by_strategy[name];
        const double k = static_cast<double>(rows.size());
        MetricRow m;
        m.strategy = name;
        m.runs = rows.size();
        m.n_examples = rows.front().n_examples;
        auto mean_opt = [&](auto field) -> std::optional<double> {
            double s = 0.0;
            for (const auto& r : rows) {
                if (!(r.*field)) return std::nullopt;
                s += *(r.*field);
            }
            return s / k;
        };
        for (const auto& r : rows) {
            m.acc += r.acc / k;
            m.dist1 += r.dist1 / k;
            m.dist2 += r.dist2 / k;
            m.bleu2 += r.bleu2 / k;
            m.bleu4 += r.bleu4 / k;
        }
        m.ppl = mean_opt(&MetricRow::ppl);
        m.cause_f1 = mean_opt(&MetricRow::cause_f1);
        report.rows.push_back(std::move(m));
    }
    return report;
}

json MetricReport::to_json() const {
    json out = {{"columns", kColumns}, {"rows", json::array()}};
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    for (const auto& r : rows) {
        out["rows"].push_back({{"strategy", r.strategy},
                               {"acc", r.acc},
                               {"ppl", opt(r.ppl)},
                               {"dist1", r.dist1},
                               {"dist2", r.dist2},
                               {"bleu2", r.bleu2},
                               {"bleu4", r.bleu4},
                               {"cause_f1", opt(r.cause_f1)},
                               {"n_examples", r.n_examples},
                               {"runs", r.runs}});
    }
    return out;
}

std::string MetricReport::to_text() const {
    const std::vector<std::string> header = {"strategy", "acc", "ppl", "dist1", "dist2", "bleu2", "bleu4",
                                             "cause_f1", "dist1_raw", "dist2_raw", "n_examples"};
    auto pct = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << v * 100.0;
        return s.str();
    };
    auto raw = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << v;
        return s.str();
    };
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        std::ostringstream ppl;
        if (r.ppl) {
            ppl << std::fixed << std::setprecision(2) << *r.ppl;
        } else {
            ppl << "-";
        }
        cells.push_back({r.strategy, pct(r.acc), ppl.str(), pct(r.dist1), pct(r.dist2), pct(r.bleu2), pct(r.bleu4),
                         r.cause_f1 ? pct(*r.cause_f1) : "-", raw(r.dist1), raw(r.dist2), std::to_string(r.n_examples)});
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            if (c == 0) {
                out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
            } else {
                out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
            }
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& row : cells) emit(row);
    return out.str();
}

}  // namespace cfeg::metrics
