#include "cfeg/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"
#include "cfeg/metrics.hpp"

namespace cfeg::orchestrator {

using nlohmann::json;

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::base: return "base";
        case Strategy::icl: return "icl";
        case Strategy::cot: return "cot";
        case Strategy::ckg: return "ckg";
        case Strategy::kg_ecpe: return "kg_ecpe";
        case Strategy::cfeg: return "cfeg";
    }
    return "";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
    for (auto x : kAllStrategies) {
        if (to_string(x) == s) return x;
    }
    return std::nullopt;
}

std::vector<std::string> similarity_tokens(const corpus::Dialogue& d) {
    std::vector<std::string> out;
    for (const auto& u : d.utterances) {
        auto t = metrics::tokenize(u.text);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

std::vector<double> LexicalSimilarity::scores(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& pool) {
    kernels::Interner interner;
    const auto q = interner.set_of(similarity_tokens(query));
    std::vector<kernels::TokenSet> sets;
    sets.reserve(pool.size());
    for (const auto& d : pool) sets.push_back(interner.set_of(similarity_tokens(d)));
    return kernels::parallel::jaccard_scores(q, sets);
}

std::vector<std::size_t> rank_similar(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& pool,
                                      std::size_t k, SimilarityBackend& backend) {
    const auto scores = backend.scores(query, pool);
    if (scores.size() != pool.size()) throw BackendError("similarity backend returned wrong score count", false);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].id != query.id) idx.push_back(i);
    }
    if (idx.size() < k) throw PreconditionError("similar_demos: pool smaller than k");
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return pool[a].id < pool[b].id;
                      });
    idx.resize(k);
    return idx;
}

templates::DemoBlock similar_demos(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& train,
                                   SimilarityBackend* backend) {
    LexicalSimilarity lexical;
    auto idx = rank_similar(query, train, templates::kDemoCount, backend ? *backend : lexical);
    std::vector<const corpus::Dialogue*> demos;
    for (auto i : idx) demos.push_back(&train[i]);
    return templates::render_demos(demos);
}

json PredictionRecord::to_json() const {
    return {{"dialogue_id", dialogue_id},
            {"strategy", to_string(strategy)},
            {"prompt_digest", prompt_digest},
            {"raw_text", raw_text},
            {"parsed", templates::to_json(parsed)},
            {"usage",
             {{"calls", usage.calls}, {"prompt_tokens", usage.prompt_tokens}, {"completion_tokens", usage.completion_tokens}}},
            {"attempts", attempts},
            {"error", error}};
}

PredictionRecord PredictionRecord::from_json(const json& j) {
    PredictionRecord r;
    r.dialogue_id = j.at("dialogue_id").get<std::string>();
    auto s = parse_strategy(j.at("strategy").get<std::string>());
    if (!s) throw std::runtime_error("unknown strategy in prediction record");
    r.strategy = *s;
    r.prompt_digest = j.at("prompt_digest").get<std::string>();
    r.raw_text = j.at("raw_text").get<std::string>();
    r.parsed = templates::parsed_from_json(j.at("parsed"));
    r.usage.calls = j.at("usage").at("calls").get<std::size_t>();
    r.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::size_t>();
    r.usage.completion_tokens = j.at("usage").at("completion_tokens").get<std::size_t>();
    r.attempts = j.value("attempts", 0);
    r.error = j.value("error", "");
    return r;
}

templates::TargetVariant target_for(Strategy s, templates::TargetVariant cfeg_target) {
    switch (s) {
        case Strategy::base:
        case Strategy::icl:
        case Strategy::cot: return templates::TargetVariant::R1;
        case Strategy::ckg:
        case Strategy::kg_ecpe: return templates::TargetVariant::R2;
        case Strategy::cfeg: return cfeg_target;
    }
    return templates::TargetVariant::R1;
}

void check_inputs(Strategy s, const std::vector<corpus::Dialogue>& split, const StrategyInputs& in) {
    auto need = [&](bool ok, const char* what) {
        if (!ok) throw PreconditionError(std::string(to_string(s)) + " strategy requires " + what);
    };
    auto covered = [&](const auto* map, const char* what) {
        need(map != nullptr, what);
        for (const auto& d : split) {
            if (!map->count(d.id)) {
                throw PreconditionError(std::string(to_string(s)) + " strategy: no " + what + " for " + d.id);
            }
        }
    };
    switch (s) {
        case Strategy::base:
        case Strategy::cot: break;
        case Strategy::icl: need(in.train != nullptr, "a train pool"); break;
        case Strategy::ckg: covered(in.last_bundles, "last-utterance knowledge"); break;
        case Strategy::kg_ecpe: covered(in.cause_bundles, "cause-oriented knowledge"); break;
        case Strategy::cfeg:
            need(in.train != nullptr, "a train pool");
            covered(in.causes, "cause span");
            covered(in.cause_bundles, "cause-oriented knowledge");
            break;
    }
}

std::vector<chat::Message> first_messages(Strategy s, const corpus::Dialogue& d, const StrategyInputs& in,
                                          std::uint64_t seed) {
    using templates::PromptVariant;
    const auto& pronoun = in.template_options.pronoun;
    std::string prompt;
    switch (s) {
        case Strategy::base: prompt = templates::build_prompt(PromptVariant::P1, d); break;
        case Strategy::icl: prompt = templates::build_icl_prompt(d, similar_demos(d, *in.train, in.similarity)); break;
        case Strategy::cot:
            prompt = templates::build_prompt(PromptVariant::P1, d) + " " + std::string(kCotStage1);
            break;
        case Strategy::ckg:
            prompt = templates::build_prompt(PromptVariant::P2kg, d, knowledge::verbalize(in.last_bundles->at(d.id), pronoun));
            break;
        case Strategy::kg_ecpe:
            prompt = templates::build_prompt(PromptVariant::P2kg, d, knowledge::verbalize(in.cause_bundles->at(d.id), pronoun));
            break;
        case Strategy::cfeg: {
            const auto demos = templates::sample_demonstrations(*in.train, d.id, seed);
            prompt = templates::build_prompt(PromptVariant::P2kgE, d,
                                             knowledge::verbalize(in.cause_bundles->at(d.id), pronoun), &demos);
            break;
        }
    }
    return {{"user", prompt}};
}

std::vector<PredictionRecord> run_strategy(Strategy s, const std::vector<corpus::Dialogue>& split,
                                           const GenerationConfig& cfg, chat::Backend& backend,
                                           const StrategyInputs& in) {
    if (cfg.temperature < 0) throw PreconditionError("temperature must be >= 0");
    if (cfg.parallelism < 1) throw PreconditionError("parallelism must be >= 1");
    check_inputs(s, split, in);
    const auto target = target_for(s, in.cfeg_target);

    std::vector<PredictionRecord> out(split.size());
    bounded_for(split.size(), cfg.parallelism, [&](std::size_t i) {
        const auto& d = split[i];
        auto& rec = out[i];
        rec.dialogue_id = d.id;
        rec.strategy = s;
        const auto started = std::chrono::steady_clock::now();

        auto call = [&](std::vector<chat::Message> messages) {
            chat::Request req{cfg.model_name, std::move(messages), cfg.temperature, cfg.max_tokens, false};
            rec.prompt_digest = chat::prompt_digest(req.messages);
            int attempts = 0;
            try {
                auto resp = with_retry(cfg.retry, [&] { return backend.complete(req); }, &attempts);
                rec.attempts += attempts;
                rec.usage += resp.usage;
                return std::optional<std::string>(std::move(resp.text));
            } catch (const BackendError& e) {
                rec.attempts += attempts;
                rec.usage.calls += static_cast<std::size_t>(attempts);
                rec.error = e.what();
                return std::optional<std::string>();
            }
        };

        auto messages = first_messages(s, d, in, cfg.seed);
        auto reply = call(messages);
        if (reply && s == Strategy::cot) {
            messages.push_back({"assistant", *reply});
            messages.push_back({"user", std::string(kCotStage2)});
            reply = call(messages);
        }
        if (reply) {
            rec.raw_text = *reply;
            rec.parsed = templates::parse_response(*reply, target);
        } else {
            rec.parsed.parse_ok = false;
        }
        rec.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    });
    return out;
}

json RunSummary::to_json() const {
    return {{"records", records}, {"backend_calls", backend_calls}, {"gaps", gaps}, {"complete", gaps.empty()}};
}

RunSummary summarize(const std::vector<PredictionRecord>& records) {
    RunSummary s;
    s.records = records.size();
    for (const auto& r : records) {
        s.backend_calls += r.usage.calls;
        if (!r.error.empty()) s.gaps.push_back(r.dialogue_id);
    }
    return s;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
    std::string body;
    for (const auto& r : records) {
        body += r.to_json().dump();
        body += '\n';
    }
    write_file_atomic(path, body);
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<PredictionRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) out.push_back(PredictionRecord::from_json(json::parse(line)));
    }
    return out;
}

}  // namespace cfeg::orchestrator
