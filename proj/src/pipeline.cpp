#include "cfeg/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"
#include "cfeg/humaneval.hpp"
#include "cfeg/metrics.hpp"

namespace cfeg::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using orchestrator::Strategy;

namespace {

std::string now_iso() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<json> read_jsonl(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) out.push_back(json::parse(line));
    }
    return out;
}

void write_jsonl(const fs::path& p, const std::vector<json>& rows) {
    std::string body;
    for (const auto& r : rows) body += r.dump() + "\n";
    write_file_atomic(p, body);
}

std::map<std::string, cause::AnnotatedCause> read_causes(const fs::path& p) {
    std::map<std::string, cause::AnnotatedCause> out;
    for (const auto& j : read_jsonl(p)) {
        auto c = cause::annotated_from_json(j);
        out[c.span.dialogue_id] = std::move(c);
    }
    return out;
}

std::map<std::string, knowledge::CommonsenseBundle> read_bundles(const fs::path& p) {
    std::map<std::string, knowledge::CommonsenseBundle> out;
    for (const auto& j : read_jsonl(p)) out[j.at("dialogue_id").get<std::string>()] = knowledge::bundle_from_json(j.at("bundle"));
    return out;
}

struct Loaded {
    std::vector<corpus::Dialogue> train;
    std::vector<corpus::Dialogue> eval;
};

Loaded load_splits(const config::Config& c, const fs::path& corpus_file, const fs::path& split_file) {
    const auto all = corpus::read_canonical(corpus_file);
    const auto manifest = corpus::SplitManifest::from_json(json::parse(read_file(split_file)));
    auto s = corpus::apply_manifest(all, manifest);
    Loaded out{std::move(s.train), c.eval_split == "valid" ? std::move(s.valid) : std::move(s.test)};
    if (c.limit != 0 && out.eval.size() > c.limit) out.eval.resize(c.limit);
    return out;
}

std::string strategy_label(Strategy s) { return std::string(orchestrator::to_string(s)); }

}  // namespace

std::string prediction_file(const std::string& strategy, std::uint64_t seed, bool seeded) {
    return "predictions/" + strategy + (seeded ? ".seed" + std::to_string(seed) : "") + ".jsonl";
}

RunManifest RunManifest::load_or_create(const config::Config& c) {
    RunManifest m;
    m.path_ = c.workdir / "manifest.json";
    const auto resolved = c.resolved();
    const auto config_digest = sha256_hex(resolved.dump());
    if (fs::exists(m.path_)) {
        m.j_ = json::parse(read_file(m.path_));
    } else {
        m.j_ = {{"run_id", config_digest.substr(0, 16)}, {"created", now_iso()}, {"stages", json::object()}};
    }
    m.j_["config_digest"] = config_digest;
    m.j_["config"] = resolved;
    m.j_["seeds"] = {{"split", c.seed}, {"demos", c.eval_seeds}};
    if (!m.j_.contains("backends")) m.j_["backends"] = json::object();
    return m;
}

void RunManifest::save() const { write_file_atomic(path_, j_.dump(2) + "\n"); }

json* RunManifest::stage(const std::string& name) {
    auto& st = j_["stages"];
    return st.contains(name) ? &st[name] : nullptr;
}

void RunManifest::set_stage(const std::string& name, json record) { j_["stages"][name] = std::move(record); }

void RunManifest::set_backend(const std::string& kind, const std::string& identity) { j_["backends"][kind] = identity; }

std::optional<std::string> RunManifest::producer_of(const std::string& rel) const {
    for (const auto& [name, rec] : j_.at("stages").items()) {
        if (rec.contains("outputs") && rec["outputs"].contains(rel)) return name;
    }
    return std::nullopt;
}

Pipeline::Pipeline(config::Config c) : cfg_(std::move(c)) {
    fs::create_directories(cfg_.workdir / "predictions");
    manifest_ = RunManifest::load_or_create(cfg_);
}

StageResult Pipeline::stage(const std::string& name, const Declared& d,
                            const std::function<json(std::vector<std::string>& outputs)>& body) {
    json inputs = json::object();
    for (const auto& rel : d.inputs) {
        const auto producer = manifest_.producer_of(rel);
        const auto p = artifact(rel);
        if (!producer || !fs::exists(p)) {
            throw ConfigError("stage " + name + " needs " + rel + "; run the stage that produces it first");
        }
        const auto recorded = manifest_.data()["stages"][*producer]["outputs"][rel].get<std::string>();
        const auto actual = file_digest(p);
        if (actual != recorded) {
            throw DigestMismatch("stale input " + rel + ": digest " + actual.substr(0, 12) + " differs from " +
                                 recorded.substr(0, 12) + " recorded by " + *producer);
        }
        inputs[rel] = actual;
    }
    for (const auto& src : d.sources) {
        if (!fs::exists(src)) throw ConfigError("stage " + name + ": source file " + src.string() + " does not exist");
        inputs[src.string()] = file_digest(src);
    }
    const auto params_digest = sha256_hex(d.params.dump());

    if (auto* prev = manifest_.stage(name)) {
        bool fresh = (*prev)["inputs"] == inputs && (*prev)["params_digest"] == params_digest;
        for (const auto& [rel, digest] : (*prev)["outputs"].items()) {
            fresh = fresh && fs::exists(artifact(rel)) && file_digest(artifact(rel)) == digest.get<std::string>();
        }
        if (fresh) return {name, true, (*prev)["summary"]};
    }

    std::vector<std::string> outputs;
    const auto started = now_iso();
    auto summary = body(outputs);
    json outs = json::object();
    for (const auto& rel : outputs) outs[rel] = file_digest(artifact(rel));
    manifest_.set_stage(name, {{"inputs", inputs},
                               {"params", d.params},
                               {"params_digest", params_digest},
                               {"outputs", outs},
                               {"summary", summary},
                               {"started", started},
                               {"finished", now_iso()}});
    manifest_.save();
    return {name, false, summary};
}

StageResult Pipeline::run(const std::string& name) {
    if (name == "ingest") return ingest();
    if (name == "split") return split();
    if (name == "annotate-causes") return annotate_causes();
    if (name == "gen-knowledge") return gen_knowledge();
    if (name == "build-prompts") return build_prompts();
    if (name == "export-sft") return export_sft();
    if (name == "infer") return infer();
    if (name == "evaluate") return evaluate();
    if (name == "report") return report();
    throw ConfigError("unknown stage " + name);
}

std::vector<StageResult> Pipeline::run_all() {
    std::vector<StageResult> out;
    for (const auto& s : kStages) out.push_back(run(s));
    return out;
}

StageResult Pipeline::ingest() {
    Declared d{{}, {cfg_.corpus, cfg_.labels}, {{"format", cfg_.resolved()["data"]["format"]}}};
    return stage("ingest", d, [&](std::vector<std::string>& outputs) {
        const auto labels = corpus::LabelSet::load(cfg_.labels);
        auto result = corpus::import_corpus(cfg_.corpus, cfg_.format, labels);
        corpus::write_canonical(artifact("corpus.jsonl"), result.dialogues);
        std::vector<json> rejects;
        for (const auto& r : result.rejects) rejects.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
        write_jsonl(artifact("rejects.jsonl"), rejects);
        outputs = {"corpus.jsonl", "rejects.jsonl"};
        return json{{"dialogues", result.dialogues.size()}, {"rejects", result.rejects.size()}};
    });
}

StageResult Pipeline::split() {
    Declared d{{"corpus.jsonl"}, {}, {{"ratios", cfg_.ratios}, {"seed", cfg_.seed}}};
    return stage("split", d, [&](std::vector<std::string>& outputs) {
        const auto ratios = corpus::parse_ratios(cfg_.ratios);
        const auto s = corpus::split_corpus(corpus::read_canonical(artifact("corpus.jsonl")), ratios, cfg_.seed);
        write_file_atomic(artifact("split.json"), corpus::make_manifest(s, ratios, cfg_.seed).to_json().dump(1) + "\n");
        outputs = {"split.json"};
        return json{{"train", s.train.size()}, {"valid", s.valid.size()}, {"test", s.test.size()}};
    });
}

StageResult Pipeline::annotate_causes() {
    auto backend = config::make_cause_backend(cfg_);
    manifest_.set_backend("cause", backend->identity());
    Declared d{{"corpus.jsonl", "split.json"}, {}, {{"backend", backend->identity()}, {"split", cfg_.eval_split}, {"limit", cfg_.limit}}};
    if (cfg_.cause_backend.rfind("fixture:", 0) == 0) d.sources.push_back(cfg_.cause_backend.substr(8));
    return stage("annotate-causes", d, [&](std::vector<std::string>& outputs) {
        const auto s = load_splits(cfg_, artifact("corpus.jsonl"), artifact("split.json"));
        auto dialogues = s.train;
        dialogues.insert(dialogues.end(), s.eval.begin(), s.eval.end());
        const auto causes = cause::annotate_all(dialogues, *backend, cfg_.parallelism, cfg_.retry());
        std::vector<json> rows;
        std::vector<std::string> fallbacks;
        for (const auto& c : causes) {
            rows.push_back(cause::to_json(c));
            if (c.fallback) fallbacks.push_back(c.span.dialogue_id);
        }
        write_jsonl(artifact("causes.jsonl"), rows);
        outputs = {"causes.jsonl"};
        return json{{"annotated", causes.size()}, {"fallback", fallbacks.size()}, {"fallback_ids", fallbacks}};
    });
}

StageResult Pipeline::gen_knowledge() {
    auto backend = config::make_knowledge_backend(cfg_);
    manifest_.set_backend("knowledge", backend->identity());
    Declared d{{"corpus.jsonl", "split.json", "causes.jsonl"},
               {},
               {{"backend", backend->identity()}, {"k", cfg_.knowledge_k}, {"split", cfg_.eval_split}, {"limit", cfg_.limit}}};
    if (cfg_.knowledge_backend.rfind("fixture:", 0) == 0) d.sources.push_back(cfg_.knowledge_backend.substr(8));
    return stage("gen-knowledge", d, [&](std::vector<std::string>& outputs) {
        const auto s = load_splits(cfg_, artifact("corpus.jsonl"), artifact("split.json"));
        const auto causes = read_causes(artifact("causes.jsonl"));
        auto fetch = [&](const std::vector<corpus::Dialogue>& ds, knowledge::Mode mode, const std::string& file) {
            std::vector<knowledge::KnowledgeJob> jobs;
            for (const auto& dl : ds) {
                const auto it = causes.find(dl.id);
                const std::string cause_text = it == causes.end() ? std::string() : it->second.span.text;
                jobs.push_back({knowledge::knowledge_source(dl, mode, cause_text), mode});
            }
            const auto bundles = knowledge::fetch_all(jobs, *backend, cfg_.parallelism, cfg_.retry(), cfg_.knowledge_k);
            std::vector<json> rows;
            for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back({{"dialogue_id", ds[i].id}, {"bundle", knowledge::to_json(bundles[i])}});
            write_jsonl(artifact(file), rows);
            return bundles.size();
        };
        auto cause_dialogues = s.train;
        cause_dialogues.insert(cause_dialogues.end(), s.eval.begin(), s.eval.end());
        const auto nc = fetch(cause_dialogues, knowledge::Mode::cause_oriented, "knowledge_cause.jsonl");
        const auto nl = fetch(s.eval, knowledge::Mode::last_utterance, "knowledge_last.jsonl");
        outputs = {"knowledge_cause.jsonl", "knowledge_last.jsonl"};
        return json{{"cause_oriented", nc}, {"last_utterance", nl}};
    });
}

namespace {

struct SideInputs {
    Loaded splits;
    std::map<std::string, cause::AnnotatedCause> causes;
    std::map<std::string, knowledge::CommonsenseBundle> cause_bundles;
    std::map<std::string, knowledge::CommonsenseBundle> last_bundles;

    orchestrator::StrategyInputs view(const config::Config& c) const {
        orchestrator::StrategyInputs in;
        in.train = &splits.train;
        in.causes = &causes;
        in.cause_bundles = &cause_bundles;
        in.last_bundles = &last_bundles;
        in.template_options = c.template_options();
        in.cfeg_target = c.target;
        return in;
    }
};

const std::vector<std::string> kSideFiles = {"corpus.jsonl", "split.json", "causes.jsonl", "knowledge_cause.jsonl",
                                             "knowledge_last.jsonl"};

SideInputs load_side(const config::Config& c, const fs::path& dir) {
    return {load_splits(c, dir / "corpus.jsonl", dir / "split.json"), read_causes(dir / "causes.jsonl"),
            read_bundles(dir / "knowledge_cause.jsonl"), read_bundles(dir / "knowledge_last.jsonl")};
}

json template_params(const config::Config& c) {
    return {{"target_variant", templates::to_string(c.target)},
            {"pronoun", c.pronoun},
            {"literal", c.literal},
            {"split", c.eval_split},
            {"limit", c.limit}};
}

}  // namespace

StageResult Pipeline::build_prompts() {
    auto params = template_params(cfg_);
    params["seeds"] = cfg_.eval_seeds;
    Declared d{kSideFiles, {}, params};
    return stage("build-prompts", d, [&](std::vector<std::string>& outputs) {
        const auto side = load_side(cfg_, cfg_.workdir);
        const auto in = side.view(cfg_);
        std::vector<json> rows;
        for (auto s : cfg_.strategies) {
            orchestrator::check_inputs(s, side.splits.eval, in);
            for (const auto& dl : side.splits.eval) {
                const auto msgs = orchestrator::first_messages(s, dl, in, cfg_.eval_seeds.front());
                rows.push_back({{"dialogue_id", dl.id},
                                {"strategy", orchestrator::to_string(s)},
                                {"prompt", msgs.front().content},
                                {"prompt_digest", chat::prompt_digest(msgs)}});
            }
        }
        write_jsonl(artifact("prompts.jsonl"), rows);
        outputs = {"prompts.jsonl"};
        return json{{"prompts", rows.size()}};
    });
}

StageResult Pipeline::export_sft() {
    Declared d{{"corpus.jsonl", "split.json", "causes.jsonl", "knowledge_cause.jsonl"},
               {cfg_.valence},
               {{"seed", cfg_.seed},
                {"target_variant", templates::to_string(cfg_.target)},
                {"pronoun", cfg_.pronoun},
                {"literal", cfg_.literal},
                {"trainer", cfg_.resolved()["sft"]}}};
    return stage("export-sft", d, [&](std::vector<std::string>& outputs) {
        const auto s = load_splits(cfg_, artifact("corpus.jsonl"), artifact("split.json"));
        const auto causes = read_causes(artifact("causes.jsonl"));
        const auto bundles = read_bundles(artifact("knowledge_cause.jsonl"));
        const auto labels = corpus::LabelSet::load(cfg_.labels);
        const auto valence = templates::ValenceMap::load(cfg_.valence);
        valence.require_total(labels);
        sft::ExportInputs in{&s.train, &s.train, &causes, &bundles, &valence};
        sft::ExportOptions opts{cfg_.seed, cfg_.target, cfg_.template_options(), cfg_.trainer};
        const auto m = sft::export_sft(in, opts, artifact("sft.jsonl"));
        outputs = {"sft.jsonl", "sft.jsonl.manifest.json"};
        return json{{"records", m.records}, {"digest", m.digest}};
    });
}

StageResult Pipeline::infer() {
    auto backend = config::make_model_backend(cfg_);
    manifest_.set_backend("model", backend->identity());
    auto params = template_params(cfg_);
    params["model"] = cfg_.resolved()["model"];
    params["strategies"] = cfg_.resolved()["infer"]["strategies"];
    params["seeds"] = cfg_.eval_seeds;
    Declared d{kSideFiles, {}, params};
    if (cfg_.model_backend.rfind("mock:", 0) == 0 && cfg_.model_backend.size() > 5) d.sources.push_back(cfg_.model_backend.substr(5));
    return stage("infer", d, [&](std::vector<std::string>& outputs) {
        const auto side = load_side(cfg_, cfg_.workdir);
        const auto in = side.view(cfg_);
        json per_strategy = json::object();
        std::size_t calls = 0;
        for (auto s : cfg_.strategies) {
            // only cfeg depends on the demo seed
            const bool seeded = s == Strategy::cfeg && cfg_.eval_seeds.size() > 1;
            const auto seeds = s == Strategy::cfeg ? cfg_.eval_seeds : std::vector<std::uint64_t>{cfg_.eval_seeds.front()};
            for (auto seed : seeds) {
                orchestrator::GenerationConfig g{cfg_.model_name, cfg_.temperature, cfg_.max_tokens, cfg_.parallelism, seed, cfg_.retry()};
                const auto records = orchestrator::run_strategy(s, side.splits.eval, g, *backend, in);
                const auto rel = prediction_file(strategy_label(s), seed, seeded);
                orchestrator::write_predictions(artifact(rel), records);
                // latency lives beside the predictions so they stay reproducible
                std::vector<json> timings;
                for (const auto& r : records) timings.push_back({{"dialogue_id", r.dialogue_id}, {"latency_ms", r.latency_ms}});
                write_jsonl(artifact(rel + ".timings"), timings);
                outputs.push_back(rel);
                const auto summary = orchestrator::summarize(records);
                calls += summary.backend_calls;
                per_strategy[fs::path(rel).stem().string()] = summary.to_json();
            }
        }
        return json{{"backend_calls", calls}, {"strategies", per_strategy}};
    });
}

StageResult Pipeline::evaluate() {
    std::vector<std::string> inputs = kSideFiles;
    std::vector<std::pair<std::string, std::string>> runs;  // strategy, file
    for (auto s : cfg_.strategies) {
        const bool seeded = s == Strategy::cfeg && cfg_.eval_seeds.size() > 1;
        const auto seeds = s == Strategy::cfeg ? cfg_.eval_seeds : std::vector<std::uint64_t>{cfg_.eval_seeds.front()};
        for (auto seed : seeds) {
            runs.emplace_back(strategy_label(s), prediction_file(strategy_label(s), seed, seeded));
            inputs.push_back(runs.back().second);
        }
    }
    auto backend = config::make_model_backend(cfg_);
    Declared d{inputs, {cfg_.valence}, {{"model", cfg_.resolved()["model"]}, {"templates", template_params(cfg_)}}};
    return stage("evaluate", d, [&](std::vector<std::string>& outputs) {
        const auto side = load_side(cfg_, cfg_.workdir);
        const auto in = side.view(cfg_);
        const auto valence = templates::ValenceMap::load(cfg_.valence);

        metrics::GoldSet gold;
        std::vector<std::string> causes;
        for (const auto& dl : side.splits.eval) {
            gold.dialogue_ids.push_back(dl.id);
            gold.emotions.push_back(dl.emotion);
            gold.responses.push_back(dl.gold_response);
            causes.push_back(side.causes.at(dl.id).span.text);
        }
        gold.causes = causes;

        std::vector<metrics::StrategyRun> strategy_runs;
        json warnings = json::array();
        std::map<std::string, std::optional<double>> ppl_cache;
        for (const auto& [name, file] : runs) {
            const auto records = orchestrator::read_predictions(artifact(file));
            metrics::StrategyRun run{name, {}, {}, std::nullopt};
            for (const auto& r : records) {
                run.dialogue_ids.push_back(r.dialogue_id);
                run.parsed.push_back(r.parsed);
            }
            if (!ppl_cache.count(name)) {
                // gold targets in the strategy's output template, scored given its prompt
                const auto s = *orchestrator::parse_strategy(name);
                const auto variant = orchestrator::target_for(s, cfg_.target);
                std::vector<metrics::ScoringItem> items;
                for (const auto& dl : side.splits.eval) {
                    templates::TargetFields f;
                    f.emotion = dl.emotion;
                    f.cause_text = side.causes.at(dl.id).span.text;
                    auto [listener, intent] = templates::listener_fields(dl.emotion, valence);
                    f.listener_emotion = listener;
                    f.intent = intent;
                    f.response = dl.gold_response;
                    items.push_back({orchestrator::first_messages(s, dl, in, cfg_.eval_seeds.front()).front().content,
                                     templates::render_target(variant, f, cfg_.template_options()).rendered});
                }
                std::string warning;
                ppl_cache[name] = metrics::backend_perplexity(
                    items, *backend, {cfg_.model_name, cfg_.parallelism, cfg_.retry()}, &warning);
                if (!warning.empty()) warnings.push_back(name + ": " + warning);
            }
            run.ppl = ppl_cache[name];
            strategy_runs.push_back(std::move(run));
        }
        const auto report = metrics::build_report(strategy_runs, gold);
        write_file_atomic(artifact("report.json"), report.to_json().dump(2) + "\n");
        write_file_atomic(artifact("report.txt"), report.to_text());
        outputs = {"report.json", "report.txt"};
        return json{{"rows", report.rows.size()}, {"warnings", warnings}};
    });
}

StageResult Pipeline::report() {
    Declared d{{"report.json", "report.txt"}, {}, json::object()};
    // A/B summaries depend on annotations that arrive outside the pipeline
    const auto log = cfg_.humaneval_dir / "annotations.jsonl";
    if (fs::exists(log)) d.sources.push_back(log);
    return stage("report", d, [&](std::vector<std::string>& outputs) {
        std::string text = "Automatic evaluation\n\n" + read_file(artifact("report.txt"));
        if (fs::exists(cfg_.humaneval_dir / "sessions")) {
            humaneval::Store store(cfg_.humaneval_dir);
            for (const auto& id : store.session_ids()) {
                const auto session = store.session(id);
                const auto records = store.annotations(id);
                std::set<std::pair<std::string, std::string>> pairs;
                for (const auto& r : records) {
                    if (r.mode != humaneval::Mode::ab_pair) continue;
                    auto a = r.left_system, b = r.right_system;
                    if (b == "cfeg" || (a != "cfeg" && b < a)) std::swap(a, b);
                    pairs.insert({a, b});
                }
                for (const auto& [a, b] : pairs) {
                    text += "\nA/B test, session " + id + ": " + a + " vs. " + b + "\n";
                    text += "aspect        win     lose    tie       n\n";
                    for (const auto& row : humaneval::ab_results(records, a, b)) {
                        char line[96];
                        std::snprintf(line, sizeof line, "%-12s %6.1f%% %6.1f%% %6.1f%% %5zu\n", row.aspect.c_str(), row.win,
                                      row.lose, row.tie, row.n);
                        text += line;
                    }
                }
            }
        }
        write_file_atomic(artifact("final_report.txt"), text);
        outputs = {"final_report.txt"};
        return json{{"bytes", text.size()}};
    });
}

json create_session(const config::Config& c, const SessionRequest& req) {
    const auto mode = humaneval::parse_mode(req.mode);
    if (!mode) throw ConfigError("session mode must be likert or ab_pair");
    if (req.systems.empty()) throw ConfigError("session needs at least one system");
    if (*mode == humaneval::Mode::ab_pair && req.systems.size() != 2) throw ConfigError("ab_pair sessions compare exactly 2 systems");

    const auto all = corpus::read_canonical(c.workdir / "corpus.jsonl");
    std::map<std::string, const corpus::Dialogue*> by_id;
    for (const auto& d : all) by_id[d.id] = &d;

    std::map<std::string, std::map<std::string, std::string>> responses;  // dialogue -> system -> text
    std::vector<std::string> order;
    for (const auto& sys : req.systems) {
        if (!orchestrator::parse_strategy(sys)) throw ConfigError("unknown system " + sys);
        const bool seeded = sys == "cfeg" && c.eval_seeds.size() > 1;
        const auto file = c.workdir / prediction_file(sys, c.eval_seeds.front(), seeded);
        for (const auto& r : orchestrator::read_predictions(file)) {
            if (!r.error.empty()) continue;
            if (responses[r.dialogue_id].empty() && sys == req.systems.front()) order.push_back(r.dialogue_id);
            responses[r.dialogue_id][sys] = r.parsed.response;
        }
    }
    std::vector<humaneval::EvalItem> items;
    for (const auto& id : order) {
        if (responses[id].size() != req.systems.size()) continue;
        items.push_back({id, corpus::context_string(*by_id.at(id)), responses[id], *mode});
    }
    Rng rng(req.seed);
    rng.shuffle(items);
    if (items.size() > req.items) items.resize(req.items);

    humaneval::Store store(c.humaneval_dir);
    const auto s = humaneval::make_session(req.id, std::move(items), req.annotators, req.seed);
    store.create_session(s);
    return {{"session", s.id}, {"items", s.items.size()}, {"tasks", s.tasks.size()}};
}

}  // namespace cfeg::pipeline
