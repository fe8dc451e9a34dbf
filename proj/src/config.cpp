#include "cfeg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "cfeg/common.hpp"
#include "cfeg/http_json.hpp"

namespace cfeg::config {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const pt::ptree& tree, fs::path base) : tree_(tree), base_(std::move(base)) {}

    std::optional<std::string> raw(const std::string& key) {
        seen_.push_back(key);
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return trim(*v);
    }

    std::string str(const std::string& key, std::string fallback) {
        auto v = raw(key);
        return v ? *v : fallback;
    }

    std::string required(const std::string& key) {
        auto v = raw(key);
        if (!v || v->empty()) {
            problems_.push_back("missing key " + key);
            return {};
        }
        return *v;
    }

    fs::path path(const std::string& key, bool need) {
        auto v = need ? required(key) : str(key, "");
        return v.empty() ? fs::path() : resolve(v);
    }

    fs::path resolve(const std::string& v) const {
        fs::path p(v);
        return p.is_absolute() ? p : (base_ / p).lexically_normal();
    }

    template <typename T>
    T number(const std::string& key, T fallback) {
        auto v = raw(key);
        if (!v || v->empty()) return fallback;
        std::istringstream in(*v);
        T out{};
        if (!(in >> out) || !in.eof()) {
            problems_.push_back("malformed value for " + key + ": " + *v);
            return fallback;
        }
        return out;
    }

    bool flag(const std::string& key, bool fallback) {
        auto v = raw(key);
        if (!v || v->empty()) return fallback;
        const auto l = to_lower(*v);
        if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
        if (l == "false" || l == "0" || l == "no" || l == "off") return false;
        problems_.push_back("malformed boolean for " + key + ": " + *v);
        return fallback;
    }

    void problem(std::string p) { problems_.push_back(std::move(p)); }

    void check_unknown() {
        for (const auto& [section, body] : tree_) {
            if (body.empty()) {
                problems_.push_back("key outside a section: " + section);
                continue;
            }
            for (const auto& [key, v] : body) {
                const auto full = section + "." + key;
                if (std::find(seen_.begin(), seen_.end(), full) == seen_.end()) problems_.push_back("unknown key " + full);
            }
        }
    }

    void finish(const fs::path& source) const {
        if (problems_.empty()) return;
        std::string msg = "config " + source.string() + ":";
        for (const auto& p : problems_) msg += "\n  " + p;
        throw ConfigError(msg);
    }

private:
    const pt::ptree& tree_;
    fs::path base_;
    std::vector<std::string> seen_;
    std::vector<std::string> problems_;
};

std::string env(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

// Backend specs may name a fixture path, which resolves like any other path.
std::string resolve_spec(Reader& r, const std::string& spec, std::string_view scheme) {
    if (spec.rfind(scheme, 0) == 0) {
        const auto rest = spec.substr(scheme.size());
        return std::string(scheme) + (rest.empty() ? "" : r.resolve(rest).string());
    }
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) return spec;
    r.problem("backend must be " + std::string(scheme) + "<path> or an http(s) URL: " + spec);
    return spec;
}

HttpEndpoint endpoint(const Config& c, const std::string& url, const std::string& token) {
    auto ep = HttpEndpoint::parse(url);
    ep.bearer_token = token;
    ep.timeout = std::chrono::milliseconds(c.timeout_ms);
    return ep;
}

}  // namespace

Config load(const fs::path& path) {
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }
    Reader r(tree, fs::absolute(path).parent_path());
    Config c;
    c.source = fs::absolute(path);

    c.workdir = r.path("run.workdir", true);
    c.seed = r.number<std::uint64_t>("run.seed", 0);
    if (auto s = r.raw("run.eval_seeds"); s && !s->empty()) {
        std::string list = *s;
        std::replace(list.begin(), list.end(), ',', ' ');
        for (const auto& tok : split_whitespace(list)) {
            try {
                c.eval_seeds.push_back(std::stoull(tok));
            } catch (const std::exception&) {
                r.problem("malformed seed in run.eval_seeds: " + tok);
            }
        }
    }
    if (c.eval_seeds.empty()) c.eval_seeds = {c.seed};

    c.corpus = r.path("data.corpus", true);
    if (auto f = corpus::parse_format(r.str("data.format", "canonical"))) {
        c.format = *f;
    } else {
        r.problem("data.format must be canonical or edialogue_csv");
    }
    c.labels = r.path("data.labels", true);
    c.valence = r.path("data.valence", true);
    c.ratios = r.str("data.ratios", c.ratios);
    try {
        corpus::parse_ratios(c.ratios);
    } catch (const std::exception& e) {
        r.problem(std::string("data.ratios: ") + e.what());
    }

    c.cause_backend = r.required("cause.backend");
    if (!c.cause_backend.empty()) c.cause_backend = resolve_spec(r, c.cause_backend, "fixture:");
    c.knowledge_backend = r.required("knowledge.backend");
    if (!c.knowledge_backend.empty()) c.knowledge_backend = resolve_spec(r, c.knowledge_backend, "fixture:");
    c.knowledge_k = r.number<int>("knowledge.k", 1);
    if (c.knowledge_k < 1) r.problem("knowledge.k must be >= 1");

    c.model_backend = r.required("model.backend");
    if (!c.model_backend.empty()) c.model_backend = resolve_spec(r, c.model_backend, "mock:");
    c.model_name = r.str("model.name", c.model_name);
    c.temperature = r.number<double>("model.temperature", 0.0);
    if (c.temperature < 0) r.problem("model.temperature must be >= 0");
    c.max_tokens = r.number<int>("model.max_tokens", c.max_tokens);
    c.parallelism = r.number<std::size_t>("model.parallelism", c.parallelism);
    if (c.parallelism < 1) r.problem("model.parallelism must be >= 1");
    c.timeout_ms = r.number<int>("model.timeout_ms", c.timeout_ms);
    c.retries = r.number<int>("model.retries", c.retries);
    if (c.retries < 1) r.problem("model.retries must be >= 1");
    c.backoff_ms = r.number<int>("model.backoff_ms", c.backoff_ms);
    c.logprobs = r.flag("model.logprobs", false);

    if (auto t = templates::parse_target_variant(r.str("templates.target_variant", "R2la"))) {
        c.target = *t;
    } else {
        r.problem("templates.target_variant must be one of R1 R2 R2la T1..T5");
    }
    c.pronoun = r.str("templates.pronoun", c.pronoun);
    if (!Pronoun::from_name(c.pronoun)) r.problem("templates.pronoun must be He, She or They");
    c.literal = r.flag("templates.literal", false);

    const auto strategies = r.str("infer.strategies", "base,icl,cot,ckg,kg_ecpe,cfeg");
    {
        std::string list = strategies;
        std::replace(list.begin(), list.end(), ',', ' ');
        for (const auto& tok : split_whitespace(list)) {
            if (auto s = orchestrator::parse_strategy(tok)) {
                c.strategies.push_back(*s);
            } else {
                r.problem("unknown strategy in infer.strategies: " + tok);
            }
        }
    }
    c.eval_split = r.str("infer.split", c.eval_split);
    if (c.eval_split != "test" && c.eval_split != "valid") r.problem("infer.split must be test or valid");
    c.limit = r.number<std::size_t>("infer.limit", 0);

    c.trainer.learning_rate = r.number<double>("sft.learning_rate", c.trainer.learning_rate);
    c.trainer.lora_rank = r.number<int>("sft.lora_rank", c.trainer.lora_rank);
    c.trainer.batch_size = r.number<int>("sft.batch_size", c.trainer.batch_size);

    c.humaneval_dir = r.path("humaneval.dir", false);
    if (c.humaneval_dir.empty()) c.humaneval_dir = c.workdir / "humaneval";
    c.host = r.str("humaneval.host", c.host);
    c.port = r.number<int>("humaneval.port", c.port);
    c.static_dir = r.path("humaneval.static_dir", false);

    r.check_unknown();
    r.finish(path);

    c.model_token = env("CFEG_MODEL_TOKEN");
    c.cause_token = env("CFEG_CAUSE_TOKEN");
    c.knowledge_token = env("CFEG_KNOWLEDGE_TOKEN");
    c.admin_token = env("CFEG_ADMIN_TOKEN");
    return c;
}

RetryPolicy Config::retry() const { return {retries, std::chrono::milliseconds(backoff_ms), 2.0}; }

Pronoun Config::pronoun_forms() const { return Pronoun::from_name(pronoun).value(); }

templates::TemplateOptions Config::template_options() const { return {pronoun_forms(), literal}; }

json Config::resolved() const {
    json strategies = json::array();
    for (auto s : this->strategies) strategies.push_back(orchestrator::to_string(s));
    return {{"run", {{"workdir", workdir.string()}, {"seed", seed}, {"eval_seeds", eval_seeds}}},
            {"data",
             {{"corpus", corpus.string()},
              {"format", format == corpus::Format::canonical ? "canonical" : "edialogue_csv"},
              {"labels", labels.string()},
              {"valence", valence.string()},
              {"ratios", ratios}}},
            {"cause", {{"backend", cause_backend}}},
            {"knowledge", {{"backend", knowledge_backend}, {"k", knowledge_k}}},
            {"model",
             {{"backend", model_backend},
              {"name", model_name},
              {"temperature", temperature},
              {"max_tokens", max_tokens},
              {"parallelism", parallelism},
              {"timeout_ms", timeout_ms},
              {"retries", retries},
              {"backoff_ms", backoff_ms},
              {"logprobs", logprobs}}},
            {"templates", {{"target_variant", templates::to_string(target)}, {"pronoun", pronoun}, {"literal", literal}}},
            {"infer", {{"strategies", strategies}, {"split", eval_split}, {"limit", limit}}},
            {"sft",
             {{"learning_rate", trainer.learning_rate}, {"lora_rank", trainer.lora_rank}, {"batch_size", trainer.batch_size}}},
            {"humaneval",
             {{"dir", humaneval_dir.string()}, {"host", host}, {"port", port}, {"static_dir", static_dir.string()}}}};
}

std::unique_ptr<cause::CauseBackend> make_cause_backend(const Config& c) {
    if (c.cause_backend.rfind("fixture:", 0) == 0) {
        return std::make_unique<cause::FixtureCauseBackend>(fs::path(c.cause_backend.substr(8)));
    }
    return std::make_unique<cause::HttpCauseBackend>(endpoint(c, c.cause_backend, c.cause_token));
}

std::unique_ptr<knowledge::KnowledgeBackend> make_knowledge_backend(const Config& c) {
    if (c.knowledge_backend.rfind("fixture:", 0) == 0) {
        return std::make_unique<knowledge::FixtureKnowledgeBackend>(fs::path(c.knowledge_backend.substr(8)));
    }
    return std::make_unique<knowledge::HttpKnowledgeBackend>(endpoint(c, c.knowledge_backend, c.knowledge_token));
}

std::unique_ptr<chat::Backend> make_model_backend(const Config& c) {
    if (c.model_backend.rfind("mock:", 0) == 0) {
        const auto script = c.model_backend.substr(5);
        if (script.empty()) return std::make_unique<chat::MockBackend>();
        return std::make_unique<chat::MockBackend>(fs::path(script));
    }
    return std::make_unique<chat::HttpBackend>(endpoint(c, c.model_backend, c.model_token), c.logprobs);
}

}  // namespace cfeg::config
