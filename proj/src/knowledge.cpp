#include "cfeg/knowledge.hpp"

#include <fstream>

#include "cfeg/common.hpp"

namespace cfeg::knowledge {

using nlohmann::json;

std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::xIntent: return "xIntent";
        case Relation::xNeed: return "xNeed";
        case Relation::xWant: return "xWant";
        case Relation::xEffect: return "xEffect";
        case Relation::xReact: return "xReact";
    }
    return "";
}

std::optional<Relation> parse_relation(std::string_view s) {
    for (auto r : kRelations) {
        if (to_string(r) == s) return r;
    }
    return std::nullopt;
}

std::string_view to_string(Mode m) { return m == Mode::cause_oriented ? "cause_oriented" : "last_utterance"; }

std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "cause_oriented") return Mode::cause_oriented;
    if (s == "last_utterance") return Mode::last_utterance;
    return std::nullopt;
}

FixtureKnowledgeBackend::FixtureKnowledgeBackend(const std::filesystem::path& path) : label_(path.filename().string()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read knowledge fixture " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto j = json::parse(line);
        auto rel = parse_relation(j.at("relation").get<std::string>());
        if (!rel) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": unknown relation " +
                                     j.at("relation").get<std::string>());
        }
        add(j.at("head").get<std::string>(), *rel, j.at("tails").get<std::vector<std::string>>());
    }
}

void FixtureKnowledgeBackend::add(const std::string& head, Relation r, std::vector<std::string> tails) {
    table_[{head, r}] = std::move(tails);
}

std::vector<std::string> FixtureKnowledgeBackend::tails(const std::string& head, Relation relation, int k) {
    auto it = table_.find({head, relation});
    if (it == table_.end()) {
        throw BackendError("knowledge fixture has no entry for (" + head + ", " + std::string(to_string(relation)) + ")",
                           false);
    }
    auto out = it->second;
    if (k > 0 && out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
    return out;
}

std::vector<std::string> HttpKnowledgeBackend::tails(const std::string& head, Relation relation, int k) {
    auto reply = post_json(ep_, {{"head", head}, {"relation", to_string(relation)}, {"k", k}});
    try {
        return reply.at("tails").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed knowledge backend payload: ") + e.what(), false);
    }
}

CommonsenseBundle fetch_commonsense(const std::string& source_text, Mode mode, KnowledgeBackend& backend, int k) {
    if (trim(source_text).empty()) throw PreconditionError("fetch_commonsense: empty source text");
    CommonsenseBundle b{source_text, mode, {}};
    for (auto r : kRelations) {
        auto tails = backend.tails(source_text, r, k);
        std::string top = tails.empty() ? std::string{} : trim(tails.front());
        if (top.empty()) {
            throw BackendError("knowledge backend returned no tail for relation " + std::string(to_string(r)), false);
        }
        b.inferences[r] = std::move(top);
    }
    return b;
}

std::string knowledge_source(const corpus::Dialogue& d, Mode mode, const std::string& cause_text) {
    return mode == Mode::cause_oriented ? cause_text : corpus::last_speaker_text(d);
}

std::vector<CommonsenseBundle> fetch_all(const std::vector<KnowledgeJob>& jobs, KnowledgeBackend& backend,
                                         std::size_t parallelism, const RetryPolicy& retry, int k) {
    std::vector<CommonsenseBundle> out(jobs.size());
    bounded_for(jobs.size(), parallelism, [&](std::size_t i) {
        out[i] = with_retry(retry, [&] { return fetch_commonsense(jobs[i].source_text, jobs[i].mode, backend, k); });
    });
    return out;
}

namespace {

std::string clean_tail(std::string_view tail) {
    std::string t = trim(tail);
    while (!t.empty() && (t.back() == '.' || t.back() == ';')) t.pop_back();
    return trim(t);
}

}  // namespace

std::string verbalize(const CommonsenseBundle& bundle, const Pronoun& s) {
    auto tail = [&](Relation r) {
        auto it = bundle.inferences.find(r);
        if (it == bundle.inferences.end()) {
            throw PreconditionError("verbalize: bundle lacks " + std::string(to_string(r)));
        }
        return personalize(clean_tail(it->second), s);
    };
    std::string out;
    out += s.subject + " " + s.verb("tend") + " " + tail(Relation::xIntent);
    out += "; " + s.subject + " " + s.verb("need") + " " + tail(Relation::xNeed);
    out += "; " + s.subject + " " + s.verb("want") + " " + tail(Relation::xWant);
    out += "; The effect is that " + s.lower + " " + s.verb("end") + " up " + gerund_phrase(tail(Relation::xEffect));
    out += "; " + s.subject + " " + s.verb("feel") + " " + tail(Relation::xReact);
    out += ".";
    return out;
}

std::string verbalize(const CommonsenseBundle& bundle, std::string_view subject) {
    auto p = Pronoun::from_name(subject);
    if (!p || p->subject != subject) throw PreconditionError("verbalize: unknown subject '" + std::string(subject) + "'");
    return verbalize(bundle, *p);
}

json to_json(const CommonsenseBundle& b) {
    json inf = json::object();
    for (const auto& [r, t] : b.inferences) inf[std::string(to_string(r))] = t;
    return {{"source_text", b.source_text}, {"mode", to_string(b.mode)}, {"inferences", inf}};
}

CommonsenseBundle bundle_from_json(const json& j) {
    CommonsenseBundle b;
    b.source_text = j.at("source_text").get<std::string>();
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw std::runtime_error("bad knowledge mode");
    b.mode = *mode;
    for (auto r : kRelations) b.inferences[r] = j.at("inferences").at(std::string(to_string(r))).get<std::string>();
    return b;
}

}  // namespace cfeg::knowledge
