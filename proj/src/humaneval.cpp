#include "cfeg/humaneval.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"

namespace cfeg::humaneval {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Mode m) { return m == Mode::likert ? "likert" : "ab_pair"; }

std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "likert") return Mode::likert;
    if (s == "ab_pair") return Mode::ab_pair;
    return std::nullopt;
}

std::string_view to_string(Preference p) {
    switch (p) {
        case Preference::A: return "A";
        case Preference::B: return "B";
        case Preference::tie: return "tie";
    }
    return "";
}

std::optional<Preference> parse_preference(std::string_view s) {
    if (s == "A") return Preference::A;
    if (s == "B") return Preference::B;
    if (s == "tie") return Preference::tie;
    return std::nullopt;
}

const EvalItem& Session::item(const std::string& item_id) const {
    for (const auto& it : items) {
        if (it.item_id == item_id) return it;
    }
    throw std::out_of_range("unknown item " + item_id);
}

const Task* Session::find_task(const std::string& task_id) const {
    for (const auto& t : tasks) {
        if (t.task_id == task_id) return &t;
    }
    return nullptr;
}

json to_json(const Session& s) {
    json items = json::array();
    for (const auto& it : s.items) {
        items.push_back({{"item_id", it.item_id},
                         {"context", it.context},
                         {"candidates", it.candidates},
                         {"mode", to_string(it.mode)}});
    }
    json tasks = json::array();
    for (const auto& t : s.tasks) {
        tasks.push_back({{"task_id", t.task_id},
                         {"item_id", t.item_id},
                         {"annotator_id", t.annotator_id},
                         {"mode", to_string(t.mode)},
                         {"shown", t.shown}});
    }
    return {{"id", s.id},
            {"items", items},
            {"annotators", s.annotators},
            {"blinding_seed", s.blinding_seed},
            {"tasks", tasks}};
}

Session session_from_json(const json& j) {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.annotators = j.at("annotators").get<std::vector<std::string>>();
    s.blinding_seed = j.at("blinding_seed").get<std::uint64_t>();
    for (const auto& it : j.at("items")) {
        s.items.push_back({it.at("item_id").get<std::string>(), it.at("context").get<std::string>(),
                           it.at("candidates").get<std::map<std::string, std::string>>(),
                           parse_mode(it.at("mode").get<std::string>()).value()});
    }
    for (const auto& t : j.at("tasks")) {
        s.tasks.push_back({t.at("task_id").get<std::string>(), t.at("item_id").get<std::string>(),
                           t.at("annotator_id").get<std::string>(), parse_mode(t.at("mode").get<std::string>()).value(),
                           t.at("shown").get<std::vector<std::string>>()});
    }
    return s;
}

Session make_session(const std::string& id, std::vector<EvalItem> items, std::vector<std::string> annotators,
                     std::uint64_t blinding_seed) {
    if (id.empty() || id.find_first_of("/\\.") != std::string::npos) throw PreconditionError("bad session id: " + id);
    if (items.empty()) throw PreconditionError("create_session: no items");
    if (annotators.empty()) throw PreconditionError("create_session: no annotators");
    std::set<std::string> seen;
    for (const auto& it : items) {
        if (!seen.insert(it.item_id).second) throw PreconditionError("duplicate item id " + it.item_id);
        if (it.mode == Mode::ab_pair && it.candidates.size() != 2) {
            throw PreconditionError("ab_pair item " + it.item_id + " needs exactly 2 candidates");
        }
        if (it.candidates.empty()) throw PreconditionError("item " + it.item_id + " has no candidates");
    }
    if (std::set<std::string>(annotators.begin(), annotators.end()).size() != annotators.size()) {
        throw PreconditionError("duplicate annotator id");
    }

    Session s{id, std::move(items), std::move(annotators), blinding_seed, {}};
    Rng rng(blinding_seed);
    for (const auto& it : s.items) {
        std::vector<std::string> systems;
        for (const auto& [sys, text] : it.candidates) systems.push_back(sys);
        for (const auto& a : s.annotators) {
            if (it.mode == Mode::ab_pair) {
                auto shown = systems;
                if (rng.coin()) std::swap(shown[0], shown[1]);
                s.tasks.push_back({"t" + std::to_string(s.tasks.size()), it.item_id, a, it.mode, shown});
            } else {
                // one rating task per candidate, in a per-annotator shuffled order
                auto order = systems;
                rng.shuffle(order);
                for (const auto& sys : order) {
                    s.tasks.push_back({"t" + std::to_string(s.tasks.size()), it.item_id, a, it.mode, {sys}});
                }
            }
        }
    }
    return s;
}

Submission Submission::from_json(const json& j) {
    Submission s;
    s.task_id = j.at("task_id").get<std::string>();
    s.annotator_id = j.at("annotator_id").get<std::string>();
    if (j.contains("scores")) {
        for (const auto& [k, v] : j.at("scores").items()) {
            if (!v.is_number_integer()) throw AnnotationError(400, "score for " + k + " must be an integer");
            s.scores[k] = v.get<int>();
        }
    }
    if (j.contains("preferences")) {
        for (const auto& [k, v] : j.at("preferences").items()) {
            auto p = v.is_string() ? parse_preference(v.get<std::string>()) : std::nullopt;
            if (!p) throw AnnotationError(400, "preference for " + k + " must be A, B or tie");
            s.preferences[k] = *p;
        }
    }
    s.idempotency_key = j.value("idempotency_key", "");
    return s;
}

json AnnotationRecord::to_json() const {
    json prefs = json::object();
    for (const auto& [k, p] : preferences) prefs[k] = to_string(p);
    return {{"session_id", session_id},     {"task_id", task_id},
            {"item_id", item_id},           {"annotator_id", annotator_id},
            {"mode", to_string(mode)},      {"scores", scores},
            {"preferences", prefs},         {"left_system", left_system},
            {"right_system", right_system}, {"timestamp", timestamp},
            {"idempotency_key", idempotency_key}};
}

AnnotationRecord AnnotationRecord::from_json(const json& j) {
    AnnotationRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.task_id = j.at("task_id").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>()).value();
    r.scores = j.at("scores").get<std::map<std::string, int>>();
    for (const auto& [k, v] : j.at("preferences").items()) r.preferences[k] = parse_preference(v.get<std::string>()).value();
    r.left_system = j.at("left_system").get<std::string>();
    r.right_system = j.at("right_system").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.idempotency_key = j.value("idempotency_key", "");
    return r;
}

namespace {

std::string task_key(const std::string& session, const std::string& task) { return session + '\x1f' + task; }

std::string now_iso() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void append_durable(const fs::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::runtime_error("cannot open " + path.string());
    std::size_t off = 0;
    while (off < line.size()) {
        const auto n = ::write(fd, line.data() + off, line.size() - off);
        if (n < 0) {
            ::close(fd);
            throw std::runtime_error("write failed on " + path.string());
        }
        off += static_cast<std::size_t>(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw std::runtime_error("fsync failed on " + path.string());
}

void validate(const Task& task, const Submission& sub) {
    if (sub.annotator_id != task.annotator_id) throw AnnotationError(403, "task " + task.task_id + " belongs to another annotator");
    if (task.mode == Mode::likert) {
        if (!sub.preferences.empty()) throw AnnotationError(400, "likert task takes scores, not preferences");
        for (const auto& a : kLikertAspects) {
            auto it = sub.scores.find(a);
            if (it == sub.scores.end()) throw AnnotationError(400, "missing score for " + a);
            if (it->second < 1 || it->second > 5) throw AnnotationError(400, "score for " + a + " out of range 1..5");
        }
        if (sub.scores.size() != kLikertAspects.size()) throw AnnotationError(400, "unknown aspect in scores");
    } else {
        if (!sub.scores.empty()) throw AnnotationError(400, "ab_pair task takes preferences, not scores");
        for (const auto& a : kAbAspects) {
            if (!sub.preferences.count(a)) throw AnnotationError(400, "missing preference for " + a);
        }
        if (sub.preferences.size() != kAbAspects.size()) throw AnnotationError(400, "unknown aspect in preferences");
    }
}

}  // namespace

Store::Store(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_ / "sessions");
    auto snap = std::make_shared<Snapshot>();
    for (const auto& entry : fs::directory_iterator(dir_ / "sessions")) {
        if (entry.path().extension() != ".json") continue;
        auto s = std::make_shared<Session>(session_from_json(json::parse(read_file(entry.path()))));
        snap->sessions[s->id] = std::move(s);
    }
    const auto log = dir_ / "annotations.jsonl";
    if (fs::exists(log)) {
        auto body = read_file(log);
        // a torn tail from a crash mid-write was never acknowledged
        const auto last_nl = body.rfind('\n');
        const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
        if (keep != body.size()) {
            fs::resize_file(log, keep);
            body.resize(keep);
        }
        std::size_t pos = 0;
        while (pos < body.size()) {
            const auto nl = body.find('\n', pos);
            const auto line = body.substr(pos, nl - pos);
            pos = nl + 1;
            if (trim(line).empty()) continue;
            auto r = AnnotationRecord::from_json(json::parse(line));
            const auto key = task_key(r.session_id, r.task_id);
            if (snap->answered.count(key)) continue;
            snap->answered[key] = r.idempotency_key;
            snap->records[r.session_id].push_back(std::move(r));
        }
    }
    snapshot_ = std::move(snap);
}

std::shared_ptr<const Store::Snapshot> Store::load() const { return std::atomic_load(&snapshot_); }

void Store::publish(std::shared_ptr<const Snapshot> s) { std::atomic_store(&snapshot_, std::move(s)); }

void Store::create_session(const Session& s) {
    std::lock_guard lock(write_mu_);
    auto cur = load();
    if (cur->sessions.count(s.id)) throw PreconditionError("duplicate session id " + s.id);
    write_file_atomic(dir_ / "sessions" / (s.id + ".json"), to_json(s).dump(1));
    auto next = std::make_shared<Snapshot>(*cur);
    next->sessions[s.id] = std::make_shared<Session>(s);
    publish(std::move(next));
}

std::shared_ptr<const Session> Store::session(const std::string& id) const {
    auto snap = load();
    auto it = snap->sessions.find(id);
    return it == snap->sessions.end() ? nullptr : it->second;
}

std::vector<std::string> Store::session_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, s] : load()->sessions) out.push_back(id);
    return out;
}

Ack Store::record(const std::string& session_id, const Submission& sub) {
    std::lock_guard lock(write_mu_);
    auto cur = load();
    auto sit = cur->sessions.find(session_id);
    if (sit == cur->sessions.end()) throw AnnotationError(404, "unknown session " + session_id);
    const Task* task = sit->second->find_task(sub.task_id);
    if (!task) throw AnnotationError(404, "unknown task " + sub.task_id);
    const auto key = task_key(session_id, sub.task_id);
    if (auto it = cur->answered.find(key); it != cur->answered.end()) {
        if (!sub.idempotency_key.empty() && it->second == sub.idempotency_key) return {sub.task_id, true};
        throw AnnotationError(409, "task " + sub.task_id + " already answered");
    }
    validate(*task, sub);

    AnnotationRecord r;
    r.session_id = session_id;
    r.task_id = task->task_id;
    r.item_id = task->item_id;
    r.annotator_id = task->annotator_id;
    r.mode = task->mode;
    r.scores = sub.scores;
    r.preferences = sub.preferences;
    r.left_system = task->shown.at(0);
    if (task->mode == Mode::ab_pair) r.right_system = task->shown.at(1);
    r.timestamp = now_iso();
    r.idempotency_key = sub.idempotency_key;

    append_durable(dir_ / "annotations.jsonl", r.to_json().dump() + "\n");
    if (fault_hook_) fault_hook_(r);

    auto next = std::make_shared<Snapshot>(*cur);
    next->answered[key] = r.idempotency_key;
    next->records[session_id].push_back(std::move(r));
    publish(std::move(next));
    return {sub.task_id, false};
}

std::vector<AnnotationRecord> Store::annotations(const std::string& session_id) const {
    auto snap = load();
    auto it = snap->records.find(session_id);
    return it == snap->records.end() ? std::vector<AnnotationRecord>{} : it->second;
}

bool Store::answered(const std::string& session_id, const std::string& task_id) const {
    return load()->answered.count(task_key(session_id, task_id)) != 0;
}

json blinded_tasks(const Session& s, const std::string& annotator, const Store& store) {
    json tasks = json::array();
    std::size_t done = 0;
    for (const auto& t : s.tasks) {
        if (t.annotator_id != annotator) continue;
        const auto& item = s.item(t.item_id);
        json responses = json::array();
        for (std::size_t k = 0; k < t.shown.size(); ++k) {
            responses.push_back({{"label", "Response " + std::to_string(k + 1)}, {"text", item.candidates.at(t.shown[k])}});
        }
        const bool answered = store.answered(s.id, t.task_id);
        done += answered ? 1 : 0;
        tasks.push_back({{"task_id", t.task_id},
                         {"mode", to_string(t.mode)},
                         {"context", item.context},
                         {"responses", responses},
                         {"aspects", t.mode == Mode::likert ? kLikertAspects : kAbAspects},
                         {"answered", answered}});
    }
    return {{"session", s.id},
            {"annotator", annotator},
            {"tasks", tasks},
            {"progress", {{"done", done}, {"total", tasks.size()}}}};
}

std::vector<AbRow> ab_results(const std::vector<AnnotationRecord>& records, const std::string& system_a,
                              const std::string& system_b) {
    std::vector<AbRow> rows;
    for (const auto& aspect : kAbAspects) {
        AbRow row{aspect};
        std::size_t win = 0, lose = 0, tie = 0;
        for (const auto& r : records) {
            if (r.mode != Mode::ab_pair) continue;
            const bool pair = (r.left_system == system_a && r.right_system == system_b) ||
                              (r.left_system == system_b && r.right_system == system_a);
            if (!pair) continue;
            const auto p = r.preferences.at(aspect);
            if (p == Preference::tie) {
                ++tie;
            } else if ((p == Preference::A ? r.left_system : r.right_system) == system_a) {
                ++win;
            } else {
                ++lose;
            }
        }
        row.n = win + lose + tie;
        if (row.n == 0) throw PreconditionError("ab_results: no annotations for " + system_a + " vs " + system_b);
        const double n = static_cast<double>(row.n);
        row.win = 100.0 * static_cast<double>(win) / n;
        row.lose = 100.0 * static_cast<double>(lose) / n;
        row.tie = 100.0 * static_cast<double>(tie) / n;
        rows.push_back(row);
    }
    return rows;
}

namespace {

void check_shape(const std::vector<std::vector<std::string>>& labels, std::size_t min_raters) {
    if (labels.empty()) throw PreconditionError("kappa: insufficient overlap, no shared items");
    const auto r = labels.front().size();
    if (r < min_raters) throw PreconditionError("kappa: need at least 2 annotators per item");
    for (const auto& item : labels) {
        if (item.size() != r) throw PreconditionError("kappa: every item needs the same number of ratings");
    }
}

AgreementStats finish(AgreementStats s) {
    if (s.p_e == 1.0) {
        if (s.p_o != 1.0) throw PreconditionError("kappa undefined: expected agreement is 1");
        s.kappa = 1.0;
    } else {
        s.kappa = (s.p_o - s.p_e) / (1.0 - s.p_e);
    }
    return s;
}

}  // namespace

AgreementStats cohen_kappa(const std::vector<std::vector<std::string>>& labels) {
    check_shape(labels, 2);
    if (labels.front().size() != 2) throw PreconditionError("cohen_kappa: exactly 2 raters");
    const double n = static_cast<double>(labels.size());
    std::map<std::string, std::pair<double, double>> marg;
    double agree = 0;
    for (const auto& it : labels) {
        agree += it[0] == it[1] ? 1 : 0;
        marg[it[0]].first += 1;
        marg[it[1]].second += 1;
    }
    AgreementStats s{0, agree / n, 0, "cohen", labels.size(), 2};
    for (const auto& [k, m] : marg) s.p_e += (m.first / n) * (m.second / n);
    return finish(s);
}

AgreementStats fleiss_kappa(const std::vector<std::vector<std::string>>& labels) {
    check_shape(labels, 2);
    const std::size_t raters = labels.front().size();
    const double n = static_cast<double>(raters);
    const double items = static_cast<double>(labels.size());
    std::map<std::string, double> totals;
    double p_bar = 0;
    for (const auto& it : labels) {
        std::map<std::string, double> counts;
        for (const auto& l : it) counts[l] += 1;
        double sq = 0;
        for (const auto& [k, c] : counts) {
            sq += c * c;
            totals[k] += c;
        }
        p_bar += (sq - n) / (n * (n - 1));
    }
    AgreementStats s{0, p_bar / items, 0, "fleiss", labels.size(), raters};
    for (const auto& [k, c] : totals) {
        const double p = c / (items * n);
        s.p_e += p * p;
    }
    return finish(s);
}

AgreementStats kappa(const std::vector<std::vector<std::string>>& labels) {
    check_shape(labels, 2);
    return labels.front().size() == 2 ? cohen_kappa(labels) : fleiss_kappa(labels);
}

std::map<std::string, AgreementStats> session_agreement(const Session& s, const std::vector<AnnotationRecord>& records) {
    if (s.annotators.size() < 2) throw PreconditionError("kappa: need at least 2 annotators");
    std::map<std::string, std::size_t> rater_index;
    for (std::size_t i = 0; i < s.annotators.size(); ++i) rater_index[s.annotators[i]] = i;

    // unit: one rated object (item for ab, item + system for likert)
    std::map<std::string, std::vector<const AnnotationRecord*>> units;
    for (const auto& r : records) {
        const auto unit = r.mode == Mode::ab_pair ? r.item_id : r.item_id + '\x1f' + r.left_system;
        auto& slot = units[unit];
        slot.resize(s.annotators.size(), nullptr);
        slot[rater_index.at(r.annotator_id)] = &r;
    }

    std::map<std::string, AgreementStats> out;
    for (const auto mode : {Mode::likert, Mode::ab_pair}) {
        const auto& aspects = mode == Mode::likert ? kLikertAspects : kAbAspects;
        for (const auto& aspect : aspects) {
            std::vector<std::vector<std::string>> labels;
            for (const auto& [unit, slot] : units) {
                if (!slot.front() || slot.front()->mode != mode) continue;
                if (std::any_of(slot.begin(), slot.end(), [](auto* p) { return p == nullptr; })) continue;
                std::vector<std::string> row;
                for (const auto* r : slot) {
                    if (mode == Mode::likert) {
                        row.push_back(std::to_string(r->scores.at(aspect)));
                    } else {
                        const auto p = r->preferences.at(aspect);
                        row.push_back(p == Preference::tie ? "tie" : p == Preference::A ? r->left_system : r->right_system);
                    }
                }
                labels.push_back(std::move(row));
            }
            if (labels.empty()) continue;
            out[std::string(to_string(mode)) + "." + aspect] = kappa(labels);
        }
    }
    if (out.empty()) throw PreconditionError("kappa: insufficient overlap, no item rated by every annotator");
    return out;
}

json to_json(const AgreementStats& a) {
    return {{"kappa", a.kappa}, {"p_o", a.p_o}, {"p_e", a.p_e}, {"method", a.method}, {"items", a.items}, {"raters", a.raters}};
}

json to_json(const std::vector<AbRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) out.push_back({{"aspect", r.aspect}, {"win", r.win}, {"lose", r.lose}, {"tie", r.tie}, {"n", r.n}});
    return out;
}

}  // namespace cfeg::humaneval
