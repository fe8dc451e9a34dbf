#pragma once

// Human evaluation: Likert ratings and blind A/B preferences, a durable
// annotation log, win/lose tables and inter-annotator agreement.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cfeg::humaneval {

enum class Mode { likert, ab_pair };

inline const std::vector<std::string> kLikertAspects = {"coherence", "empathy", "informative", "fluency"};
inline const std::vector<std::string> kAbAspects = {"coherence", "empathy", "informative"};

/// Preference as presented: A is "Response 1" (left), B is "Response 2".
enum class Preference { A, B, tie };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);
std::string_view to_string(Preference p);
std::optional<Preference> parse_preference(std::string_view s);

struct EvalItem {
    std::string item_id;
    std::string context;
    std::map<std::string, std::string> candidates;  // system id -> response
    Mode mode = Mode::likert;
};

struct Task {
    std::string task_id;
    std::string item_id;
    std::string annotator_id;
    Mode mode = Mode::likert;
    /// Presentation order of the systems; one entry in likert mode.
    std::vector<std::string> shown;
};

struct Session {
    std::string id;
    std::vector<EvalItem> items;
    std::vector<std::string> annotators;
    std::uint64_t blinding_seed = 0;
    std::vector<Task> tasks;

    const EvalItem& item(const std::string& item_id) const;
    const Task* find_task(const std::string& task_id) const;
};

nlohmann::json to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

/// One task per (item, annotator). In ab_pair mode the left system is chosen
/// by a coin flip drawn from blinding_seed.
Session make_session(const std::string& id, std::vector<EvalItem> items, std::vector<std::string> annotators,
                     std::uint64_t blinding_seed);

/// What a client submits.
struct Submission {
    std::string task_id;
    std::string annotator_id;
    std::map<std::string, int> scores;               // likert
    std::map<std::string, Preference> preferences;   // ab_pair, per aspect
    std::string idempotency_key;

    static Submission from_json(const nlohmann::json& j);
};

struct AnnotationRecord {
    std::string session_id;
    std::string task_id;
    std::string item_id;
    std::string annotator_id;
    Mode mode = Mode::likert;
    std::map<std::string, int> scores;
    std::map<std::string, Preference> preferences;
    /// System shown as "Response 1" (ab_pair), the de-blinding order bit.
    std::string left_system;
    std::string right_system;
    std::string timestamp;
    std::string idempotency_key;

    nlohmann::json to_json() const;
    static AnnotationRecord from_json(const nlohmann::json& j);
};

/// Thrown by Store::record; `status` maps onto an HTTP status code.
class AnnotationError : public std::runtime_error {
public:
    AnnotationError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

struct Ack {
    std::string task_id;
    bool replayed = false;  // same idempotency key seen before
};

/// Sessions and annotations under one directory: sessions/<id>.json and an
/// append-only annotations.jsonl. The index is rebuilt from the log on open.
class Store {
public:
    explicit Store(std::filesystem::path dir);

    void create_session(const Session& s);
    std::shared_ptr<const Session> session(const std::string& id) const;
    std::vector<std::string> session_ids() const;

    /// Validates, appends and fsyncs before acknowledging.
    Ack record(const std::string& session_id, const Submission& sub);

    std::vector<AnnotationRecord> annotations(const std::string& session_id) const;
    bool answered(const std::string& session_id, const std::string& task_id) const;

    /// Test hook run after the record is durable and before the index is
    /// updated; throwing from it simulates a crash before the ack.
    void set_fault_hook(std::function<void(const AnnotationRecord&)> hook) { fault_hook_ = std::move(hook); }

private:
    struct Snapshot {
        std::map<std::string, std::shared_ptr<const Session>> sessions;
        std::map<std::string, std::vector<AnnotationRecord>> records;  // by session
        std::map<std::string, std::string> answered;                   // session/task -> idempotency key
    };
    std::shared_ptr<const Snapshot> load() const;
    void publish(std::shared_ptr<const Snapshot> s);

    std::filesystem::path dir_;
    std::mutex write_mu_;
    std::shared_ptr<const Snapshot> snapshot_;
    std::function<void(const AnnotationRecord&)> fault_hook_;
};

/// Blinded task list for one annotator: contexts and texts labeled
/// "Response 1"/"Response 2", never system ids.
nlohmann::json blinded_tasks(const Session& s, const std::string& annotator, const Store& store);

struct AbRow {
    std::string aspect;
    double win = 0, lose = 0, tie = 0;  // percentages, sum to 100
    std::size_t n = 0;
};

/// Outcomes for system_a against system_b over every ab annotation of that
/// pairing, de-blinded through the stored left system.
std::vector<AbRow> ab_results(const std::vector<AnnotationRecord>& records, const std::string& system_a,
                              const std::string& system_b);

struct AgreementStats {
    double kappa = 0;
    double p_o = 0;
    double p_e = 0;
    std::string method;  // "cohen" | "fleiss"
    std::size_t items = 0;
    std::size_t raters = 0;
};

/// labels[i][r] is rater r's label on item i; every item has the same rater
/// count. Two raters give Cohen's kappa, more give Fleiss' kappa.
AgreementStats kappa(const std::vector<std::vector<std::string>>& labels);
AgreementStats cohen_kappa(const std::vector<std::vector<std::string>>& labels);
AgreementStats fleiss_kappa(const std::vector<std::vector<std::string>>& labels);

/// Per-aspect agreement over the items every annotator of the session has
/// answered. Likert scores are 5 categories; A/B labels are de-blinded.
std::map<std::string, AgreementStats> session_agreement(const Session& s, const std::vector<AnnotationRecord>& records);

nlohmann::json to_json(const AgreementStats& a);
nlohmann::json to_json(const std::vector<AbRow>& rows);

}  // namespace cfeg::humaneval
