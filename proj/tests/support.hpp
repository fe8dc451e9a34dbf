#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cfeg/corpus.hpp"

namespace testing_support {

inline const std::filesystem::path kFixtures = CFEG_FIXTURE_DIR;
inline const std::filesystem::path kData = CFEG_DATA_DIR;

/// A scratch directory removed when the object goes out of scope.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cfeg-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline cfeg::corpus::Dialogue make_dialogue(std::string id, std::string emotion, std::vector<std::string> turns,
                                            std::string gold) {
    cfeg::corpus::Dialogue d;
    d.id = std::move(id);
    d.emotion = std::move(emotion);
    for (std::size_t i = 0; i < turns.size(); ++i) {
        d.utterances.push_back({i, i % 2 == 0 ? cfeg::corpus::Role::speaker : cfeg::corpus::Role::listener, turns[i]});
    }
    d.gold_response = std::move(gold);
    return d;
}

inline std::vector<cfeg::corpus::Dialogue> fixture_corpus() {
    return cfeg::corpus::read_canonical(kFixtures / "corpus.jsonl");
}

inline cfeg::corpus::LabelSet labels() { return cfeg::corpus::LabelSet::load(kData / "emotions.txt"); }

}  // namespace testing_support
