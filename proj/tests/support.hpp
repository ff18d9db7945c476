#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cypherprune/dataset.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("cypherprune-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

  private:
    fs::path path_;
};

inline cypherprune::DatasetRecord make_record(std::string id, std::string cypher, std::string source,
                                              std::optional<std::string> db = std::nullopt,
                                              cypherprune::Split split = cypherprune::Split::kTrain) {
    cypherprune::DatasetRecord r;
    r.record_id = std::move(id);
    r.question = "question for " + r.record_id;
    r.schema_text = "(:Node)";
    r.cypher = std::move(cypher);
    r.data_source = std::move(source);
    r.database_ref = std::move(db);
    r.split = split;
    return r;
}

inline void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out << body;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace testing
