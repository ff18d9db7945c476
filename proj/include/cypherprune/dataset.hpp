#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace cypherprune {

enum class Split { kTrain, kTest };

std::string_view to_string(Split split) noexcept;
std::optional<Split> parse_split(std::string_view text) noexcept;

struct DatasetRecord {
    std::string record_id;
    std::string question;
    std::string schema_text;
    std::string cypher;
    std::string data_source;
    std::optional<std::string> database_ref;
    Split split = Split::kTrain;
    /// Fields not recognised by the loader, kept in input order for round-trips.
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();

    bool operator==(const DatasetRecord&) const = default;
};

struct DatasetCounts {
    std::size_t total = 0;
    std::map<std::string, std::size_t> by_split;
    std::map<std::string, std::size_t> by_data_source;
    /// Records without a database reference are tallied under "".
    std::map<std::string, std::size_t> by_database_ref;

    bool operator==(const DatasetCounts&) const = default;
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

DatasetCounts count_records(std::span<const DatasetRecord> records);

/// Immutable, validated collection of records. Ids are unique.
class DatasetFile {
  public:
    DatasetFile() = default;
    /// Throws DatasetError(kDuplicateRecordId) or (kEmptyDataset).
    explicit DatasetFile(std::vector<DatasetRecord> records);

    [[nodiscard]] const std::vector<DatasetRecord>& records() const noexcept { return records_; }
    [[nodiscard]] const DatasetCounts& counts() const noexcept { return counts_; }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }

    [[nodiscard]] const DatasetRecord* find(std::string_view record_id) const;
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view record_id) const;

    /// SHA-256 over the canonical serialisation of every record, in order.
    [[nodiscard]] const std::string& content_hash() const noexcept { return content_hash_; }

  private:
    std::vector<DatasetRecord> records_;
    DatasetCounts counts_;
    std::unordered_map<std::string, std::size_t> index_;
    std::string content_hash_;
};

/// Names of the JSON keys holding each record field. Lets files exported with
/// other naming (e.g. "database_reference_alias") be read without rewriting.
struct FieldMapping {
    std::string question = "question";
    std::string schema = "schema";
    std::string cypher = "cypher";
    std::string data_source = "data_source";
    std::string database_ref = "database_ref";
    std::string instance_id = "instance_id";
    std::string split = "split";
    /// Prefix removed from database_ref values when present.
    std::string database_ref_strip_prefix;

    static FieldMapping from_json(const nlohmann::json& j);
    static FieldMapping load(const std::filesystem::path& path);
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

struct LoadOptions {
    bool strict = true;
    /// Used when a line carries no split field.
    Split default_split = Split::kTrain;
    FieldMapping fields;
};

struct LineIssue {
    std::size_t line = 0;
    std::string cause;
};

struct ValidationReport {
    std::size_t total = 0;
    std::size_t valid = 0;
    std::size_t invalid = 0;
    std::vector<LineIssue> errors;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

struct LoadResult {
    DatasetFile file;
    ValidationReport report;
};

/// Reads a JSON-lines dataset. Strict mode throws on the first bad line;
/// lenient mode records it in the report and keeps going. Blank lines are
/// ignored. Throws DatasetError.
LoadResult load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

/// Parses one JSON line into a record; throws DatasetError(kMalformedLine).
DatasetRecord parse_record(std::string_view line, std::size_t line_no, const LoadOptions& options);

/// Canonical single-line serialisation (no trailing newline).
std::string serialize_record(const DatasetRecord& record);

/// Throws DatasetError(kEmptyInput) or (kIoFailure).
void write_dataset(std::span<const DatasetRecord> records, const std::filesystem::path& path);

/// Content hash over (question, cypher, data_source, split); 16 hex chars.
std::string derive_record_id(std::string_view question, std::string_view cypher,
                             std::string_view data_source, Split split);

} // namespace cypherprune
