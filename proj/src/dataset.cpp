#include "cypherprune/dataset.hpp"

#include <fstream>
#include <unordered_set>

#include "cypherprune/errors.hpp"
#include "cypherprune/hashing.hpp"
#include "cypherprune/text.hpp"

namespace cypherprune {

using nlohmann::ordered_json;

std::string_view to_string(Split split) noexcept {
    return split == Split::kTrain ? "train" : "test";
}

std::optional<Split> parse_split(std::string_view text) noexcept {
    if (text == "train") return Split::kTrain;
    if (text == "test") return Split::kTest;
    return std::nullopt;
}

ordered_json DatasetCounts::to_json() const {
    return {{"total", total},
            {"by_split", by_split},
            {"by_data_source", by_data_source},
            {"by_database_ref", by_database_ref}};
}

DatasetCounts count_records(std::span<const DatasetRecord> records) {
    DatasetCounts c;
    c.total = records.size();
    for (const auto& r : records) {
        ++c.by_split[std::string(to_string(r.split))];
        ++c.by_data_source[r.data_source];
        ++c.by_database_ref[r.database_ref.value_or("")];
    }
    return c;
}

DatasetFile::DatasetFile(std::vector<DatasetRecord> records) : records_(std::move(records)) {
    if (records_.empty()) {
        throw DatasetError(DatasetErrc::kEmptyDataset, "dataset contains no records");
    }
    index_.reserve(records_.size());
    Sha256 hash;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        auto [it, inserted] = index_.emplace(records_[i].record_id, i);
        if (!inserted) {
            throw DatasetError(DatasetErrc::kDuplicateRecordId,
                               "duplicate record id '" + records_[i].record_id + "'");
        }
        hash.update(serialize_record(records_[i]));
        hash.update("\n");
    }
    counts_ = count_records(records_);
    content_hash_ = hash.hex_digest();
}

const DatasetRecord* DatasetFile::find(std::string_view record_id) const {
    auto idx = index_of(record_id);
    return idx ? &records_[*idx] : nullptr;
}

std::optional<std::size_t> DatasetFile::index_of(std::string_view record_id) const {
    auto it = index_.find(std::string(record_id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------

FieldMapping FieldMapping::from_json(const nlohmann::json& j) {
    FieldMapping m;
    auto take = [&](const char* key, std::string& dst) {
        if (auto it = j.find(key); it != j.end()) dst = it->get<std::string>();
    };
    take("question", m.question);
    take("schema", m.schema);
    take("cypher", m.cypher);
    take("data_source", m.data_source);
    take("database_ref", m.database_ref);
    take("instance_id", m.instance_id);
    take("split", m.split);
    take("database_ref_strip_prefix", m.database_ref_strip_prefix);
    return m;
}

FieldMapping FieldMapping::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DatasetError(DatasetErrc::kMissingFile, "cannot open field mapping " + path.string());
    }
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(DatasetErrc::kMalformedLine,
                           "field mapping " + path.string() + ": " + e.what());
    }
}

ordered_json FieldMapping::to_json() const {
    return {{"question", question},         {"schema", schema},
            {"cypher", cypher},             {"data_source", data_source},
            {"database_ref", database_ref}, {"instance_id", instance_id},
            {"split", split},               {"database_ref_strip_prefix", database_ref_strip_prefix}};
}

ordered_json ValidationReport::to_json() const {
    ordered_json errs = ordered_json::array();
    for (const auto& e : errors) errs.push_back({{"line", e.line}, {"cause", e.cause}});
    return {{"total", total}, {"valid", valid}, {"invalid", invalid}, {"errors", std::move(errs)}};
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void malformed(std::size_t line_no, const std::string& cause) {
    throw DatasetError(DatasetErrc::kMalformedLine,
                       "line " + std::to_string(line_no) + ": " + cause, line_no);
}

std::string required_string(const ordered_json& obj, const std::string& key, std::size_t line_no,
                            bool allow_empty) {
    auto it = obj.find(key);
    if (it == obj.end()) malformed(line_no, "missing field \"" + key + "\"");
    if (!it->is_string()) malformed(line_no, "field \"" + key + "\" is not a string");
    auto value = it->get<std::string>();
    if (!allow_empty && trim(value).empty()) malformed(line_no, "field \"" + key + "\" is empty");
    return value;
}

} // namespace

DatasetRecord parse_record(std::string_view line, std::size_t line_no, const LoadOptions& options) {
    const auto& f = options.fields;
    ordered_json obj;
    try {
        obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        malformed(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) malformed(line_no, "line is not a JSON object");

    DatasetRecord r;
    r.question = required_string(obj, f.question, line_no, false);
    r.cypher = required_string(obj, f.cypher, line_no, false);
    r.schema_text = obj.contains(f.schema) ? required_string(obj, f.schema, line_no, true) : "";
    r.data_source = required_string(obj, f.data_source, line_no, true);

    if (auto it = obj.find(f.database_ref); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) malformed(line_no, "field \"" + f.database_ref + "\" is not a string");
        auto ref = it->get<std::string>();
        if (!f.database_ref_strip_prefix.empty() && ref.starts_with(f.database_ref_strip_prefix)) {
            ref.erase(0, f.database_ref_strip_prefix.size());
        }
        if (!trim(ref).empty()) r.database_ref = std::move(ref);
    }

    r.split = options.default_split;
    if (auto it = obj.find(f.split); it != obj.end()) {
        auto parsed = it->is_string() ? parse_split(it->get<std::string>()) : std::nullopt;
        if (!parsed) malformed(line_no, "field \"" + f.split + "\" must be \"train\" or \"test\"");
        r.split = *parsed;
    }

    if (auto it = obj.find(f.instance_id); it != obj.end() && !it->is_null()) {
        if (it->is_string()) {
            r.record_id = it->get<std::string>();
        } else if (it->is_number_integer()) {
            r.record_id = it->dump();
        } else {
            malformed(line_no, "field \"" + f.instance_id + "\" must be a string or integer");
        }
        if (trim(r.record_id).empty()) malformed(line_no, "field \"" + f.instance_id + "\" is empty");
    } else {
        r.record_id = derive_record_id(r.question, r.cypher, r.data_source, r.split);
    }

    for (auto& [key, value] : obj.items()) {
        if (key == f.question || key == f.schema || key == f.cypher || key == f.data_source ||
            key == f.database_ref || key == f.split || key == f.instance_id) {
            continue;
        }
        r.extra[key] = value;
    }
    return r;
}

LoadResult load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError(DatasetErrc::kMissingFile, "cannot open dataset " + path.string());
    }

    ValidationReport report;
    std::vector<DatasetRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++report.total;
        try {
            auto record = parse_record(line, line_no, options);
            if (!seen.insert(record.record_id).second) {
                throw DatasetError(DatasetErrc::kDuplicateRecordId,
                                   "line " + std::to_string(line_no) + ": duplicate record id '" +
                                       record.record_id + "'",
                                   line_no);
            }
            records.push_back(std::move(record));
            ++report.valid;
        } catch (const DatasetError& e) {
            if (options.strict) throw;
            ++report.invalid;
            report.errors.push_back({line_no, e.what()});
        }
    }
    if (records.empty()) {
        throw DatasetError(DatasetErrc::kEmptyDataset, "no valid records in " + path.string());
    }
    return {DatasetFile(std::move(records)), std::move(report)};
}

std::string serialize_record(const DatasetRecord& r) {
    ordered_json obj;
    obj["instance_id"] = r.record_id;
    obj["question"] = r.question;
    obj["schema"] = r.schema_text;
    obj["cypher"] = r.cypher;
    obj["data_source"] = r.data_source;
    if (r.database_ref) obj["database_ref"] = *r.database_ref;
    obj["split"] = to_string(r.split);
    for (const auto& [key, value] : r.extra.items()) {
        // canonical keys win over extras carried in from a remapped file
        if (!obj.contains(key) && key != "database_ref") obj[key] = value;
    }
    return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void write_dataset(std::span<const DatasetRecord> records, const std::filesystem::path& path) {
    if (records.empty()) {
        throw DatasetError(DatasetErrc::kEmptyInput, "refusing to write an empty dataset");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DatasetError(DatasetErrc::kIoFailure, "cannot open " + path.string() + " for writing");
    }
    for (const auto& r : records) out << serialize_record(r) << '\n';
    out.flush();
    if (!out) {
        throw DatasetError(DatasetErrc::kIoFailure, "write to " + path.string() + " failed");
    }
}

std::string derive_record_id(std::string_view question, std::string_view cypher,
                             std::string_view data_source, Split split) {
    Sha256 h;
    h.add_field(question).add_field(cypher).add_field(data_source).add_field(to_string(split));
    return h.hex_digest().substr(0, 16);
}

} // namespace cypherprune
