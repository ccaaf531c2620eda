// Copyright (c) 2026, The signpipe authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "signpipe/adapters.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <variant>

#include "signpipe/csv.hpp"
#include "signpipe/error.hpp"

namespace signpipe::manifest {

namespace {

std::string read_source(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) fail(Errc::SourceUnreadable, "cannot read " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::SourceUnreadable, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require_identifier_columns(const std::vector<ColumnTarget>& columns, const std::string& where) {
    bool has_sample = false;
    bool has_video = false;
    for (const auto& c : columns) {
        has_sample = has_sample || c.field == Field::SampleId;
        has_video = has_video || c.field == Field::VideoId;
    }
    if (!has_sample) fail(Errc::SchemaError, where + ": no sample-identifier column");
    if (!has_video) fail(Errc::SchemaError, where + ": no video-identifier column");
}

std::string row_label(std::size_t line) { return "#line" + std::to_string(line); }

/// Either a record or the reason the row was rejected.
std::variant<ManifestRecord, Reject> build_record(const std::vector<ColumnTarget>& columns,
                                                   const csv::Row& row, std::size_t line,
                                                   bool expand_extras_json) {
    std::string label = row_label(line);
    for (std::size_t i = 0; i < columns.size() && i < row.size(); ++i) {
        if (columns[i].field == Field::SampleId && !row[i].empty()) label = row[i];
    }
    if (row.size() != columns.size()) return Reject{label, "manifest", "MalformedRow"};

    ManifestRecord rec;
    const char* bad = nullptr;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const std::string& value = row[i];
        const auto& col = columns[i];
        if (!col.field) {
            if (expand_extras_json && col.extras_key == "extras_json") {
                if (value.empty()) continue;
                try {
                    const Json extras = Json::parse(value);
                    if (!extras.is_object()) throw std::runtime_error("not an object");
                    for (auto it = extras.begin(); it != extras.end(); ++it) {
                        rec.extras[it.key()] = it.value().is_string() ? it.value().get<std::string>()
                                                                       : canonical_dump(it.value());
                    }
                } catch (const std::exception&) {
                    bad = "BadExtras";
                }
                continue;
            }
            rec.extras[col.extras_key] = value;
            continue;
        }
        if (value.empty()) continue;  // optional fields are absent when blank
        switch (*col.field) {
            case Field::SampleId: rec.sample_id = value; break;
            case Field::VideoId: rec.video_id = value; break;
            case Field::StartS:
                rec.start_s = parse_seconds(value);
                if (!rec.start_s) bad = "BadTiming";
                break;
            case Field::EndS:
                rec.end_s = parse_seconds(value);
                if (!rec.end_s) bad = "BadTiming";
                break;
            case Field::Text: rec.text = value; break;
            case Field::Split: rec.split = value; break;
            case Field::SignerId: rec.signer_id = value; break;
            case Field::BBox:
                rec.bbox = parse_bbox(value);
                if (!rec.bbox) bad = "BadBBox";
                break;
        }
    }
    if (rec.sample_id.empty() || rec.video_id.empty()) return Reject{label, "manifest", "MissingIdentifier"};
    if (bad) return Reject{label, "manifest", bad};
    if (rec.start_s && *rec.start_s < 0) return Reject{label, "manifest", "BadTiming"};
    if (rec.start_s && rec.end_s && !(*rec.start_s < *rec.end_s)) return Reject{label, "manifest", "BadTiming"};
    return rec;
}

void append(IngestResult& result, std::variant<ManifestRecord, Reject> item, std::set<std::string>& seen) {
    ++result.rows_read;
    if (auto* reject = std::get_if<Reject>(&item)) {
        result.rejects.push_back(std::move(*reject));
        return;
    }
    auto& rec = std::get<ManifestRecord>(item);
    if (!seen.insert(rec.sample_id).second) {
        fail(Errc::SchemaError, "duplicate sample_id '" + rec.sample_id + "'");
    }
    result.manifest.records.push_back(std::move(rec));
}

char delimiter_from(const Json& params, char fallback) {
    if (!params.is_object() || !params.contains("delimiter")) return fallback;
    const Json& d = params.at("delimiter");
    if (!d.is_string()) fail(Errc::InvalidValue, "dataset.params.delimiter must be a string");
    const auto& s = d.get_ref<const std::string&>();
    if (s == "tab" || s == "\\t" || s == "\t") return '\t';
    if (s.size() != 1) fail(Errc::InvalidValue, "dataset.params.delimiter must be one character");
    return s[0];
}

class DelimitedAdapter final : public DatasetAdapter {
public:
    DelimitedAdapter(std::string name, char delimiter, std::string alias_table, bool expand_extras_json)
        : name_(std::move(name)),
          delimiter_(delimiter),
          alias_table_(std::move(alias_table)),
          expand_extras_json_(expand_extras_json) {}

    IngestResult ingest(const std::filesystem::path& source, const Json& params) const override {
        const std::string text = read_source(source);
        const auto table = csv::parse(text, delimiter_from(params, delimiter_));
        if (table.header.empty()) fail(Errc::SchemaError, source.string() + ": missing header row");

        const auto columns = normalize_columns(table.header, alias_table_for(alias_table_, params));
        require_identifier_columns(columns, source.string());

        IngestResult result;
        result.manifest.source_path = source.string();
        result.manifest.adapter_name = name_;
        std::set<std::string> seen;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            append(result, build_record(columns, table.rows[i], table.line_numbers[i], expand_extras_json_), seen);
        }
        return result;
    }

private:
    std::string name_;
    char delimiter_;
    std::string alias_table_;
    bool expand_extras_json_;
};

std::string json_cell(const Json& v) {
    if (v.is_null()) return {};
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_real(v.get<double>());
    return v.dump();
}

class TranscriptJsonAdapter final : public DatasetAdapter {
public:
    IngestResult ingest(const std::filesystem::path& source, const Json& params) const override {
        const std::string text = read_source(source);
        Json root;
        try {
            root = Json::parse(text);
        } catch (const Json::exception& e) {
            fail(Errc::SchemaError, source.string() + ": " + e.what());
        }
        const Json* segments = &root;
        if (root.is_object()) {
            if (root.contains("segments")) segments = &root.at("segments");
            else if (root.contains("records")) segments = &root.at("records");
        }
        if (!segments->is_array()) fail(Errc::SchemaError, source.string() + ": expected a list of segments");

        const AliasTable aliases = alias_table_for("transcript_json", params);
        IngestResult result;
        result.manifest.source_path = source.string();
        result.manifest.adapter_name = "transcript_json";
        std::set<std::string> seen;
        std::size_t index = 0;
        for (const auto& seg : *segments) {
            ++index;
            if (!seg.is_object()) {
                ++result.rows_read;
                result.rejects.push_back({"#item" + std::to_string(index), "manifest", "MalformedRow"});
                continue;
            }
            std::vector<std::string> keys;
            csv::Row row;
            for (auto it = seg.begin(); it != seg.end(); ++it) {
                keys.push_back(it.key());
                row.push_back(json_cell(it.value()));
            }
            const auto columns = normalize_columns(keys, aliases);
            auto item = build_record(columns, row, index, false);
            if (auto* rej = std::get_if<Reject>(&item); rej && rej->sample_id.rfind("#line", 0) == 0) {
                rej->sample_id = "#item" + std::to_string(index);
            }
            append(result, std::move(item), seen);
        }
        return result;
    }
};

}  // namespace

std::unique_ptr<DatasetAdapter> make_delimited_adapter(std::string name, char default_delimiter,
                                                       std::string alias_table) {
    return std::make_unique<DelimitedAdapter>(std::move(name), default_delimiter, std::move(alias_table), false);
}

std::unique_ptr<DatasetAdapter> make_transcript_json_adapter() { return std::make_unique<TranscriptJsonAdapter>(); }

std::unique_ptr<DatasetAdapter> make_manifest_csv_adapter() {
    return std::make_unique<DelimitedAdapter>("manifest_csv", ',', "manifest_csv", true);
}

IngestResult read_manifest_csv(const std::filesystem::path& path) {
    return make_manifest_csv_adapter()->ingest(path, Json::object());
}

std::vector<std::string> builtin_adapter_names() {
    return {"how2sign_csv", "manifest_csv", "openasl_tsv", "transcript_json"};
}

std::unique_ptr<DatasetAdapter> make_builtin_adapter(std::string_view name) {
    if (name == "how2sign_csv") return make_delimited_adapter("how2sign_csv", ',', "how2sign_csv");
    if (name == "openasl_tsv") return make_delimited_adapter("openasl_tsv", '\t', "openasl_tsv");
    if (name == "transcript_json") return make_transcript_json_adapter();
    if (name == "manifest_csv") return make_manifest_csv_adapter();
    std::string known;
    for (const auto& n : builtin_adapter_names()) known += (known.empty() ? "" : ", ") + n;
    fail(Errc::UnknownAdapter, "unknown dataset adapter '" + std::string(name) + "' (known: " + known + ")");
}

IngestResult ingest(std::string_view adapter_name, const std::filesystem::path& source, const Json& params) {
    return make_builtin_adapter(adapter_name)->ingest(source, params);
}

}  // namespace signpipe::manifest
