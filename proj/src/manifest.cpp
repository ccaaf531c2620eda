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

#include "signpipe/manifest.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "signpipe/csv.hpp"
#include "signpipe/error.hpp"

namespace signpipe::manifest {

namespace {

constexpr Field kAllFields[] = {Field::SampleId, Field::VideoId, Field::StartS, Field::EndS,
                                Field::Text,     Field::Split,   Field::SignerId, Field::BBox};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::SourceUnreadable, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string_view to_string(Field field) noexcept {
    switch (field) {
        case Field::SampleId: return "sample_id";
        case Field::VideoId: return "video_id";
        case Field::StartS: return "start_s";
        case Field::EndS: return "end_s";
        case Field::Text: return "text";
        case Field::Split: return "split";
        case Field::SignerId: return "signer_id";
        case Field::BBox: return "bbox";
    }
    return "";
}

std::optional<Field> field_from_string(std::string_view name) noexcept {
    for (auto f : kAllFields) {
        if (to_string(f) == name) return f;
    }
    return std::nullopt;
}

std::vector<ColumnTarget> normalize_columns(const std::vector<std::string>& headers, const AliasTable& aliases) {
    std::vector<ColumnTarget> out;
    out.reserve(headers.size());
    std::map<Field, std::string> claimed;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        ColumnTarget t;
        t.header = headers[i];
        const std::string key(trim(headers[i]));
        if (key.empty()) {
            t.flagged = true;
            t.extras_key = "column_" + std::to_string(i);
        } else if (auto it = aliases.find(lower(key)); it != aliases.end()) {
            if (auto prev = claimed.find(it->second); prev != claimed.end()) {
                fail(Errc::AmbiguousAlias, "columns '" + prev->second + "' and '" + headers[i] +
                                               "' both map to " + std::string(to_string(it->second)));
            }
            claimed.emplace(it->second, headers[i]);
            t.field = it->second;
        } else {
            t.extras_key = key;
        }
        out.push_back(std::move(t));
    }
    return out;
}

AliasTable alias_table_from_json(const Json& tree) {
    AliasTable table;
    if (!tree.is_null() && !tree.is_object()) fail(Errc::InvalidValue, "alias table must map canonical fields to alias lists");
    for (auto f : kAllFields) {
        const std::string name(to_string(f));
        if (tree.is_null() || !tree.contains(name) || (tree.at(name).is_array() && tree.at(name).empty())) table[name] = f;
    }
    if (tree.is_null()) return table;
    for (auto it = tree.begin(); it != tree.end(); ++it) {
        auto field = field_from_string(it.key());
        if (!field) fail(Errc::InvalidValue, "alias table: unknown canonical field '" + it.key() + "'");
        if (!it.value().is_array()) fail(Errc::InvalidValue, "alias table: '" + it.key() + "' must list aliases");
        for (const auto& alias : it.value()) {
            if (!alias.is_string()) fail(Errc::InvalidValue, "alias table: aliases must be strings");
            auto [pos, inserted] = table.emplace(lower(alias.get<std::string>()), *field);
            if (!inserted && pos->second != *field) {
                fail(Errc::InvalidValue, "alias table: '" + alias.get<std::string>() + "' maps to two fields");
            }
        }
    }
    return table;
}

AliasTable load_alias_table(const std::filesystem::path& path) {
    try {
        return alias_table_from_json(Json::parse(read_file(path)));
    } catch (const Json::exception& e) {
        fail(Errc::InvalidValue, path.string() + ": " + e.what());
    }
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("SIGNPIPE_DATA_DIR"); env && *env) return env;
    return SIGNPIPE_DATA_DIR;
}

AliasTable alias_table_for(std::string_view table_name, const Json& params) {
    Json tree = Json::parse(read_file(data_dir() / "aliases" / (std::string(table_name) + ".json")));
    if (params.is_object() && params.contains("aliases")) {
        const Json& custom = params.at("aliases");
        if (!custom.is_object()) fail(Errc::InvalidValue, "dataset.params.aliases must be a mapping");
        for (auto it = custom.begin(); it != custom.end(); ++it) tree[it.key()] = it.value();
    }
    return alias_table_from_json(tree);
}

// ---------------------------------------------------------------------------

std::string normalize_text(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
    icu::UnicodeString in = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString normalized = nfc->normalize(in, status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalization failed");

    icu::UnicodeString collapsed;
    bool pending_space = false;
    for (int32_t i = 0; i < normalized.length();) {
        const UChar32 cp = normalized.char32At(i);
        i += U16_LENGTH(cp);
        if (u_isUWhiteSpace(cp)) {
            pending_space = true;
            continue;
        }
        if (pending_space && collapsed.length() > 0) collapsed.append(static_cast<UChar>(' '));
        pending_space = false;
        collapsed.append(cp);
    }
    std::string out;
    collapsed.toUTF8String(out);
    return out;
}

FilterResult filter_segments(const Manifest& manifest, const config::FilterConfig& rules) {
    FilterResult result;
    result.retained.source_path = manifest.source_path;
    result.retained.adapter_name = manifest.adapter_name;
    for (const auto& in : manifest.records) {
        ManifestRecord rec = in;
        if (rec.text) rec.text = normalize_text(*rec.text);

        const char* reason = nullptr;
        const bool has_text = rec.text && !rec.text->empty();
        const bool has_timing = rec.start_s && rec.end_s;
        if (rules.require_text && !has_text) {
            reason = "MissingText";
        } else if (rules.require_timing && !has_timing) {
            reason = "MissingTiming";
        } else if (has_timing && *rec.duration() < rules.min_duration_s) {
            reason = "TooShort";
        } else if (has_timing && *rec.duration() > rules.max_duration_s) {
            reason = "TooLong";
        }
        if (reason) {
            result.rejects.push_back({rec.sample_id, "manifest", reason});
        } else {
            result.retained.records.push_back(std::move(rec));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

std::string format_bbox(const geometry::Box& b) {
    return format_real(b.x0) + "," + format_real(b.y0) + "," + format_real(b.x1) + "," + format_real(b.y1);
}

namespace {

std::optional<double> parse_number(std::string_view text) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// [H:]MM:SS[.fff]
std::optional<double> parse_clock(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        auto colon = text.find(':', pos);
        parts.push_back(text.substr(pos, colon == std::string_view::npos ? text.npos : colon - pos));
        if (colon == std::string_view::npos) break;
        pos = colon + 1;
    }
    if (parts.size() > 3) return std::nullopt;
    double total = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const bool last = i + 1 == parts.size();
        if (parts[i].empty() || parts[i].front() == '-') return std::nullopt;
        if (!last && parts[i].find_first_not_of("0123456789") != std::string_view::npos) return std::nullopt;
        auto v = parse_number(parts[i]);
        if (!v) return std::nullopt;
        if (i > 0 && *v >= 60) return std::nullopt;
        total = total * 60 + *v;
    }
    return total;
}

}  // namespace

std::optional<double> parse_seconds(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    if (text.find(':') != std::string_view::npos) return parse_clock(text);
    return parse_number(text);
}

std::optional<geometry::Box> parse_bbox(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '[' && text.back() == ']') {
        text.remove_prefix(1);
        text.remove_suffix(1);
    }
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto next = text.find_first_of(", \t", pos);
        auto token = trim(text.substr(pos, next == std::string_view::npos ? text.npos : next - pos));
        if (!token.empty()) {
            auto v = parse_seconds(token);
            if (!v) return std::nullopt;
            values.push_back(*v);
        }
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    if (values.size() != 4) return std::nullopt;
    geometry::Box box{values[0], values[1], values[2], values[3]};
    if (!box.valid() || box.x0 < 0 || box.y0 < 0) return std::nullopt;
    return box;
}

namespace {

std::string extras_json(const std::map<std::string, std::string>& extras) {
    if (extras.empty()) return {};
    Json obj = Json::object();
    for (const auto& [k, v] : extras) obj[k] = v;
    return canonical_dump(obj);
}

std::vector<std::string> record_fields(const ManifestRecord& r) {
    return {r.sample_id,
            r.video_id,
            r.start_s ? format_real(*r.start_s) : std::string(),
            r.end_s ? format_real(*r.end_s) : std::string(),
            r.text.value_or(""),
            r.split.value_or(""),
            r.signer_id.value_or(""),
            r.bbox ? format_bbox(*r.bbox) : std::string(),
            extras_json(r.extras)};
}

}  // namespace

std::string canonical_body(const Manifest& manifest) {
    std::vector<const ManifestRecord*> sorted;
    sorted.reserve(manifest.records.size());
    for (const auto& r : manifest.records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const ManifestRecord* a, const ManifestRecord* b) { return a->sample_id < b->sample_id; });
    std::string body;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i) body.push_back('\n');
        const auto fields = record_fields(*sorted[i]);
        for (std::size_t f = 0; f < fields.size(); ++f) {
            if (f) body.push_back('\x1F');
            body += fields[f];
        }
    }
    return body;
}

Digest manifest_hash(const Manifest& manifest) { return sha256(canonical_body(manifest)); }

std::string to_csv(const Manifest& manifest) {
    std::string out(kManifestHeader);
    out.push_back('\n');
    for (const auto& r : manifest.records) out += csv::format_row(record_fields(r));
    return out;
}

void write_manifest_csv(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::WriteFailure, "cannot write " + path.string());
    out << to_csv(manifest);
    if (!out) fail(Errc::WriteFailure, "short write to " + path.string());
}

std::string rejects_to_csv(const std::vector<Reject>& rejects, bool with_header) {
    std::string out;
    if (with_header) {
        out = kRejectsHeader;
        out.push_back('\n');
    }
    for (const auto& r : rejects) out += csv::format_row({r.sample_id, r.stage, r.reason});
    return out;
}

std::vector<Reject> read_rejects_csv(const std::filesystem::path& path) {
    auto table = csv::parse(read_file(path));
    std::vector<Reject> out;
    for (const auto& row : table.rows) {
        if (row.size() != 3) fail(Errc::SchemaError, path.string() + ": malformed rejects row");
        out.push_back({row[0], row[1], row[2]});
    }
    return out;
}

}  // namespace signpipe::manifest
