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

#include "signpipe/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "signpipe/error.hpp"

namespace signpipe::config {

std::string_view to_string(Mode mode) noexcept { return mode == Mode::Pose ? "pose" : "video"; }

std::string_view to_string(NormalizeScope scope) noexcept {
    return scope == NormalizeScope::PerClip ? "per_clip" : "per_frame";
}

namespace {

// ---------------------------------------------------------------------------
// YAML -> JSON

bool parse_int(std::string_view s, Json& out) {
    if (s.empty()) return false;
    std::string_view body = s;
    if (body.front() == '+') body.remove_prefix(1);
    std::int64_t i = 0;
    auto r = std::from_chars(body.data(), body.data() + body.size(), i);
    if (r.ec == std::errc() && r.ptr == body.data() + body.size()) {
        out = i;
        return true;
    }
    std::uint64_t u = 0;
    r = std::from_chars(body.data(), body.data() + body.size(), u);
    if (r.ec == std::errc() && r.ptr == body.data() + body.size()) {
        out = u;
        return true;
    }
    return false;
}

bool parse_real(std::string_view s, Json& out) {
    if (s.empty()) return false;
    std::string_view body = s;
    if (body.front() == '+') body.remove_prefix(1);
    if (body.empty() || !(std::isdigit(static_cast<unsigned char>(body.front())) || body.front() == '.' ||
                          body.front() == '-')) {
        return false;
    }
    double d = 0;
    auto r = std::from_chars(body.data(), body.data() + body.size(), d, std::chars_format::general);
    if (r.ec == std::errc() && r.ptr == body.data() + body.size() && std::isfinite(d)) {
        out = d;
        return true;
    }
    return false;
}

Json scalar_to_json(const YAML::Node& node) {
    const std::string& s = node.Scalar();
    if (node.Tag() == "!") return s;  // quoted
    if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
    if (s == "true" || s == "True" || s == "TRUE") return true;
    if (s == "false" || s == "False" || s == "FALSE") return false;
    Json out;
    if (parse_int(s, out)) return out;
    if (parse_real(s, out)) return out;
    return s;
}

Json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            return scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            Json arr = Json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            Json obj = Json::object();
            for (const auto& kv : node) {
                if (!kv.first.IsScalar()) fail(Errc::ParseError, "non-scalar mapping key");
                const std::string key = kv.first.Scalar();
                if (obj.contains(key)) fail(Errc::ParseError, "duplicate key '" + key + "'");
                obj[key] = yaml_to_json(kv.second);
            }
            return obj;
        }
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Schema

enum class Kind { String, Real, Int, UInt, Bool, Enum, Map, Object };

struct Node {
    Kind kind = Kind::Object;
    std::vector<std::string> enum_values{};
    std::map<std::string, Node> children{};
};

Node leaf(Kind k) { return Node{k}; }
Node one_of(std::vector<std::string> values) { return Node{Kind::Enum, std::move(values)}; }
Node object(std::map<std::string, Node> children) { return Node{Kind::Object, {}, std::move(children)}; }

const Node& schema() {
    static const Node root = object({
        {"job_name", leaf(Kind::String)},
        {"dataset", object({
                        {"adapter_name", leaf(Kind::String)},
                        {"source_path", leaf(Kind::String)},
                        {"params", leaf(Kind::Map)},
                        {"video_dir", leaf(Kind::String)},
                        {"video_ext", leaf(Kind::String)},
                    })},
        {"processing",
         object({
             {"mode", one_of({"pose", "video"})},
             {"frame_rate_hz", leaf(Kind::Real)},
             {"detector", object({
                              {"backend_name", leaf(Kind::String)},
                              {"params", leaf(Kind::Map)},
                              {"sample_stride", leaf(Kind::Int)},
                              {"rate_hz", leaf(Kind::Real)},
                              {"min_score", leaf(Kind::Real)},
                          })},
             {"extractor", object({
                               {"backend_name", leaf(Kind::String)},
                               {"command", leaf(Kind::String)},
                               {"params", leaf(Kind::Map)},
                               {"expected_keypoints", leaf(Kind::Int)},
                               {"channels", leaf(Kind::Int)},
                           })},
             {"crop", object({
                          {"pad_fraction", leaf(Kind::Real)},
                          {"target_aspect", leaf(Kind::Real)},
                          {"resize", object({{"width", leaf(Kind::Int)}, {"height", leaf(Kind::Int)}})},
                      })},
             {"media", object({
                           {"backend_name", leaf(Kind::String)},
                           {"probe_command", leaf(Kind::String)},
                           {"render_command", leaf(Kind::String)},
                           {"output_ext", leaf(Kind::String)},
                       })},
         })},
        {"postprocess", object({
                            {"enabled", leaf(Kind::Bool)},
                            {"preset_name", leaf(Kind::String)},
                            {"normalize", object({
                                              {"scope", one_of({"per_clip", "per_frame"})},
                                              {"visibility_threshold", leaf(Kind::Real)},
                                              {"epsilon", leaf(Kind::Real)},
                                          })},
                            {"flatten", leaf(Kind::Bool)},
                            {"mask_invisible", leaf(Kind::Bool)},
                            {"keep_depth", leaf(Kind::Bool)},
                        })},
        {"filter", object({
                       {"require_text", leaf(Kind::Bool)},
                       {"require_timing", leaf(Kind::Bool)},
                       {"min_duration_s", leaf(Kind::Real)},
                       {"max_duration_s", leaf(Kind::Real)},
                   })},
        {"output", object({
                       {"format", one_of({"webdataset"})},
                       {"max_samples_per_shard", leaf(Kind::Int)},
                       {"max_bytes_per_shard", leaf(Kind::Int)},
                   })},
        {"runtime", object({
                        {"workers", leaf(Kind::Int)},
                        {"seed", leaf(Kind::UInt)},
                        {"resume", leaf(Kind::Bool)},
                        {"output_root", leaf(Kind::String)},
                    })},
    });
    return root;
}

std::vector<std::string> split_dotted(std::string_view dotted) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto dot = dotted.find('.', start);
        parts.emplace_back(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return parts;
}

std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

std::string_view type_name(const Json& v) {
    switch (v.type()) {
        case Json::value_t::null: return "null";
        case Json::value_t::boolean: return "boolean";
        case Json::value_t::number_integer:
        case Json::value_t::number_unsigned: return "integer";
        case Json::value_t::number_float: return "real";
        case Json::value_t::string: return "string";
        case Json::value_t::array: return "list";
        case Json::value_t::object: return "mapping";
        default: return "value";
    }
}

[[noreturn]] void bad_type(const std::string& path, std::string_view expected, const Json& got) {
    fail(Errc::InvalidValue, path + ": expected " + std::string(expected) + ", got " +
                                 std::string(type_name(got)) + " " + got.dump());
}

/// Structural pass: unknown keys and primitive types. Null means "absent".
void check_tree(const Json& v, const Node& node, const std::string& path) {
    if (v.is_null()) return;
    switch (node.kind) {
        case Kind::String:
            if (!v.is_string()) bad_type(path, "string", v);
            break;
        case Kind::Real:
            if (!v.is_number()) bad_type(path, "real", v);
            break;
        case Kind::Int:
            if (!v.is_number_integer()) bad_type(path, "integer", v);
            break;
        case Kind::UInt:
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                bad_type(path, "unsigned 64-bit integer", v);
            break;
        case Kind::Bool:
            if (!v.is_boolean()) bad_type(path, "boolean", v);
            break;
        case Kind::Enum: {
            if (!v.is_string()) bad_type(path, "one of the listed values", v);
            const auto& s = v.get_ref<const std::string&>();
            bool ok = false;
            std::string listed;
            for (const auto& e : node.enum_values) {
                ok = ok || e == s;
                listed += (listed.empty() ? "" : ", ") + e;
            }
            if (!ok) fail(Errc::InvalidValue, path + ": '" + s + "' is not one of {" + listed + "}");
            break;
        }
        case Kind::Map:
            if (!v.is_object()) bad_type(path, "mapping", v);
            break;
        case Kind::Object:
            if (!v.is_object()) bad_type(path, "mapping", v);
            for (auto it = v.begin(); it != v.end(); ++it) {
                auto child = node.children.find(it.key());
                if (child == node.children.end()) {
                    fail(Errc::UnknownField, "unknown field '" + join_path(path, it.key()) + "'");
                }
                check_tree(it.value(), child->second, join_path(path, it.key()));
            }
            break;
    }
}

// ---------------------------------------------------------------------------
// typed extraction

class Reader {
public:
    Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {}

    bool has(const char* key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }
    std::string where(const char* key) const { return join_path(path_, key); }

    const Json& at(const char* key) const { return obj_.at(key); }

    std::string required_string(const char* key) const {
        if (!has(key)) fail(Errc::InvalidValue, where(key) + ": required field missing");
        auto s = at(key).get<std::string>();
        if (s.empty()) fail(Errc::InvalidValue, where(key) + ": must be non-empty");
        return s;
    }
    std::string string_or(const char* key, std::string fallback) const {
        return has(key) ? at(key).get<std::string>() : fallback;
    }
    std::optional<std::string> optional_string(const char* key) const {
        if (!has(key)) return std::nullopt;
        return at(key).get<std::string>();
    }
    double real_or(const char* key, double fallback) const {
        return has(key) ? at(key).get<double>() : fallback;
    }
    std::optional<double> optional_real(const char* key) const {
        if (!has(key)) return std::nullopt;
        return at(key).get<double>();
    }
    std::int64_t int_or(const char* key, std::int64_t fallback) const {
        return has(key) ? at(key).get<std::int64_t>() : fallback;
    }
    bool bool_or(const char* key, bool fallback) const { return has(key) ? at(key).get<bool>() : fallback; }
    Json map_or_empty(const char* key) const { return has(key) ? at(key) : Json::object(); }
    Reader child(const char* key) const {
        static const Json kEmpty = Json::object();
        return Reader(has(key) ? at(key) : kEmpty, where(key));
    }

private:
    const Json& obj_;
    std::string path_;
};

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) fail(Errc::InvalidValue, path + ": " + what);
}

int checked_int(std::int64_t v, const std::string& path) {
    require(v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max(), path,
            "out of integer range");
    return static_cast<int>(v);
}

}  // namespace

// ---------------------------------------------------------------------------

Json parse_yaml_text(std::string_view text) {
    try {
        YAML::Node node = YAML::Load(std::string(text));
        return yaml_to_json(node);
    } catch (const YAML::Exception& e) {
        fail(Errc::ParseError, std::string("YAML parse error: ") + e.what());
    }
}

Json load_yaml_tree(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::ParseError, "cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_yaml_text(ss.str());
    } catch (const Error& e) {
        fail(Errc::ParseError, path.string() + ": " + e.what());
    }
}

Json parse_scalar(std::string_view text) {
    if (text.empty()) return std::string();
    try {
        YAML::Node node = YAML::Load(std::string(text));
        return yaml_to_json(node);
    } catch (const YAML::Exception&) {
        return std::string(text);
    }
}

void check_path(std::string_view dotted) {
    const Node* node = &schema();
    std::string walked;
    for (const auto& part : split_dotted(dotted)) {
        if (node->kind == Kind::Map) return;  // free-form below a params map
        if (part.empty()) fail(Errc::UnknownField, "malformed path '" + std::string(dotted) + "'");
        if (node->kind != Kind::Object) {
            fail(Errc::UnknownField, "unknown field '" + std::string(dotted) + "' (" + walked + " is a leaf)");
        }
        auto it = node->children.find(part);
        if (it == node->children.end()) fail(Errc::UnknownField, "unknown field '" + std::string(dotted) + "'");
        walked = join_path(walked, part);
        node = &it->second;
    }
}

namespace {

void deep_merge(Json& target, const Json& value) {
    if (target.is_object() && value.is_object()) {
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (target.contains(it.key())) {
                deep_merge(target[it.key()], it.value());
            } else {
                target[it.key()] = it.value();
            }
        }
    } else {
        target = value;
    }
}

}  // namespace

Json merge_overrides(Json base, const Json& overrides) {
    if (overrides.is_null()) return base;
    if (!overrides.is_object()) fail(Errc::InvalidValue, "overrides must be a mapping of dotted paths");
    if (!base.is_object()) base = Json::object();
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        check_path(it.key());
        Json* cursor = &base;
        const auto parts = split_dotted(it.key());
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            Json& next = (*cursor)[parts[i]];
            if (!next.is_object()) next = Json::object();
            cursor = &next;
        }
        deep_merge((*cursor)[parts.back()], it.value());
    }
    return base;
}

JobConfig job_from_tree(const Json& tree) {
    if (!tree.is_object()) fail(Errc::InvalidValue, "config root must be a mapping");
    check_tree(tree, schema(), "");

    const Reader root(tree, "");
    JobConfig c;
    c.job_name = root.required_string("job_name");

    {
        require(root.has("dataset"), "dataset", "required section missing");
        auto r = root.child("dataset");
        c.dataset.adapter_name = r.required_string("adapter_name");
        c.dataset.source_path = r.required_string("source_path");
        c.dataset.params = r.map_or_empty("params");
        c.dataset.video_dir = r.optional_string("video_dir");
        c.dataset.video_ext = r.string_or("video_ext", c.dataset.video_ext);
    }
    {
        require(root.has("processing"), "processing", "required section missing");
        auto r = root.child("processing");
        require(r.has("mode"), r.where("mode"), "required field missing");
        c.processing.mode = r.at("mode") == "pose" ? Mode::Pose : Mode::Video;
        c.processing.frame_rate_hz = r.real_or("frame_rate_hz", c.processing.frame_rate_hz);
        require(c.processing.frame_rate_hz > 0, r.where("frame_rate_hz"), "must be > 0");

        if (r.has("detector")) {
            auto d = r.child("detector");
            DetectorConfig det;
            det.backend_name = d.string_or("backend_name", det.backend_name);
            require(!det.backend_name.empty(), d.where("backend_name"), "must be non-empty");
            det.params = d.map_or_empty("params");
            det.sample_stride = checked_int(d.int_or("sample_stride", det.sample_stride), d.where("sample_stride"));
            require(det.sample_stride >= 1, d.where("sample_stride"), "must be >= 1");
            det.rate_hz = d.real_or("rate_hz", det.rate_hz);
            require(det.rate_hz > 0, d.where("rate_hz"), "must be > 0");
            det.min_score = d.real_or("min_score", det.min_score);
            require(det.min_score >= 0 && det.min_score <= 1, d.where("min_score"), "must be in [0,1]");
            c.processing.detector = det;
        }
        if (r.has("extractor")) {
            auto e = r.child("extractor");
            ExtractorConfig ex;
            ex.backend_name = e.required_string("backend_name");
            ex.command = e.optional_string("command");
            ex.params = e.map_or_empty("params");
            require(e.has("expected_keypoints"), e.where("expected_keypoints"), "required field missing");
            ex.expected_keypoints = checked_int(e.int_or("expected_keypoints", 0), e.where("expected_keypoints"));
            require(ex.expected_keypoints > 0, e.where("expected_keypoints"), "must be > 0");
            ex.channels = checked_int(e.int_or("channels", ex.channels), e.where("channels"));
            require(ex.channels >= 2 && ex.channels <= 4, e.where("channels"), "must be one of {2,3,4}");
            c.processing.extractor = ex;
        }
        if (r.has("crop")) {
            auto cr = r.child("crop");
            CropConfig crop;
            crop.pad_fraction = cr.real_or("pad_fraction", crop.pad_fraction);
            require(crop.pad_fraction >= 0, cr.where("pad_fraction"), "must be >= 0");
            crop.target_aspect = cr.optional_real("target_aspect");
            if (crop.target_aspect) require(*crop.target_aspect > 0, cr.where("target_aspect"), "must be > 0");
            if (cr.has("resize")) {
                auto rs = cr.child("resize");
                ResizeConfig size;
                require(rs.has("width") && rs.has("height"), cr.where("resize"), "needs width and height");
                size.width = checked_int(rs.int_or("width", 0), rs.where("width"));
                size.height = checked_int(rs.int_or("height", 0), rs.where("height"));
                require(size.width > 0, rs.where("width"), "must be > 0");
                require(size.height > 0, rs.where("height"), "must be > 0");
                crop.resize = size;
            }
            c.processing.crop = crop;
        }
        {
            auto m = r.child("media");
            c.processing.media.backend_name = m.string_or("backend_name", c.processing.media.backend_name);
            c.processing.media.probe_command = m.string_or("probe_command", c.processing.media.probe_command);
            c.processing.media.render_command = m.string_or("render_command", c.processing.media.render_command);
            c.processing.media.output_ext = m.string_or("output_ext", c.processing.media.output_ext);
            require(!c.processing.media.output_ext.empty(), m.where("output_ext"), "must be non-empty");
        }
        if (c.processing.mode == Mode::Pose) {
            require(c.processing.extractor.has_value(), "processing.extractor", "required when mode=pose");
        } else {
            require(c.processing.crop.has_value(), "processing.crop", "required when mode=video");
        }
    }
    {
        auto r = root.child("postprocess");
        auto& p = c.postprocess;
        p.enabled = r.bool_or("enabled", p.enabled);
        p.preset_name = r.optional_string("preset_name");
        auto n = r.child("normalize");
        if (n.has("scope")) {
            p.normalize.scope = n.at("scope") == "per_clip" ? NormalizeScope::PerClip : NormalizeScope::PerFrame;
        }
        p.normalize.visibility_threshold = n.real_or("visibility_threshold", p.normalize.visibility_threshold);
        require(p.normalize.visibility_threshold >= 0 && p.normalize.visibility_threshold <= 1,
                n.where("visibility_threshold"), "must be in [0,1]");
        p.normalize.epsilon = n.real_or("epsilon", p.normalize.epsilon);
        require(p.normalize.epsilon > 0, n.where("epsilon"), "must be > 0");
        p.flatten = r.bool_or("flatten", p.flatten);
        p.mask_invisible = r.bool_or("mask_invisible", p.mask_invisible);
        p.keep_depth = r.bool_or("keep_depth", p.keep_depth);
    }
    {
        auto r = root.child("filter");
        auto& f = c.filter;
        f.require_text = r.bool_or("require_text", f.require_text);
        f.require_timing = r.bool_or("require_timing", f.require_timing);
        f.min_duration_s = r.real_or("min_duration_s", f.min_duration_s);
        f.max_duration_s = r.real_or("max_duration_s", f.max_duration_s);
        require(f.min_duration_s >= 0, r.where("min_duration_s"), "must be >= 0");
        require(f.max_duration_s > 0, r.where("max_duration_s"), "must be > 0");
        require(f.min_duration_s < f.max_duration_s, "filter", "min_duration_s must be < max_duration_s");
    }
    {
        auto r = root.child("output");
        auto& o = c.output;
        o.max_samples_per_shard = r.int_or("max_samples_per_shard", o.max_samples_per_shard);
        o.max_bytes_per_shard = r.int_or("max_bytes_per_shard", o.max_bytes_per_shard);
        require(o.max_samples_per_shard > 0, r.where("max_samples_per_shard"), "must be > 0");
        require(o.max_bytes_per_shard > 0, r.where("max_bytes_per_shard"), "must be > 0");
    }
    {
        auto r = root.child("runtime");
        auto& rt = c.runtime;
        rt.workers = checked_int(r.int_or("workers", rt.workers), r.where("workers"));
        require(rt.workers >= 1, r.where("workers"), "must be >= 1");
        if (r.has("seed")) rt.seed = r.at("seed").get<std::uint64_t>();
        rt.resume = r.bool_or("resume", rt.resume);
        rt.output_root = r.string_or("output_root", rt.output_root);
        require(!rt.output_root.empty(), r.where("output_root"), "must be non-empty");
    }
    return c;
}

Json to_tree(const JobConfig& c) {
    Json t = Json::object();
    t["job_name"] = c.job_name;

    Json& ds = t["dataset"];
    ds["adapter_name"] = c.dataset.adapter_name;
    ds["source_path"] = c.dataset.source_path;
    ds["params"] = c.dataset.params;
    if (c.dataset.video_dir) ds["video_dir"] = *c.dataset.video_dir;
    ds["video_ext"] = c.dataset.video_ext;

    Json& pr = t["processing"];
    pr["mode"] = std::string(to_string(c.processing.mode));
    pr["frame_rate_hz"] = c.processing.frame_rate_hz;
    if (const auto& d = c.processing.detector) {
        pr["detector"] = {{"backend_name", d->backend_name}, {"params", d->params},
                          {"sample_stride", d->sample_stride}, {"rate_hz", d->rate_hz},
                          {"min_score", d->min_score}};
    }
    if (const auto& e = c.processing.extractor) {
        Json ex = {{"backend_name", e->backend_name}, {"params", e->params},
                   {"expected_keypoints", e->expected_keypoints}, {"channels", e->channels}};
        if (e->command) ex["command"] = *e->command;
        pr["extractor"] = ex;
    }
    if (const auto& cr = c.processing.crop) {
        Json crop = {{"pad_fraction", cr->pad_fraction}};
        if (cr->target_aspect) crop["target_aspect"] = *cr->target_aspect;
        if (cr->resize) crop["resize"] = {{"width", cr->resize->width}, {"height", cr->resize->height}};
        pr["crop"] = crop;
    }
    pr["media"] = {{"backend_name", c.processing.media.backend_name},
                   {"probe_command", c.processing.media.probe_command},
                   {"render_command", c.processing.media.render_command},
                   {"output_ext", c.processing.media.output_ext}};

    Json& pp = t["postprocess"];
    pp["enabled"] = c.postprocess.enabled;
    if (c.postprocess.preset_name) pp["preset_name"] = *c.postprocess.preset_name;
    pp["normalize"] = {{"scope", std::string(to_string(c.postprocess.normalize.scope))},
                       {"visibility_threshold", c.postprocess.normalize.visibility_threshold},
                       {"epsilon", c.postprocess.normalize.epsilon}};
    pp["flatten"] = c.postprocess.flatten;
    pp["mask_invisible"] = c.postprocess.mask_invisible;
    pp["keep_depth"] = c.postprocess.keep_depth;

    t["filter"] = {{"require_text", c.filter.require_text},
                   {"require_timing", c.filter.require_timing},
                   {"min_duration_s", c.filter.min_duration_s},
                   {"max_duration_s", c.filter.max_duration_s}};
    t["output"] = {{"format", "webdataset"},
                   {"max_samples_per_shard", c.output.max_samples_per_shard},
                   {"max_bytes_per_shard", c.output.max_bytes_per_shard}};
    t["runtime"] = {{"workers", c.runtime.workers},
                    {"seed", c.runtime.seed},
                    {"resume", c.runtime.resume},
                    {"output_root", c.runtime.output_root}};
    return t;
}

JobConfig load_config(const std::filesystem::path& path) { return job_from_tree(load_yaml_tree(path)); }

JobConfig load_config(const std::filesystem::path& path, const Json& overrides) {
    return job_from_tree(merge_overrides(load_yaml_tree(path), overrides));
}

ExperimentConfig experiment_from_tree(const Json& tree, const std::filesystem::path& base_dir) {
    if (!tree.is_object()) fail(Errc::InvalidValue, "experiment root must be a mapping");
    for (auto it = tree.begin(); it != tree.end(); ++it) {
        if (it.key() != "experiment_name" && it.key() != "jobs" && it.key() != "continue_on_error") {
            fail(Errc::UnknownField, "unknown field '" + it.key() + "'");
        }
    }
    ExperimentConfig exp;
    const Reader r(tree, "");
    exp.experiment_name = r.required_string("experiment_name");
    if (r.has("continue_on_error")) {
        if (!r.at("continue_on_error").is_boolean()) bad_type("continue_on_error", "boolean", r.at("continue_on_error"));
        exp.continue_on_error = r.at("continue_on_error").get<bool>();
    }
    if (!r.has("jobs") || !r.at("jobs").is_array() || r.at("jobs").empty()) {
        fail(Errc::InvalidValue, "jobs: must be a non-empty list");
    }
    std::size_t index = 0;
    for (const auto& job : r.at("jobs")) {
        const std::string where = "jobs[" + std::to_string(index) + "]";
        if (!job.is_object()) bad_type(where, "mapping", job);
        for (auto it = job.begin(); it != job.end(); ++it) {
            if (it.key() != "base" && it.key() != "overrides") {
                fail(Errc::UnknownField, "unknown field '" + where + "." + it.key() + "'");
            }
        }
        ExperimentJob ej;
        if (!job.contains("base")) fail(Errc::InvalidValue, where + ".base: required field missing");
        const Json& base = job.at("base");
        if (base.is_string()) {
            std::filesystem::path p = base.get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            ej.base = load_yaml_tree(p);
            ej.label = p.string();
        } else if (base.is_object()) {
            ej.base = base;
            ej.label = where;
        } else {
            bad_type(where + ".base", "path or inline mapping", base);
        }
        ej.overrides = job.contains("overrides") && !job.at("overrides").is_null() ? job.at("overrides")
                                                                                    : Json::object();
        if (!ej.overrides.is_object()) bad_type(where + ".overrides", "mapping", ej.overrides);
        for (auto it = ej.overrides.begin(); it != ej.overrides.end(); ++it) check_path(it.key());
        exp.jobs.push_back(std::move(ej));
        ++index;
    }
    return exp;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    return experiment_from_tree(load_yaml_tree(path), path.parent_path());
}

std::vector<JobConfig> resolve_jobs(const ExperimentConfig& experiment) {
    std::vector<JobConfig> jobs;
    jobs.reserve(experiment.jobs.size());
    for (std::size_t i = 0; i < experiment.jobs.size(); ++i) {
        try {
            jobs.push_back(job_from_tree(merge_overrides(experiment.jobs[i].base, experiment.jobs[i].overrides)));
        } catch (const Error& e) {
            throw Error(e.code(), "jobs[" + std::to_string(i) + "]: " + e.what());
        }
    }
    return jobs;
}

std::string canonical_serialize(const JobConfig& config) { return canonical_dump(to_tree(config)); }

Json identity_tree(const JobConfig& config) {
    Json t = to_tree(config);
    t["runtime"].erase("resume");
    t["runtime"].erase("output_root");
    return t;
}

namespace {

Json subtree(const Json& tree, std::string_view section) {
    check_path(section);
    const Json* cursor = &tree;
    for (const auto& part : split_dotted(section)) {
        if (!cursor->is_object() || !cursor->contains(part)) return nullptr;  // optional, absent
        cursor = &cursor->at(part);
    }
    return *cursor;
}

}  // namespace

Digest config_hash(const JobConfig& config) { return sha256(canonical_serialize(config)); }

Digest config_hash(const JobConfig& config, std::string_view section) {
    return sha256(canonical_dump(subtree(to_tree(config), section)));
}

Digest config_hash(const JobConfig& config, const std::vector<std::string>& sections) {
    const Json tree = to_tree(config);
    Json combined = Json::object();
    for (const auto& s : sections) combined[s] = subtree(tree, s);
    return sha256(canonical_dump(combined));
}

}  // namespace signpipe::config
