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

#include "signpipe/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "signpipe/adapters.hpp"
#include "signpipe/child_process.hpp"
#include "signpipe/csv.hpp"
#include "signpipe/error.hpp"

namespace signpipe::pipeline {

namespace fs = std::filesystem;
using config::JobConfig;
using manifest::Reject;

std::string_view to_string(Stage stage) noexcept {
    switch (stage) {
        case Stage::Manifest: return "manifest";
        case Stage::Process: return "process";
        case Stage::Postprocess: return "postprocess";
        case Stage::Export: return "export";
    }
    return "";
}

std::optional<Stage> stage_from_string(std::string_view name) noexcept {
    for (auto s : kStages) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

std::vector<std::string> stage_sections(Stage stage) {
    switch (stage) {
        case Stage::Manifest: return {"dataset", "filter"};
        case Stage::Process: return {"processing", "runtime.seed"};
        case Stage::Postprocess: return {"postprocess"};
        case Stage::Export: return {"output", "runtime.workers"};
    }
    return {};
}

std::string_view stage_dir_name(Stage stage) noexcept {
    return stage == Stage::Export ? "shards" : to_string(stage);
}

std::string sanitize_name(std::string_view name) {
    std::string out(name);
    for (char& ch : out) {
        const bool ok = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '.' ||
                        ch == '_' || ch == '-';
        if (!ok) ch = '_';
    }
    if (out.empty()) return "job";
    if (out[0] == '.') out[0] = '_';
    return out;
}

std::string run_id(const JobConfig& config) {
    const std::string digest = to_hex(sha256(canonical_dump(config::identity_tree(config))));
    return sanitize_name(config.job_name) + "-" + digest.substr(0, 12);
}

Digest stage_hash(Stage stage, const JobConfig& config, const Digest& upstream) {
    const Digest sub = config::config_hash(config, stage_sections(stage));
    Sha256 h;
    h.update(to_string(stage));
    h.update(std::span<const std::uint8_t>(sub));
    h.update(std::span<const std::uint8_t>(upstream));
    return h.finish();
}

std::vector<std::vector<std::size_t>> partition_work(std::size_t count, int workers) {
    std::vector<std::size_t> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = i;
    return partition_work(ids, workers);
}

// ---- markers ------------------------------------------------------------------

Json to_json(const StageMarker& m) {
    return {{"stage", std::string(to_string(m.stage))},
            {"input_hash", m.input_hash},
            {"completed_at", m.completed_at},
            {"counts", {{"in", m.counts.in}, {"out", m.counts.out}, {"rejected", m.counts.rejected}}},
            {"run_id", m.run_id}};
}

StageMarker marker_from_json(const Json& t) {
    try {
        StageMarker m;
        auto stage = stage_from_string(t.at("stage").get<std::string>());
        if (!stage) fail(Errc::InvalidValue, "unknown stage in marker");
        m.stage = *stage;
        m.input_hash = t.at("input_hash").get<std::string>();
        m.completed_at = t.at("completed_at").get<std::string>();
        const auto& c = t.at("counts");
        m.counts = {c.at("in").get<std::size_t>(), c.at("out").get<std::size_t>(), c.at("rejected").get<std::size_t>()};
        m.run_id = t.value("run_id", std::string());
        return m;
    } catch (const Json::exception& e) {
        fail(Errc::InvalidValue, std::string("malformed stage marker: ") + e.what());
    }
}

fs::path marker_path(const fs::path& run_dir, Stage stage) {
    return run_dir / "checkpoints" / ("stage." + std::string(to_string(stage)) + ".json");
}

std::optional<StageMarker> read_marker(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        return marker_from_json(Json::parse(in));
    } catch (const std::exception&) {
        return std::nullopt;  // a damaged marker never counts as completion
    }
}

// ---- rejects ------------------------------------------------------------------

RejectSink::RejectSink(fs::path path) : path_(std::move(path)) {}

void RejectSink::record(const Reject& reject) {
    const std::string row = csv::format_row({reject.sample_id, reject.stage, reject.reason});
    std::lock_guard lock(mutex_);
    const bool fresh = !fs::exists(path_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (fresh) out << manifest::kRejectsHeader << '\n';
    out << row;
    out.flush();
    if (!out) fail(Errc::WriteFailure, "cannot append to " + path_.string());
    ++count_;
}

std::size_t RejectSink::count() const {
    std::lock_guard lock(mutex_);
    return count_;
}

void record_reject(const fs::path& run_dir, const std::string& sample_id, const std::string& stage,
                   const std::string& reason) {
    RejectSink(run_dir / "rejects.csv").record({sample_id, stage, reason});
}

// ---- report -------------------------------------------------------------------

Json to_json(const RunReport& r) {
    Json stages = Json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"stage", std::string(to_string(s.stage))},
                          {"input_hash", s.input_hash},
                          {"counts", {{"in", s.counts.in}, {"out", s.counts.out}, {"rejected", s.counts.rejected}}},
                          {"executed", s.executed},
                          {"source_run", s.source_run.empty() ? Json(nullptr) : Json(s.source_run)}});
    }
    std::map<std::string, std::size_t> by_stage, by_reason;
    for (const auto& rj : r.rejects) {
        ++by_stage[rj.stage];
        ++by_reason[rj.reason];
    }
    return {{"run_id", r.run_id},
            {"job_name", r.job_name},
            {"status", r.ok ? "ok" : "failed"},
            {"failed_stage", r.failed_stage.empty() ? Json(nullptr) : Json(r.failed_stage)},
            {"error", r.error.empty() ? Json(nullptr) : Json(r.error)},
            {"stages", stages},
            {"rejects", {{"total", r.rejects.size()}, {"by_stage", by_stage}, {"by_reason", by_reason}}},
            {"shards", shards::to_json(r.shards)["shards"]},
            {"samples", r.shards.total_samples()}};
}

namespace {

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(us / 1000000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(us % 1000000));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) fail(Errc::WriteFailure, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(Errc::WriteFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

Json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Unreadable, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        fail(Errc::Unreadable, path.string() + ": " + e.what());
    }
}

struct StageRun {
    std::vector<Item> items;
    std::vector<Reject> rejects;
};

/// Runs body(worker_id) on W threads; the first captured exception is rethrown.
template <class Body>
void run_workers(int workers, Body&& body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (int w = 0; w < workers; ++w) {
        try {
            body(w);
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

class Runner {
public:
    Runner(RunContext& ctx, const Registries& reg, const ExecuteOptions& opts, RunReport& report)
        : ctx_(ctx), cfg_(ctx.config), reg_(reg), opts_(opts), report_(report), sink_(ctx.run_dir / "rejects.csv") {}

    Stage current() const { return current_; }

    void run() {
        reset_rejects();
        Digest upstream = run_manifest();
        upstream = run_items_stage(Stage::Process, upstream);
        upstream = run_items_stage(Stage::Postprocess, upstream);
        run_export(upstream);
    }

private:
    fs::path stage_dir(Stage s) const { return ctx_.run_dir / stage_dir_name(s); }
    fs::path tmp_dir(Stage s) const { return ctx_.run_dir / "tmp" / to_string(s); }
    int workers() const { return std::max(1, cfg_.runtime.workers); }

    void reset_rejects() {
        write_text(ctx_.run_dir / "rejects.csv", std::string(manifest::kRejectsHeader) + "\n");
    }

    /// Clears the marker and any stale temp output before the stage writes anything.
    fs::path begin(Stage s) {
        std::error_code ec;
        fs::remove(marker_path(ctx_.run_dir, s), ec);
        const fs::path tmp = tmp_dir(s);
        fs::remove_all(tmp, ec);
        fs::create_directories(tmp, ec);
        if (ec) fail(Errc::WriteFailure, "cannot create " + tmp.string() + ": " + ec.message());
        return tmp;
    }

    void commit(Stage s, const Digest& hash, const Counts& counts, std::vector<Reject> rejects) {
        if (!counts.balanced()) fail(Errc::InvalidValue, std::string(to_string(s)) + ": counts do not balance");
        write_text(tmp_dir(s) / "rejects.csv", manifest::rejects_to_csv(rejects));
        std::error_code ec;
        fs::remove_all(stage_dir(s), ec);
        fs::rename(tmp_dir(s), stage_dir(s), ec);
        if (ec) fail(Errc::WriteFailure, "cannot publish " + stage_dir(s).string() + ": " + ec.message());
        StageMarker m{s, to_hex(hash), now_utc(), counts, ctx_.run_id};
        write_text(marker_path(ctx_.run_dir, s), canonical_dump(to_json(m)) + "\n");
        ctx_.stage_records.push_back(m);
        report_.stages.push_back({s, m.input_hash, counts, true, {}});
        report_.rejects.insert(report_.rejects.end(), rejects.begin(), rejects.end());
        if (opts_.after_marker) opts_.after_marker(s);
    }

    bool usable(const std::optional<StageMarker>& m, const std::string& hex, const fs::path& run_dir, Stage s) const {
        return m && m->stage == s && m->input_hash == hex && fs::is_directory(run_dir / stage_dir_name(s));
    }

    /// Skips the stage when this run, or any run under output_root, already finished it
    /// with the same input hash. Outputs from another run are copied in.
    bool try_reuse(Stage s, const Digest& hash) {
        if (!cfg_.runtime.resume) return false;
        const std::string hex = to_hex(hash);
        auto own = read_marker(marker_path(ctx_.run_dir, s));
        std::optional<StageMarker> found;
        if (usable(own, hex, ctx_.run_dir, s)) {
            found = own;
        } else {
            std::vector<fs::path> runs;
            std::error_code ec;
            for (const auto& entry : fs::directory_iterator(cfg_.runtime.output_root, ec)) {
                if (entry.is_directory() && entry.path() != ctx_.run_dir) runs.push_back(entry.path());
            }
            std::sort(runs.begin(), runs.end());
            for (const auto& other : runs) {
                auto m = read_marker(marker_path(other, s));
                if (!usable(m, hex, other, s)) continue;
                const fs::path tmp = begin(s);
                fs::copy(other / stage_dir_name(s), tmp, fs::copy_options::recursive | fs::copy_options::overwrite_existing,
                         ec);
                if (ec) fail(Errc::WriteFailure, "cannot copy outputs of " + other.filename().string() + ": " + ec.message());
                fs::remove_all(stage_dir(s), ec);
                fs::rename(tmp, stage_dir(s), ec);
                if (ec) fail(Errc::WriteFailure, "cannot publish " + stage_dir(s).string() + ": " + ec.message());
                write_text(marker_path(ctx_.run_dir, s), canonical_dump(to_json(*m)) + "\n");
                found = m;
                break;
            }
        }
        if (!found) return false;

        auto rejects = manifest::read_rejects_csv(stage_dir(s) / "rejects.csv");
        for (const auto& r : rejects) sink_.record(r);
        ctx_.stage_records.push_back(*found);
        report_.stages.push_back({s, found->input_hash, found->counts, false, found->run_id});
        report_.rejects.insert(report_.rejects.end(), rejects.begin(), rejects.end());
        return true;
    }

    void pre_acquire() {
        const auto& params = cfg_.dataset.params;
        if (!params.is_object() || !params.contains("pre_acquire_command")) return;
        const auto& cmd = params.at("pre_acquire_command");
        if (!cmd.is_string()) fail(Errc::InvalidValue, "dataset.params.pre_acquire_command must be a string");
        const auto argv = process::substitute(process::split_command(cmd.get<std::string>()),
                                              {{"source", cfg_.dataset.source_path}, {"video_dir", video_dir(cfg_).string()}});
        const auto r = process::run_command(argv);
        if (r.exit_code != 0) {
            fail(Errc::CommandFailure, "pre_acquire_command exited " + std::to_string(r.exit_code) + ": " + r.output);
        }
    }

    Digest run_manifest() {
        current_ = Stage::Manifest;
        pre_acquire();
        const auto adapter = reg_.datasets.resolve(cfg_.dataset.adapter_name)();
        auto ingest = adapter->ingest(cfg_.dataset.source_path, cfg_.dataset.params);
        const Digest hash = stage_hash(Stage::Manifest, cfg_, manifest::manifest_hash(ingest.manifest));

        if (try_reuse(Stage::Manifest, hash)) {
            ctx_.manifest = manifest::read_manifest_csv(stage_dir(Stage::Manifest) / "manifest.csv").manifest;
        } else {
            const fs::path tmp = begin(Stage::Manifest);
            auto filtered = manifest::filter_segments(ingest.manifest, cfg_.filter);
            std::vector<Reject> rejects = ingest.rejects;
            rejects.insert(rejects.end(), filtered.rejects.begin(), filtered.rejects.end());
            for (const auto& r : rejects) sink_.record(r);
            manifest::write_manifest_csv(filtered.retained, tmp / "manifest.csv");
            const Counts counts{ingest.rows_read, filtered.retained.records.size(), rejects.size()};
            ctx_.manifest = std::move(filtered.retained);
            commit(Stage::Manifest, hash, counts, std::move(rejects));
        }
        std::error_code ec;
        fs::copy_file(stage_dir(Stage::Manifest) / "manifest.csv", ctx_.run_dir / "manifest.csv",
                      fs::copy_options::overwrite_existing, ec);
        if (ec) fail(Errc::WriteFailure, "cannot write manifest.csv: " + ec.message());
        return hash;
    }

    std::vector<Item> load_items(Stage s) const {
        std::vector<Item> items;
        const Json tree = read_json(stage_dir(s) / "items.json");
        for (const auto& t : tree.at("items")) items.push_back(item_from_json(t));
        return items;
    }

    void write_items(const fs::path& dir, const std::vector<Item>& items) const {
        Json list = Json::array();
        for (const auto& item : items) list.push_back(to_json(item));
        write_text(dir / "items.json", canonical_dump(Json{{"items", list}}) + "\n");
    }

    /// Collects per-slot outcomes into ordinal-ordered items and rejects.
    StageRun gather(Stage s, std::vector<Outcome>& outcomes, const std::vector<std::string>& ids) {
        StageRun run;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (outcomes[i].item) {
                run.items.push_back(std::move(*outcomes[i].item));
            } else {
                run.rejects.push_back({ids[i], std::string(to_string(s)), outcomes[i].reject_reason});
            }
        }
        return run;
    }

    Digest run_items_stage(Stage s, const Digest& upstream) {
        current_ = s;
        const Digest hash = stage_hash(s, cfg_, upstream);
        if (try_reuse(s, hash)) {
            items_ = load_items(s);
            return hash;
        }
        const fs::path tmp = begin(s);
        const int W = workers();
        std::vector<Outcome> outcomes;
        std::vector<std::string> ids;
        const std::string stage_name(to_string(s));

        if (s == Stage::Process) {
            const auto& records = ctx_.manifest->records;
            outcomes.resize(records.size());
            for (const auto& r : records) ids.push_back(r.sample_id);
            const auto processor = reg_.processors.resolve(processor_name(cfg_))(cfg_, reg_);
            const auto parts = partition_work(records.size(), W);
            run_workers(W, [&](int w) {
                auto worker = processor->make_worker(w);
                for (auto i : parts[static_cast<std::size_t>(w)]) {
                    outcomes[i] = worker->process(records[i], i, tmp);
                    if (!outcomes[i].item) sink_.record({records[i].sample_id, stage_name, outcomes[i].reject_reason});
                }
            });
        } else {
            const fs::path in_dir = stage_dir(Stage::Process);
            outcomes.resize(items_.size());
            for (const auto& it : items_) ids.push_back(it.sample_id);
            const auto post = reg_.postprocessors.resolve(postprocessor_name(cfg_))(cfg_);
            const auto parts = partition_work(items_.size(), W);
            run_workers(W, [&](int w) {
                for (auto i : parts[static_cast<std::size_t>(w)]) {
                    outcomes[i] = post->apply(items_[i], in_dir, tmp);
                    if (!outcomes[i].item) sink_.record({items_[i].sample_id, stage_name, outcomes[i].reject_reason});
                }
            });
        }

        auto run = gather(s, outcomes, ids);
        write_items(tmp, run.items);
        const Counts counts{outcomes.size(), run.items.size(), run.rejects.size()};
        items_ = std::move(run.items);
        commit(s, hash, counts, std::move(run.rejects));
        return hash;
    }

    void run_export(const Digest& upstream) {
        current_ = Stage::Export;
        const Digest hash = stage_hash(Stage::Export, cfg_, upstream);
        if (try_reuse(Stage::Export, hash)) {
            report_.shards = shards::read_shard_index(stage_dir(Stage::Export));
            return;
        }
        const fs::path tmp = begin(Stage::Export);
        const fs::path in_dir = stage_dir(Stage::Postprocess);

        // sanitizing can map two sample ids onto one key; the later sample loses
        std::vector<Item> keep;
        std::vector<Reject> rejects;
        std::set<std::string> keys;
        for (auto& item : items_) {
            if (keys.insert(shards::sanitize_key(item.sample_id)).second) {
                keep.push_back(item);
            } else {
                rejects.push_back({item.sample_id, "export", "DuplicateKey"});
                sink_.record(rejects.back());
            }
        }

        const int W = workers();
        const auto parts = partition_work(keep, W);
        std::vector<shards::ShardIndex> indexes(static_cast<std::size_t>(W));
        const auto exporter = reg_.exporters.resolve(exporter_name(cfg_))(cfg_);
        run_workers(W, [&](int w) {
            const auto& part = parts[static_cast<std::size_t>(w)];
            if (part.empty()) return;
            indexes[static_cast<std::size_t>(w)] = exporter->write(part, in_dir, tmp, w);
        });
        shards::ShardIndex merged;
        for (const auto& idx : indexes) merged.shards.insert(merged.shards.end(), idx.shards.begin(), idx.shards.end());
        shards::write_shard_index(merged, tmp);
        report_.shards = merged;
        const Counts counts{items_.size(), keep.size(), rejects.size()};
        commit(Stage::Export, hash, counts, std::move(rejects));
    }

    RunContext& ctx_;
    const JobConfig& cfg_;
    const Registries& reg_;
    const ExecuteOptions& opts_;
    RunReport& report_;
    RejectSink sink_;
    Stage current_ = Stage::Manifest;
    std::vector<Item> items_;
};

void write_report(const RunReport& report) {
    write_text(report.run_dir / "report.json", canonical_dump(to_json(report)) + "\n");
}

/// Runs one job; the report is complete whether or not the job failed.
RunReport run_job(const JobConfig& config, const Registries& registries, const ExecuteOptions& options,
                  std::exception_ptr& failure) {
    Registries reg = registries;
    register_config_backends(reg, config);
    check_components(reg, config);

    RunContext ctx{config, run_id(config), fs::path(config.runtime.output_root) / run_id(config), {}, {}, {}};
    RunReport report;
    report.run_id = ctx.run_id;
    report.job_name = config.job_name;
    report.run_dir = ctx.run_dir;
    std::error_code ec;
    fs::create_directories(ctx.run_dir / "checkpoints", ec);
    if (ec) throw StageFailure("manifest", Errc::WriteFailure, "cannot create " + ctx.run_dir.string() + ": " + ec.message());

    Runner runner(ctx, reg, options, report);
    try {
        runner.run();
        report.ok = true;
    } catch (const StageFailure& e) {
        report.failed_stage = e.stage();
        report.error = e.what();
        failure = std::current_exception();
    } catch (const Error& e) {
        const std::string stage(to_string(runner.current()));
        report.failed_stage = stage;
        report.error = std::string(signpipe::to_string(e.code())) + ": " + e.what();
        failure = std::make_exception_ptr(StageFailure(stage, e.code(), e.what()));
    } catch (const std::exception& e) {
        const std::string stage(to_string(runner.current()));
        report.failed_stage = stage;
        report.error = e.what();
        failure = std::make_exception_ptr(StageFailure(stage, Errc::StageFailure, e.what()));
    }
    ctx.rejects = report.rejects;
    write_report(report);
    return report;
}

}  // namespace

RunReport execute_job(const JobConfig& config, const Registries& registries, const ExecuteOptions& options) {
    std::exception_ptr failure;
    RunReport report = run_job(config, registries, options, failure);
    if (failure) std::rethrow_exception(failure);
    return report;
}

ExperimentResult execute_experiment(const config::ExperimentConfig& experiment, const Registries& registries,
                                    const ExecuteOptions& options) {
    const auto jobs = config::resolve_jobs(experiment);
    for (const auto& job : jobs) {
        Registries reg = registries;
        register_config_backends(reg, job);
        check_components(reg, job);
    }
    ExperimentResult result;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        std::exception_ptr failure;
        result.reports.push_back(run_job(jobs[i], registries, options, failure));
        if (!failure) continue;
        result.failed_jobs.push_back(i);
        if (experiment.continue_on_error) continue;
        try {
            std::rethrow_exception(failure);
        } catch (const StageFailure& e) {
            throw StageFailure(e.stage(), e.cause(), "job " + std::to_string(i) + ": " + e.detail());
        }
    }
    return result;
}

}  // namespace signpipe::pipeline
