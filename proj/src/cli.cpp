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

#include "signpipe/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>

#include "signpipe/adapters.hpp"
#include "signpipe/config.hpp"
#include "signpipe/error.hpp"
#include "signpipe/pipeline.hpp"
#include "signpipe/shards.hpp"

namespace signpipe::cli {

namespace fs = std::filesystem;

namespace {

void print_error(std::ostream& err, std::string_view code, std::string_view message) {
    std::string flat(message);
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    err << "signpipe: error[" << code << "]: " << flat << '\n';
}

int exit_for(const Error& e) { return e.code() == Errc::StageFailure ? kStageFailure : kValidation; }

/// Flag-level overrides; --set entries are applied last so they win.
struct OverrideFlags {
    std::vector<std::string> sets;
    std::optional<int> workers;
    bool no_resume = false;
    std::string output_root;

    Json build() const {
        Json o = Json::object();
        if (const char* env = std::getenv("SIGNPIPE_OUTPUT_ROOT"); env && *env) o["runtime.output_root"] = env;
        if (!output_root.empty()) o["runtime.output_root"] = output_root;
        if (workers) o["runtime.workers"] = *workers;
        if (no_resume) o["runtime.resume"] = false;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) fail(Errc::InvalidValue, "--set expects dotted.path=value, got '" + s + "'");
            const std::string path = s.substr(0, eq);
            config::check_path(path);
            o[path] = config::parse_scalar(s.substr(eq + 1));
        }
        return o;
    }
};

void print_report(std::ostream& out, const pipeline::RunReport& r) {
    out << "run " << r.run_id << ": " << (r.ok ? "ok" : "failed") << '\n';
    for (const auto& s : r.stages) {
        out << "  " << pipeline::to_string(s.stage) << ": " << (s.executed ? "executed" : "skipped") << " in=" << s.counts.in
            << " out=" << s.counts.out << " rejected=" << s.counts.rejected << '\n';
    }
    out << "  shards: " << r.shards.shards.size() << " samples: " << r.shards.total_samples() << '\n';
    out << "report: " << (r.run_dir / "report.json").string() << '\n';
}

int cmd_run(const std::string& job, const OverrideFlags& flags, std::ostream& out, std::ostream& err) {
    config::JobConfig cfg;
    try {
        cfg = config::load_config(job, flags.build());
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return kValidation;
    }
    try {
        const auto report = pipeline::execute_job(cfg, pipeline::builtin_registries());
        print_report(out, report);
        return kOk;
    } catch (const StageFailure& e) {
        print_error(err, "StageFailure", e.what());
        out << "report: " << (fs::path(cfg.runtime.output_root) / pipeline::run_id(cfg) / "report.json").string() << '\n';
        return kStageFailure;
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return exit_for(e);
    }
}

int cmd_experiment(const std::string& file, bool continue_on_error, const OverrideFlags& flags, std::ostream& out,
                   std::ostream& err) {
    config::ExperimentConfig exp;
    try {
        exp = config::load_experiment(file);
        const Json extra = flags.build();
        for (auto& job : exp.jobs) {
            if (!job.overrides.is_object()) job.overrides = Json::object();
            for (auto it = extra.begin(); it != extra.end(); ++it) job.overrides[it.key()] = it.value();
        }
        if (continue_on_error) exp.continue_on_error = true;
        config::resolve_jobs(exp);
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return kValidation;
    }
    try {
        const auto result = pipeline::execute_experiment(exp, pipeline::builtin_registries());
        for (const auto& r : result.reports) print_report(out, r);
        if (!result.ok()) {
            for (auto i : result.failed_jobs) {
                const auto& r = result.reports[i];
                print_error(err, "StageFailure", "job " + std::to_string(i) + " failed in " + r.failed_stage + ": " + r.error);
            }
            return kStageFailure;
        }
        return kOk;
    } catch (const StageFailure& e) {
        print_error(err, "StageFailure", e.what());
        return kStageFailure;
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return exit_for(e);
    }
}

int cmd_validate(const std::string& job, const std::string& experiment, const OverrideFlags& flags, std::ostream& out,
                 std::ostream& err) {
    try {
        const auto registries = pipeline::builtin_registries();
        auto check = [&](const config::JobConfig& cfg) {
            auto reg = registries;
            pipeline::register_config_backends(reg, cfg);
            pipeline::check_components(reg, cfg);
            out << "ok: " << pipeline::run_id(cfg) << '\n';
        };
        if (!job.empty()) check(config::load_config(job, flags.build()));
        if (!experiment.empty()) {
            for (const auto& cfg : config::resolve_jobs(config::load_experiment(experiment))) check(cfg);
        }
        return kOk;
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return kValidation;
    }
}

/// Linear interpolation between closest ranks.
double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

int cmd_manifest_inspect(const std::string& file, bool stats, std::ostream& out, std::ostream& err) {
    manifest::IngestResult ingest;
    try {
        if (!fs::is_regular_file(file)) fail(Errc::SourceUnreadable, "cannot read " + file);
        ingest = manifest::read_manifest_csv(file);
        if (!ingest.rejects.empty()) {
            fail(Errc::SchemaError, std::to_string(ingest.rejects.size()) + " malformed row(s), first: " +
                                        ingest.rejects.front().sample_id + " (" + ingest.rejects.front().reason + ")");
        }
    } catch (const Error& e) {
        print_error(err, to_string(e.code()), e.what());
        return kValidation;
    }
    const auto& records = ingest.manifest.records;
    out << "records: " << records.size() << '\n';
    if (!stats) return kOk;

    std::map<std::string, std::size_t> splits;
    std::map<std::string, std::size_t> missing{{"bbox", 0},   {"end_s", 0},     {"signer_id", 0},
                                               {"split", 0},  {"start_s", 0},   {"text", 0}};
    std::vector<double> durations;
    for (const auto& r : records) {
        ++splits[r.split.value_or("(none)")];
        if (!r.start_s) ++missing["start_s"];
        if (!r.end_s) ++missing["end_s"];
        if (!r.text || r.text->empty()) ++missing["text"];
        if (!r.split) ++missing["split"];
        if (!r.signer_id) ++missing["signer_id"];
        if (!r.bbox) ++missing["bbox"];
        if (auto d = r.duration()) durations.push_back(*d);
    }
    std::sort(durations.begin(), durations.end());
    out << "splits:\n";
    for (const auto& [name, n] : splits) out << "  " << name << ": " << n << '\n';
    out << "duration_s quartiles: min=" << format_real(quantile(durations, 0.0))
        << " q1=" << format_real(quantile(durations, 0.25)) << " median=" << format_real(quantile(durations, 0.5))
        << " q3=" << format_real(quantile(durations, 0.75)) << " max=" << format_real(quantile(durations, 1.0)) << '\n';
    out << "missing:\n";
    for (const auto& [name, n] : missing) out << "  " << name << ": " << n << '\n';
    return kOk;
}

int cmd_shards_verify(const std::string& dir, std::ostream& out, std::ostream& err) {
    fs::path shard_dir = dir;
    if (!fs::exists(shard_dir / shards::kIndexFile) && fs::exists(shard_dir / "shards" / shards::kIndexFile)) {
        shard_dir /= "shards";
    }
    const auto result = shards::verify_shards(shard_dir);
    if (result.ok()) {
        out << "ok: " << result.samples << " samples\n";
        return kOk;
    }
    for (const auto& p : result.problems) out << "  " << p << '\n';
    print_error(err, "MalformedShard", std::to_string(result.problems.size()) + " discrepancy(ies) in " + shard_dir.string());
    return kShardMismatch;
}

int cmd_registry_list(const std::string& kind, std::ostream& out, std::ostream& err) {
    const auto registries = pipeline::builtin_registries();
    bool matched = kind.empty();
    for (auto k : registry::kAllKinds) {
        if (!kind.empty() && registry::to_string(k) != kind) continue;
        matched = true;
        out << registry::to_string(k) << ":";
        for (const auto& name : registries.list(k)) out << ' ' << name;
        out << '\n';
    }
    if (!matched) {
        print_error(err, "UnknownName", "unknown registry kind '" + kind + "'");
        return kValidation;
    }
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"signpipe: config-driven sign-language corpus preprocessing", "signpipe"};
    app.require_subcommand(1);

    OverrideFlags flags;
    auto add_override_flags = [&](CLI::App* sub) {
        sub->add_option("--set", flags.sets, "Override a config field (dotted.path=value); repeatable");
        sub->add_option("--workers", flags.workers, "Worker count")->check(CLI::PositiveNumber);
        sub->add_flag("--no-resume", flags.no_resume, "Re-execute every stage");
        sub->add_option("--output-root", flags.output_root, "Output root (default: $SIGNPIPE_OUTPUT_ROOT, then config)");
    };

    std::string job, file, dir, kind, experiment_file;
    bool continue_on_error = false, stats = false;

    auto* run = app.add_subcommand("run", "Execute one job");
    run->add_option("--job", job, "Job config (YAML)")->required();
    add_override_flags(run);

    auto* exp = app.add_subcommand("experiment", "Execute an experiment's job list");
    exp->add_option("--file", file, "Experiment file (YAML)")->required();
    exp->add_flag("--continue-on-error", continue_on_error, "Keep going after a failed job");
    add_override_flags(exp);

    auto* validate = app.add_subcommand("validate", "Check a job or experiment without running it");
    validate->add_option("--job", job, "Job config (YAML)");
    validate->add_option("--experiment", experiment_file, "Experiment file (YAML)");
    validate->add_option("--set", flags.sets, "Override a config field (dotted.path=value); repeatable");

    auto* inspect = app.add_subcommand("manifest-inspect", "Summarize a manifest CSV");
    inspect->add_option("--file", file, "manifest.csv")->required();
    inspect->add_flag("--stats", stats, "Split histogram, duration quartiles, missing-field counts");

    auto* verify = app.add_subcommand("shards-verify", "Re-read shards and check them against shards.json");
    verify->add_option("--dir", dir, "Shard directory or run directory")->required();

    auto* list = app.add_subcommand("registry-list", "List registered components");
    list->add_option("--kind", kind, "Only this kind");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        print_error(err, "Usage", e.what());
        return kValidation;
    }

    if (run->parsed()) return cmd_run(job, flags, out, err);
    if (exp->parsed()) return cmd_experiment(file, continue_on_error, flags, out, err);
    if (validate->parsed()) {
        if (job.empty() && experiment_file.empty()) {
            print_error(err, "Usage", "validate needs --job or --experiment");
            return kValidation;
        }
        return cmd_validate(job, experiment_file, flags, out, err);
    }
    if (inspect->parsed()) return cmd_manifest_inspect(file, stats, out, err);
    if (verify->parsed()) return cmd_shards_verify(dir, out, err);
    if (list->parsed()) return cmd_registry_list(kind, out, err);
    return kValidation;
}

}  // namespace signpipe::cli
