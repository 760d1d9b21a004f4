// nilpath: lift paths, run experiments, check covariance models, sample.
//
// Exit codes: 0 ok, 1 internal failure, 2 parse error, 3 precondition
// violated, 4 unknown experiment kind, 5 resource cap exceeded,
// 6 invalid covariance model. JSON goes to stdout, messages to stderr.

#include "nilpath/nilpath.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#ifndef NILPATH_VERSION
#define NILPATH_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const nilpath::Error& e) {
    if (dynamic_cast<const nilpath::ParseError*>(&e)) return 2;
    if (dynamic_cast<const nilpath::UnknownKindError*>(&e)) return 4;
    if (dynamic_cast<const nilpath::ResourceError*>(&e)) return 5;
    if (dynamic_cast<const nilpath::ModelError*>(&e)) return 6;
    if (dynamic_cast<const nilpath::DomainError*>(&e) || dynamic_cast<const nilpath::ShapeError*>(&e) ||
        dynamic_cast<const nilpath::GridError*>(&e))
        return 3;
    return 1;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw nilpath::ParseError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        // byte offsets are more useful than nothing; count lines up to them
        std::ifstream again(path);
        std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(text.size(), e.byte); ++i) line += text[i] == '\n';
        throw nilpath::ParseError(path.string() + ": " + e.what(), line);
    }
}

/// Inline JSON when the text starts with '{', otherwise a file path.
json model_spec(const std::string& text, fs::path& base_dir) {
    if (!text.empty() && text.front() == '{') {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw nilpath::ParseError(std::string("model spec: ") + e.what(), 1);
        }
    }
    base_dir = fs::path(text).parent_path();
    return read_json_file(text);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw nilpath::Error("cannot write " + path);
    out << text;
}

unsigned resolve_threads(int flag) { return flag > 0 ? static_cast<unsigned>(flag) : nilpath::default_thread_count(); }

int cmd_lift(const std::string& input, int depth, std::optional<int> m, const std::string& out) {
    if (depth < 1) throw nilpath::DomainError("lift depth N must be at least 1, got " + std::to_string(depth));
    std::ifstream in(input);
    if (!in) throw nilpath::ParseError("cannot open " + input);
    const nilpath::SampledPath path = nilpath::read_sampled_path_csv(in);
    const nilpath::GroupPath lifted =
        m ? nilpath::lift_dyadic(path, *m, depth) : nilpath::lift_piecewise_linear(path, depth);
    write_text(out, nilpath::canonical_dump(json(lifted)) + "\n");
    return 0;
}

int cmd_experiment(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_flag,
                   int threads) {
    json raw = read_json_file(config_path);
    if (seed && raw.is_object()) raw["seed"] = *seed;
    nilpath::ExperimentConfig config = nilpath::parse_config(raw, fs::path(config_path).parent_path());
    if (!out_flag.empty()) config.output = out_flag;
    if (config.output.empty()) config.output = config.name + ".csv";
    config.threads = resolve_threads(threads);

    nilpath::RunManifest manifest;
    manifest.started = nilpath::utc_timestamp();
    std::cerr << "running " << config.kind << " \"" << config.name << "\" with " << config.n_samples
              << " samples on " << config.threads << " thread(s)\n";
    const nilpath::ExperimentResult result = nilpath::run_experiment(config);

    std::ostringstream csv;
    nilpath::write_csv(csv, result.table);
    write_text(config.output, csv.str());

    const json config_json = config;
    manifest.config = config_json;
    manifest.config_hash = nilpath::config_hash(config_json);
    manifest.seed = config.seed;
    manifest.tool_version = NILPATH_VERSION;
    manifest.finished = nilpath::utc_timestamp();
    manifest.outputs.push_back({config.output, nilpath::sha256_hex(csv.str())});
    manifest.summary = result.summary;
    const std::string manifest_path = config.output + ".manifest.json";
    write_text(manifest_path, json(manifest).dump(2) + "\n");
    std::cerr << "wrote " << config.output << " and " << manifest_path << "\n";
    std::cout << nilpath::canonical_dump(json(manifest)) << "\n";
    return 0;
}

int cmd_check(const std::string& model_text, int level, std::optional<double> q) {
    fs::path base;
    const nilpath::CovarianceModel model = nilpath::model_from_json(model_spec(model_text, base), base);
    json report = nilpath::check_covariance_conditions(model, level);
    report["model"] = model.name();
    if (q) {
        // kernel section at time 1, normalized to unit Cameron-Martin norm
        const nilpath::CMElement section(model, 1, {1.0}, {1.0});
        const auto h = section.scaled(1.0 / nilpath::cm_norm(section));
        report["q_variation_embedding"] = nilpath::q_variation_embedding_report(h, *q, std::min(level, 10));
        report["holder_embedding"] = nilpath::holder_embedding_report(h, std::min(level, 10));
    }
    std::cout << nilpath::canonical_dump(report) << "\n";
    return 0;
}

int cmd_sample(const std::string& model_text, int dim, int level, std::uint64_t seed, std::uint64_t stream,
               const std::string& out) {
    fs::path base;
    const nilpath::CovarianceModel model = nilpath::model_from_json(model_spec(model_text, base), base);
    const auto sample = nilpath::sample_gaussian_path(model, dim, level, seed, stream);
    std::ostringstream csv;
    nilpath::write_sampled_path_csv(csv, sample.path);
    write_text(out, csv.str());
    if (!out.empty() && out != "-")
        std::cout << nilpath::canonical_dump(json{{"model", sample.model_name},
                                                  {"level", sample.level},
                                                  {"seed", sample.seed},
                                                  {"stream", sample.stream},
                                                  {"output", out},
                                                  {"sha256", nilpath::sha256_hex(csv.str())}})
                  << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lifted Gaussian paths: signatures, metrics and large-deviation experiments", "nilpath"};
    app.set_version_flag("--version", std::string(NILPATH_VERSION));
    app.require_subcommand(1);

    std::string lift_input, lift_out;
    int lift_depth = 2;
    std::optional<int> lift_m;
    auto* lift = app.add_subcommand("lift", "Lift a piecewise-linear path (CSV t,x1..xd) to G^N; prints JSON");
    lift->add_option("input", lift_input, "SampledPath CSV")->required();
    lift->add_option("-N,--depth", lift_depth, "Lift depth N");
    lift->add_option("-m,--dyadic", lift_m, "Lift the level-m dyadic approximation instead");
    lift->add_option("--out", lift_out, "Output JSON path (default stdout)");

    std::string exp_config, exp_out;
    std::optional<std::uint64_t> exp_seed;
    int exp_threads = 0;
    auto* experiment = app.add_subcommand("experiment", "Run an experiment config; writes CSV and manifest");
    experiment->add_option("config", exp_config, "Experiment config JSON")->required();
    experiment->add_option("--seed", exp_seed, "Override the config seed");
    experiment->add_option("--out", exp_out, "Override the output CSV path");
    experiment->add_option("--threads", exp_threads, "Worker threads (default NILPATH_THREADS or 1)");

    std::string check_model;
    int check_level = 8;
    std::optional<double> check_q;
    auto* check = app.add_subcommand("check", "Estimate the covariance condition constants; prints JSON");
    check->add_option("--model", check_model, "Model spec: inline JSON or a JSON file")->required();
    check->add_option("-M,--level", check_level, "Dyadic grid level");
    check->add_option("--q", check_q, "Also report the q-variation and Holder embedding ratios");

    std::string sample_model, sample_out;
    int sample_dim = 1, sample_level = 8;
    std::uint64_t sample_seed = 0, sample_stream = 0;
    auto* sample = app.add_subcommand("sample", "Sample a Gaussian path on a dyadic grid; writes CSV");
    sample->add_option("--model", sample_model, "Model spec: inline JSON or a JSON file")->required();
    sample->add_option("-d,--dim", sample_dim, "Path dimension");
    sample->add_option("-M,--level", sample_level, "Dyadic grid level");
    sample->add_option("--seed", sample_seed, "Seed");
    sample->add_option("--stream", sample_stream, "Substream index");
    sample->add_option("--out", sample_out, "Output CSV path (default stdout)");
    // accepted everywhere for uniformity; sampling is single-threaded
    int sample_threads = 0;
    sample->add_option("--threads", sample_threads, "Ignored");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*lift) return cmd_lift(lift_input, lift_depth, lift_m, lift_out);
        if (*experiment) return cmd_experiment(exp_config, exp_seed, exp_out, exp_threads);
        if (*check) return cmd_check(check_model, check_level, check_q);
        if (*sample) return cmd_sample(sample_model, sample_dim, sample_level, sample_seed, sample_stream, sample_out);
    } catch (const nilpath::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
