// handjog: data generation, training, compression, simulation, serving and
// benchmarking from one entry point. Exit codes: 0 ok, 1 bad input or usage,
// 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "handjog/bench.hpp"
#include "handjog/compress.hpp"
#include "handjog/config.hpp"
#include "handjog/error.hpp"
#include "handjog/manifest.hpp"
#include "handjog/scenario.hpp"
#include "handjog/server.hpp"
#include "handjog/tinynet.hpp"
#include "handjog/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace handjog;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    bool quiet = false;
    std::string manifest_path;
};

class Run {
public:
    Run(const Globals& g, std::string command, int argc, char** argv) : g_(g) {
        manifest_.command = std::move(command);
        for (int i = 0; i < argc; ++i) manifest_.argv.emplace_back(argv[i]);
        start_ = std::chrono::steady_clock::now();
        cfg_ = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
        if (g.seed) {
            cfg_.data.seed = *g.seed;
            cfg_.train.seed = *g.seed;
        }
    }

    AppConfig& cfg() { return cfg_; }
    void input(const std::string& role, const fs::path& p) { manifest_.inputs.push_back(record_file(role, p)); }
    void output(const std::string& role, const fs::path& p) { manifest_.outputs.push_back(record_file(role, p)); }
    void seed(const std::string& name, std::uint64_t v) { manifest_.seeds[name] = v; }

    void info(const std::string& msg) const {
        if (!g_.quiet) std::cerr << msg << '\n';
    }
    /// Machine-readable result on stdout (suppressed by --quiet).
    void report(const json& j) const {
        if (!g_.quiet) std::cout << j.dump(2) << '\n';
    }

    void finish(int code) {
        manifest_.exit_code = code;
        manifest_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        manifest_.config = config_snapshot(cfg_);
        fs::path where;
        if (!g_.manifest_path.empty()) where = g_.manifest_path;
        else if (!manifest_.outputs.empty()) where = manifest_.outputs.front().path.string() + ".manifest.json";
        else where = manifest_.command + ".manifest.json";
        manifest_.write(where);
    }

private:
    const Globals& g_;
    AppConfig cfg_;
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

json confusion_json(const EvalReport& r) {
    json rows = json::array();
    for (const auto& row : r.confusion) rows.push_back(row);
    return rows;
}

/// Model for commands where one is optional: synthetic data, default
/// training, quantization against the training split.
std::shared_ptr<const Classifier> build_default_classifier(Run& run) {
    run.info("no model given: training the default model on synthetic data");
    const AppConfig& c = run.cfg();
    const Dataset data = generate_synthetic_dataset(c.data);
    const DatasetSplit split = split_dataset(data, c.val_per_class, c.data.seed);
    TrainResult trained = train(split.train, split.val, c.spec, c.train);
    MlpParams params = c.prune.target_sparsity > 0 ? prune_magnitude(trained.params, c.prune) : trained.params;
    run.seed("data", c.data.seed);
    run.seed("train", c.train.seed);
    return std::make_shared<Classifier>(quantize(params, split.train));
}

std::shared_ptr<const Classifier> classifier_for(Run& run, const std::string& model) {
    if (model.empty()) return build_default_classifier(run);
    run.input("model", model);
    return load_classifier(model);
}

int cmd_gen_data(Run& run, const std::optional<std::size_t>& per_class, const std::optional<double>& sigma,
                 const std::string& templates, const std::string& out) {
    AppConfig& c = run.cfg();
    if (per_class) c.data.per_class = *per_class;
    if (sigma) c.data.jitter_sigma = *sigma;
    c.validate();
    TemplateSet set = default_templates();
    if (!templates.empty()) {
        set = load_templates(templates);
        run.input("templates", templates);
    }
    const Dataset data = generate_synthetic_dataset(c.data, set);
    write_dataset(data, out);
    run.seed("data", c.data.seed);
    run.output("dataset", out);
    run.report({{"rows", data.size()}, {"classes", data.class_count}, {"templates", set.version}, {"output", out}});
    return 0;
}

int cmd_train(Run& run, const std::string& in, const std::optional<std::string>& spec, const std::string& out,
              std::string history_path) {
    AppConfig& c = run.cfg();
    if (spec) c.spec = parse_layer_spec(*spec);
    c.validate();
    const Dataset data = read_dataset(in, c.spec.output_width());
    run.input("dataset", in);
    const DatasetSplit split = split_dataset(data, c.val_per_class, c.train.seed);
    run.info("training " + format_layer_spec(c.spec) + " on " + std::to_string(split.train.size()) + " samples, " +
             std::to_string(c.train.epochs) + " epochs");
    TrainResult r = train(split.train, split.val, c.spec, c.train);
    MlpParams params = r.params;
    if (c.prune.target_sparsity > 0.0) params = prune_magnitude(params, c.prune);
    save_float_model(params, out);
    const EvalReport val = evaluate(params, split.val);

    json hist = json::array();
    for (const auto& e : r.history) {
        hist.push_back({{"train_loss", e.train_loss},
                        {"train_accuracy", e.train_accuracy},
                        {"val_loss", e.val_loss},
                        {"val_accuracy", e.val_accuracy}});
    }
    json doc = {{"spec", format_layer_spec(c.spec)},
                {"params", param_count(c.spec)},
                {"seed", c.train.seed},
                {"train_size", split.train.size()},
                {"val_size", split.val.size()},
                {"prune_sparsity", c.prune.target_sparsity},
                {"history", hist},
                {"val_accuracy", val.accuracy},
                {"confusion", confusion_json(val)}};
    if (history_path.empty()) history_path = out + ".history.json";
    {
        std::ofstream h(history_path, std::ios::trunc);
        if (!h) throw RuntimeFailure("cannot write " + history_path);
        h << doc.dump(2) << '\n';
    }
    run.seed("train", c.train.seed);
    run.output("model", out);
    run.output("history", history_path);
    run.report({{"model", out},
                {"params", param_count(c.spec)},
                {"bytes", fs::file_size(out)},
                {"val_accuracy", val.accuracy},
                {"confusion", confusion_json(val)}});
    return 0;
}

int cmd_eval(Run& run, const std::string& model, const std::string& in, const std::string& split_mode) {
    AppConfig& c = run.cfg();
    c.validate();
    run.input("model", model);
    run.input("dataset", in);
    Dataset data = read_dataset(in);
    if (split_mode == "val") data = split_dataset(data, c.val_per_class, c.train.seed).val;
    const EvalReport r = model_kind(model) == ModelKind::float_model ? evaluate(load_float_model(model), data)
                                                                     : evaluate_quantized(load_quantized_model(model), data);
    run.report({{"accuracy", r.accuracy}, {"correct", r.correct}, {"total", r.total}, {"confusion", confusion_json(r)}});
    return 0;
}

int cmd_quantize(Run& run, const std::string& in, const std::string& calib, const std::string& out,
                 const std::optional<double>& prune) {
    AppConfig& c = run.cfg();
    if (prune) c.prune.target_sparsity = *prune;
    c.validate();
    MlpParams params = load_float_model(in);
    run.input("model", in);
    const Dataset data = read_dataset(calib, params.spec.output_width());
    run.input("calibration", calib);
    if (c.prune.target_sparsity > 0.0) params = prune_magnitude(params, c.prune);
    const QuantizedModel q = quantize(params, data);
    save_quantized_model(q, out);
    run.output("quantized_model", out);
    const std::size_t size = model_size_bytes(out);
    const double agree = agreement_rate(params, q, data);
    run.report({{"output", out},
                {"bytes", size},
                {"budget_bytes", kQuantizedSizeBudget},
                {"within_budget", size <= kQuantizedSizeBudget},
                {"weight_sparsity", weight_sparsity(params)},
                {"agreement", agree},
                {"float_accuracy", evaluate(params, data).accuracy},
                {"quantized_accuracy", evaluate_quantized(q, data).accuracy}});
    return 0;
}

int cmd_agree(Run& run, const std::string& float_model, const std::string& quant_model, const std::string& in,
              double min_rate) {
    run.input("float_model", float_model);
    run.input("quantized_model", quant_model);
    run.input("dataset", in);
    const MlpParams p = load_float_model(float_model);
    const QuantizedModel q = load_quantized_model(quant_model);
    const Dataset data = read_dataset(in, p.spec.output_width());
    const double rate = agreement_rate(p, q, data);
    run.report({{"agreement", rate}, {"samples", data.size()}, {"min", min_rate}});
    if (rate < min_rate) {
        run.info("agreement " + std::to_string(rate) + " below " + std::to_string(min_rate));
        return 2;
    }
    return 0;
}

int cmd_sim(Run& run, const std::string& script_path, const std::string& builtin, const std::string& model,
            const std::string& input_mode, const std::string& log_path) {
    AppConfig& c = run.cfg();
    c.validate();
    ScenarioScript script;
    if (!script_path.empty()) {
        script = load_scenario(script_path);
        run.input("scenario", script_path);
    } else if (builtin == "pick-place") {
        script = canonical_pick_place();
    } else if (builtin == "limit-seek") {
        script = limit_seek();
    } else {
        throw ValidationError("unknown built-in scenario '" + builtin + "' (pick-place, limit-seek)");
    }
    if (input_mode == "frames") script.input = InputMode::frames;
    else if (input_mode == "holds") script.input = InputMode::holds;
    else if (!input_mode.empty()) throw ValidationError("--input must be frames or holds");

    std::shared_ptr<const Classifier> classifier;
    if (script.input == InputMode::frames) classifier = classifier_for(run, model);

    ScenarioOptions opt;
    opt.pipeline = c.pipeline;
    opt.seed = c.data.seed;
    opt.jitter_sigma = c.jitter_sigma_live;
    opt.input_period_ms = c.input_period_ms;
    run.seed("stream", opt.seed);
    const ScenarioResult r = run_scenario(script, classifier, opt);

    if (!log_path.empty()) {
        std::ofstream out(log_path, std::ios::trunc);
        if (!out) throw RuntimeFailure("cannot write " + log_path);
        for (const auto& l : r.log.lines) out << l << '\n';
        out.close();
        run.output("log", log_path);
    }
    const auto& v = r.verdict;
    run.report({{"scenario", script.name},
                {"verdict", std::string(to_string(v.status))},
                {"goals", script.goals.size()},
                {"goals_reached", v.goals_reached},
                {"states", r.log.states.size()},
                {"safety_events", v.safety_events},
                {"joint_limit_events", v.joint_limit_events},
                {"rejections", v.rejections},
                {"audit", {{"states", r.audit.states_checked},
                           {"joint_violations", r.audit.joint_violations},
                           {"speed_violations", r.audit.speed_violations}}},
                {"notes", v.notes}});
    return (v.status == VerdictStatus::failure || !r.audit.ok()) ? 2 : 0;
}

int cmd_serve(Run& run, int port, const std::string& model, const std::string& console, const std::string& bind,
              double duration) {
    AppConfig& c = run.cfg();
    c.validate();
    if (port < 0 || port > 65535) throw ValidationError("--port must be in [0, 65535]");
    auto classifier = classifier_for(run, model);
    Runtime rt(classifier, c.pipeline);
    ServerConfig sc;
    sc.port = static_cast<std::uint16_t>(port);
    sc.bind_address = bind;
    if (!console.empty()) sc.console_dir = console;
    Server server(rt, sc);
    rt.start();
    server.start();
    // The bound port on stdout first, so scripts can use --port 0.
    std::cout << json{{"listening", server.port()}, {"bind", bind}}.dump() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration);
    while (!g_stop && (duration <= 0.0 || std::chrono::steady_clock::now() < until)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    rt.stop();
    run.info("server stopped");
    return 0;
}

int cmd_bench(Run& run, const std::string& model, const std::optional<double>& seconds, double fps,
              std::size_t frames) {
    AppConfig& c = run.cfg();
    if (seconds) c.bench_seconds = *seconds;
    c.validate();
    auto classifier = classifier_for(run, model);
    const ClassifyBench cb = bench_classification(*classifier, frames, c.data.seed, c.pipeline.normalize);
    PipelineBenchOptions po;
    po.seconds = c.bench_seconds;
    po.fps = fps;
    po.seed = c.data.seed;
    po.jitter_sigma = c.jitter_sigma_live;
    run.info("streaming " + std::to_string(fps) + " fps for " + std::to_string(po.seconds) + " s");
    const PipelineBench pb = bench_pipeline(classifier, c.pipeline, po);
    run.seed("stream", po.seed);

    json stages = json::object();
    for (std::size_t s = 0; s < kStageCount; ++s) {
        const auto& st = pb.latency.stages[s];
        stages[std::string(stage_name(static_cast<Stage>(s)))] = {
            {"samples", st.samples}, {"p50_ms", st.p50_ms}, {"p99_ms", st.p99_ms}, {"max_ms", st.max_ms}};
    }
    const double f2j = pb.latency[Stage::frame_to_jog].p99_ms;
    run.report({{"quantized", classifier->quantized()},
                {"classify", {{"frames", cb.frames}, {"p50_ms", cb.p50_ms}, {"p99_ms", cb.p99_ms}, {"max_ms", cb.max_ms}}},
                {"pipeline", {{"frames_sent", pb.frames_sent}, {"window", pb.latency.window}, {"stale", pb.latency.stale},
                              {"stages", stages}}},
                {"budgets", {{"classify_p99_lt_5ms", cb.p99_ms < 5.0}, {"frame_to_jog_p99_lt_10ms", f2j < 10.0}}}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gesture-driven robot jogging: data, training, compression, simulation and serving"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for data generation, splitting, init and shuffling");
    app.add_option("--config", g.config_path, "key = value file overriding defaults")->check(CLI::ExistingFile);
    app.add_flag("--quiet", g.quiet, "Only errors on stderr, no report on stdout");
    app.add_option("--manifest", g.manifest_path, "Where to write the run manifest");

    std::optional<std::size_t> per_class;
    std::optional<double> sigma;
    std::string templates, out, in, history, model, calib, float_model, quant_model, split_mode = "all";
    std::optional<std::string> spec;
    std::optional<double> prune, seconds;
    double min_rate = 0.0, fps = 30.0, duration = 0.0;
    std::size_t bench_frames = 1000;
    std::string script, builtin = "pick-place", input_mode, log_path, console, bind = "127.0.0.1";
    bool with_console = false;
    int port = 8765;

    auto* gen = app.add_subcommand("gen-data", "Synthetic landmark dataset from the hand templates");
    gen->add_option("--per-class", per_class, "Samples per gesture");
    gen->add_option("--sigma", sigma, "Per-coordinate jitter standard deviation");
    gen->add_option("--templates", templates, "Template file instead of the built-in set")->check(CLI::ExistingFile);
    gen->add_option("-o,--output", out, "CSV path")->required();

    auto* tr = app.add_subcommand("train", "Train the MLP (150/50 per-class split by default)");
    tr->add_option("-i,--input", in, "Dataset CSV")->required()->check(CLI::ExistingFile);
    tr->add_option("--spec", spec, "Layer widths, e.g. 42,20,10,8");
    tr->add_option("-o,--output", out, "Float model path")->required();
    tr->add_option("--history", history, "History JSON path (default <output>.history.json)");

    auto* ev = app.add_subcommand("eval", "Accuracy and confusion matrix of a float or quantized model");
    ev->add_option("-m,--model", model, "Model file")->required()->check(CLI::ExistingFile);
    ev->add_option("-i,--input", in, "Dataset CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--split", split_mode, "all or val")->check(CLI::IsMember({"all", "val"}));

    auto* qz = app.add_subcommand("quantize", "Prune (optional) and quantize a float model to int8");
    qz->add_option("-i,--input", in, "Float model")->required()->check(CLI::ExistingFile);
    qz->add_option("--calib", calib, "Calibration dataset CSV")->required()->check(CLI::ExistingFile);
    qz->add_option("-o,--output", out, "Quantized model path")->required();
    qz->add_option("--prune", prune, "Weight sparsity applied before quantizing");

    auto* ag = app.add_subcommand("agree", "Argmax agreement between a float and a quantized model");
    ag->add_option("--float", float_model, "Float model")->required()->check(CLI::ExistingFile);
    ag->add_option("--quant", quant_model, "Quantized model")->required()->check(CLI::ExistingFile);
    ag->add_option("-i,--input", in, "Dataset CSV")->required()->check(CLI::ExistingFile);
    ag->add_option("--min", min_rate, "Exit 2 when agreement is below this");

    auto* sm = app.add_subcommand("sim", "Headless scripted scenario on a virtual clock");
    sm->add_option("--script", script, "Scenario file")->check(CLI::ExistingFile);
    sm->add_option("--builtin", builtin, "pick-place or limit-seek");
    sm->add_option("-m,--model", model, "Model for frame input (trained on the fly if omitted)");
    sm->add_option("--input", input_mode, "Override the script input: frames or holds");
    sm->add_option("--log", log_path, "Write every logged message as NDJSON");

    auto* sv = app.add_subcommand("serve", "Run the pipeline behind the line protocol");
    sv->add_option("--port", port, "TCP port (0 picks a free one)");
    sv->add_option("-m,--model", model, "Float or quantized model (trained on the fly if omitted)");
    sv->add_flag("--console", with_console, "Serve the bundled console page on the same port");
    sv->add_option("--console-dir", console, "Serve console assets from this directory instead")
        ->check(CLI::ExistingDirectory);
    sv->add_option("--bind", bind, "Listen address");
    sv->add_option("--duration", duration, "Stop after this many seconds (0 = until signalled)");

    auto* bn = app.add_subcommand("bench", "Classification and pipeline latency at a synthetic frame rate");
    bn->add_option("-m,--model", model, "Model (trained on the fly if omitted)");
    bn->add_option("--seconds", seconds, "Streaming duration");
    bn->add_option("--fps", fps, "Frame rate");
    bn->add_option("--frames", bench_frames, "Frames for the single-frame timing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::optional<Run> run;
    int code = 0;
    try {
        run.emplace(g, sub->get_name(), argc, argv);
        const std::string name = sub->get_name();
        if (name == "gen-data") code = cmd_gen_data(*run, per_class, sigma, templates, out);
        else if (name == "train") code = cmd_train(*run, in, spec, out, history);
        else if (name == "eval") code = cmd_eval(*run, model, in, split_mode);
        else if (name == "quantize") code = cmd_quantize(*run, in, calib, out, prune);
        else if (name == "agree") code = cmd_agree(*run, float_model, quant_model, in, min_rate);
        else if (name == "sim") code = cmd_sim(*run, script, builtin, model, input_mode, log_path);
        else if (name == "serve") {
            if (with_console && console.empty()) console = std::string(HANDJOG_ASSET_DIR) + "/console";
            code = cmd_serve(*run, port, model, console, bind, duration);
        }
        else if (name == "bench") code = cmd_bench(*run, model, seconds, fps, bench_frames);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        code = 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        code = 2;
    }
    if (run) {
        try {
            run->finish(code);
        } catch (const std::exception& e) {
            std::cerr << "failure: " << e.what() << '\n';
            if (code == 0) code = 2;
        }
    }
    return code;
}
