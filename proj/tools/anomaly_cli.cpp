// Command-line front end: train, eval, generate, synth, report.
#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "anomaly/cli/commands.hpp"

namespace {

using namespace anomaly;
using namespace anomaly::cli;

/// `--<key>` flag storage for every schema key on one subcommand.
struct KeyFlags {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app, std::initializer_list<std::string_view> skip = {}) {
        for (const auto& k : kSchema) {
            if (std::find(skip.begin(), skip.end(), k.key) != skip.end()) continue;
            const std::string key(k.key);
            std::string help(k.help);
            if (!k.fallback.empty()) help += " [" + std::string(k.fallback) + "]";
            options[key] = app->add_option("--" + key, values[key], help)->group(std::string(k.section));
        }
    }

    void apply(ConfigValues& v) const {
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) v.set(key, values.at(key), "command line");
        }
    }
};

void print_warnings(const ConfigValues& v) {
    for (const auto& w : v.warnings) std::cerr << "warning: " << w << '\n';
}

RunConfig fresh_config(const std::string& config_file, const KeyFlags& flags, const char* default_model = nullptr) {
    ConfigValues v;
    if (!config_file.empty()) parse_config_file(config_file, v);
    flags.apply(v);
    if (default_model && !v.values.contains("model")) v.values["model"] = default_model;
    print_warnings(v);
    return resolve_config(v);
}

RunConfig existing_run(const std::string& run_dir, const std::string& config_file, const KeyFlags& flags) {
    ConfigValues over;
    if (!config_file.empty()) parse_config_file(config_file, over);
    flags.apply(over);
    auto rc = load_run_config(run_dir, over);
    print_warnings(rc.resolved);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image anomaly detection: autoencoder, CNN and GAN pipelines"};
    app.require_subcommand(1);

    std::string config_file;
    std::string run_dir;
    std::vector<std::string> report_runs;
    std::string report_out = "report.csv";

    auto* train = app.add_subcommand("train", "train a model and save it into the run directory");
    train->add_option("--config", config_file, "configuration file");
    KeyFlags train_flags;
    train_flags.attach(train);

    auto* eval = app.add_subcommand("eval", "score the test split of a trained run");
    eval->add_option("run", run_dir, "run directory written by train")->required();
    eval->add_option("--config", config_file, "extra configuration applied over the run's own");
    KeyFlags eval_flags;
    eval_flags.attach(eval, {"out"});

    auto* generate = app.add_subcommand("generate", "sample images from a trained dcgan run");
    generate->add_option("run", run_dir, "run directory written by train")->required();
    KeyFlags gen_flags;
    gen_flags.attach(generate, {"out"});

    auto* synth = app.add_subcommand("synth", "write the synthetic dataset as images plus a manifest");
    synth->add_option("--config", config_file, "configuration file");
    KeyFlags synth_flags;
    synth_flags.attach(synth);

    auto* report = app.add_subcommand("report", "tabulate the evaluations of several runs");
    report->add_option("runs", report_runs, "run directories")->required();
    report->add_option("--out", report_out, "CSV file to write")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorClass::config);
    }

    try {
        if (*train) {
            const auto rc = fresh_config(config_file, train_flags);
            std::cout << "run directory: " << rc.out.string() << '\n';
            cmd_train(rc, std::cout);
        } else if (*eval) {
            cmd_eval(existing_run(run_dir, config_file, eval_flags), std::cout);
        } else if (*generate) {
            cmd_generate(existing_run(run_dir, "", gen_flags), std::cout);
        } else if (*synth) {
            cmd_synth(fresh_config(config_file, synth_flags, "kd-cae"), std::cout);
        } else if (*report) {
            std::vector<fs::path> runs(report_runs.begin(), report_runs.end());
            cmd_report(runs, report_out, std::cerr);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.error_class());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorClass::data);
    }
    return 0;
}
