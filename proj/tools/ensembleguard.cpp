#include "ensembleguard/config.hpp"
#include "ensembleguard/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace eg = ensembleguard;

namespace {

struct Common {
    std::string config;
    std::string profile;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "run configuration file (key = value lines)")->required();
    cmd->add_option("--profile", c.profile, "desk or paper; overrides the file")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", c.seed, "run seed; overrides the file");
    cmd->add_option("--out", c.out, "output directory; overrides the file");
}

eg::RunConfig resolve(const Common& c) {
    eg::ConfigOverrides ov;
    if (!c.profile.empty()) ov.profile = eg::parse_profile(c.profile);
    ov.seed = c.seed;
    if (!c.out.empty()) ov.out = c.out;
    return eg::load_config(c.config, ov);
}

void print_reports(const eg::EvaluateResult& r) { std::cout << eg::summary_table(r.reports); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stacked intrusion-detection ensemble: train, evaluate and explain"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(eg::toolkit_version));

    Common c;
    std::vector<std::string> explain_data;
    auto* ingest = app.add_subcommand("ingest", "parse the input files and write a summary");
    auto* train = app.add_subcommand("train", "preprocess, train base models, stack, train and distill the meta-model");
    auto* evaluate = app.add_subcommand("evaluate", "score every model of the bundle on the test records");
    auto* explain = app.add_subcommand("explain", "attack percentages and decision rules");
    auto* all = app.add_subcommand("run-all", "ingest, train, evaluate and explain in one go");
    for (auto* cmd : {ingest, train, evaluate, explain, all}) add_common(cmd, c);
    explain->add_option("--data", explain_data, "raw data files to explain instead of the test records");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto cfg = resolve(c);
        if (ingest->parsed()) {
            std::cout << eg::cmd_ingest(cfg).summary;
        } else if (train->parsed()) {
            const auto r = eg::cmd_train(cfg);
            std::cout << "bundle written to " << (cfg.out / "bundle").string() << " (" << r.pipeline.registry.size()
                      << " base models, " << r.stack.features.cols() << " meta-features)\n";
        } else if (evaluate->parsed()) {
            print_reports(eg::cmd_evaluate(cfg));
        } else if (explain->parsed()) {
            std::vector<std::filesystem::path> paths(explain_data.begin(), explain_data.end());
            const auto r = eg::cmd_explain(cfg, paths);
            std::cout << eg::render_ratios(r.ratios, eg::ReportFormat::Plain);
            std::cout << r.rules.rules.size() << " rules, fidelity " << eg::text::fixed(r.fidelity, 3) << "\n";
        } else if (all->parsed()) {
            const auto r = eg::run_all(cfg);
            print_reports(r.evaluation);
            std::cout << "manifest digest " << r.manifest["digest"].get<std::string>() << "\n";
        }
    } catch (const eg::UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
