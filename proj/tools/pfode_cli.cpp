#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pfode/config.hpp"
#include "pfode/workflow.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::size_t jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string out = "pfode-work";
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "flat key = value config file");
    cmd->add_option("--jobs", f.jobs, "subject-level worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "override the config seed");
    cmd->add_option("--out", f.out, "work directory holding all stage outputs");
    cmd->add_option("--set", f.sets, "override a config key (key=value), repeatable");
}

pfode::RunConfig resolve(const CommonFlags& f) {
    pfode::RunConfig cfg = f.config.empty() ? pfode::RunConfig{} : pfode::load_config(f.config);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw pfode::ConfigError("--set expects key=value, got '" + kv + "'");
        pfode::set_key(cfg, pfode::detail::trim(kv.substr(0, eq)), pfode::detail::trim(kv.substr(eq + 1)));
    }
    if (f.seed) cfg.seed = *f.seed;
    pfode::validate(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic guided diffusion reconstruction and anomaly scoring on 3D volumes"};
    app.require_subcommand(1);
    CommonFlags flags;
    std::string sampler;
    std::vector<std::string> subjects;
    std::string render_input;

    auto* phantom = app.add_subcommand("phantom-gen", "generate the synthetic cohort");
    auto* tmpl = app.add_subcommand("template", "average healthy training latents into the guidance template");
    auto* fit = app.add_subcommand("fit-denoiser", "prepare the oracle or fit the local-linear denoiser");
    auto* recon = app.add_subcommand("reconstruct", "pseudo-healthy reconstruction of cohort subjects");
    auto* anomaly = app.add_subcommand("anomaly", "anomaly maps from reconstructions");
    auto* score = app.add_subcommand("score", "fit the classifier and compute anomaly scores");
    auto* evaluate = app.add_subcommand("evaluate", "regional correlations and group comparison");
    auto* render = app.add_subcommand("render", "export an axial slice of a volume as PGM");
    for (auto* cmd : {phantom, tmpl, fit, recon, anomaly, score, evaluate, render}) add_common(cmd, flags);
    recon->add_option("--sampler", sampler, "ancestral|d1|d2 (overrides the config key)");
    recon->add_option("--subject", subjects, "restrict to these subject ids, repeatable");
    render->add_option("--input", render_input, "TAUV volume to render")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(pfode::ErrorCategory::config);
    }

    try {
        if (!sampler.empty()) flags.sets.push_back("sampler=" + sampler);
        const pfode::RunConfig cfg = resolve(flags);
        const pfode::workflow::Stage st{cfg, flags.out, flags.jobs};
        if (phantom->parsed()) pfode::workflow::phantom_gen(st);
        else if (tmpl->parsed()) pfode::workflow::build_template_stage(st);
        else if (fit->parsed()) pfode::workflow::fit_denoiser_stage(st);
        else if (recon->parsed()) pfode::workflow::reconstruct_stage(st, subjects);
        else if (anomaly->parsed()) pfode::workflow::anomaly_stage(st);
        else if (score->parsed()) pfode::workflow::score_stage(st);
        else if (evaluate->parsed()) {
            const auto table = pfode::workflow::evaluate_stage(st);
            std::cout << pfode::regions_csv(table) << pfode::groups_csv(table);
        } else if (render->parsed()) {
            std::cout << pfode::workflow::render_stage(st, render_input).string() << "\n";
        }
        return 0;
    } catch (const pfode::Error& e) {
        std::cerr << "pfode: " << pfode::category_name(e.category()) << " error: " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "pfode: io error: " << e.what() << "\n";
        return static_cast<int>(pfode::ErrorCategory::io);
    } catch (const std::exception& e) {
        std::cerr << "pfode: error: " << e.what() << "\n";
        return 1;
    }
}
