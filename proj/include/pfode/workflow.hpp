#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pfode/config.hpp"
#include "pfode/io.hpp"
#include "pfode/pipeline.hpp"

// On-disk stages of the inference workflow. Each stage reads the outputs of the
// previous ones under a work directory and writes its own subdirectory:
//   cohort/     subjects.csv, <id>.{image,latent,edge,truth}.tauv, brain.tauv, shape.tauv, regions/
//   template/   template.tauv, shape.tauv
//   denoiser/   oracle.txt or denoiser.tauw
//   recon/      <id>.tauv
//   anomaly/    <id>.tauv, anomaly.csv
//   score/      reports.csv, classifier.txt
//   evaluate/   regions.csv, groups.csv
//   render/     <name>_z<slice>.pgm (+ .txt bounds)

namespace pfode::workflow {

namespace fs = std::filesystem;

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
    const char* env = std::getenv("PFODE_LOG");
    if (!env) return LogLevel::info;
    const std::string v = env;
    if (v == "error") return LogLevel::error;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
}

inline void log(LogLevel level, const std::string& msg) {
    static const LogLevel threshold = log_level();
    if (level > threshold) return;
    static const char* names[] = {"error", "info", "debug"};
    std::cerr << "[pfode " << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline const char* group_name(Group g) { return g == Group::healthy ? "healthy" : "anomalous"; }

inline Group parse_group(const std::string& s, const std::string& where) {
    if (s == "healthy") return Group::healthy;
    if (s == "anomalous") return Group::anomalous;
    throw IoError(where + ": unknown group '" + s + "'");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

/// Parses a CSV with the given exact header; returns data rows.
inline std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
    std::istringstream in(io::read_text(path));
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw IoError(path.string() + ": expected header '" + header + "'");
    const std::size_t width = split_csv_line(header).size();
    std::vector<std::vector<std::string>> rows;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != width)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) + " fields");
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline double parse_double_field(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw IoError(where + ": bad number '" + text + "'");
    }
}

inline std::string fmt(double v) { return detail::format_double(v); }

// ---------------------------------------------------------------------------
// Cohort persistence

inline const char* kSubjectsHeader = "id,group,split,magnitude,burden";

inline void save_cohort(const fs::path& dir, const Cohort& c) {
    std::string table = std::string(kSubjectsHeader) + "\n";
    for (std::size_t i = 0; i < c.subjects.size(); ++i) {
        const auto& s = c.subjects[i];
        io::write_tauv(dir / (s.id + ".image.tauv"), s.image);
        io::write_tauv(dir / (s.id + ".latent.tauv"), s.latent);
        io::write_tauv(dir / (s.id + ".edge.tauv"), s.edge.edge);
        io::write_tauv(dir / (s.id + ".truth.tauv"), s.truth.volume());
        table += s.id + "," + group_name(s.group) + "," + (c.train[i] ? "train" : "test") + "," + fmt(s.magnitude) + "," +
                 fmt(s.burden) + "\n";
    }
    io::write_tauv(dir / "brain.tauv", c.brain.volume());
    io::write_tauv(dir / "shape.tauv", c.shape.volume());
    std::string regions;
    for (const auto& r : c.regions) {
        io::write_tauv(dir / "regions" / (r.name + ".tauv"), r.mask.volume());
        regions += r.name + "\n";
    }
    io::atomic_write(dir / "regions" / "index.txt", regions);
    io::atomic_write(dir / "subjects.csv", table);
}

inline Cohort load_cohort(const fs::path& dir, const RunConfig& cfg) {
    Cohort c;
    c.spec = cfg.phantom_spec();
    const auto rows = read_csv(dir / "subjects.csv", kSubjectsHeader);
    for (const auto& row : rows) {
        const std::string where = (dir / "subjects.csv").string() + " [" + row[0] + "]";
        Subject s;
        s.id = row[0];
        s.group = parse_group(row[1], where);
        if (row[2] != "train" && row[2] != "test") throw IoError(where + ": split must be train|test");
        c.train.push_back(row[2] == "train" ? 1 : 0);
        s.magnitude = parse_double_field(row[3], where);
        s.burden = parse_double_field(row[4], where);
        s.image = io::read_tauv(dir / (s.id + ".image.tauv"));
        s.latent = io::read_tauv(dir / (s.id + ".latent.tauv"));
        s.edge = Condition{io::read_tauv(dir / (s.id + ".edge.tauv"))};
        s.truth = io::read_mask(dir / (s.id + ".truth.tauv"));
        c.subjects.push_back(std::move(s));
    }
    if (c.subjects.empty()) throw IoError((dir / "subjects.csv").string() + ": no subjects");
    c.brain = io::read_mask(dir / "brain.tauv");
    c.shape = io::read_mask(dir / "shape.tauv");
    std::istringstream names(io::read_text(dir / "regions" / "index.txt"));
    for (std::string name; std::getline(names, name);)
        if (!name.empty()) c.regions.push_back({name, io::read_mask(dir / "regions" / (name + ".tauv"))});
    return c;
}

// ---------------------------------------------------------------------------
// Stages

struct Stage {
    const RunConfig& cfg;
    fs::path work;
    std::size_t jobs = 1;

    [[nodiscard]] fs::path dir(const char* name) const { return work / name; }

    void begin(const char* name) const {
        fs::create_directories(dir(name));
        write_resolved_config(dir(name), cfg);
        log(LogLevel::info, std::string("stage ") + name + " -> " + dir(name).string());
    }
};

inline void phantom_gen(const Stage& st) {
    validate(st.cfg);
    st.begin("cohort");
    const Cohort c = make_cohort(st.cfg.phantom_spec(), st.cfg.n_healthy, st.cfg.n_anomalous, st.cfg.train_fraction);
    save_cohort(st.dir("cohort"), c);
    log(LogLevel::info, "wrote " + std::to_string(c.subjects.size()) + " subjects");
}

inline void build_template_stage(const Stage& st) {
    validate(st.cfg);
    const Cohort c = load_cohort(st.dir("cohort"), st.cfg);
    st.begin("template");
    const Volume tmpl = build_template(healthy_training_latents(c));
    io::write_tauv(st.dir("template") / "template.tauv", tmpl);
    io::write_tauv(st.dir("template") / "shape.tauv", c.shape.volume());
}

/// Guidance template and shape: explicit paths win over the template stage outputs.
inline std::pair<Volume, Mask> load_guidance_inputs(const Stage& st) {
    const fs::path tmpl = st.cfg.template_path.empty() ? st.dir("template") / "template.tauv" : fs::path(st.cfg.template_path);
    const fs::path shape = st.cfg.shape_path.empty() ? st.dir("template") / "shape.tauv" : fs::path(st.cfg.shape_path);
    return {io::read_tauv(tmpl), io::read_mask(shape)};
}

inline void fit_denoiser_stage(const Stage& st) {
    validate(st.cfg);
    const Cohort c = load_cohort(st.dir("cohort"), st.cfg);
    const auto healthy = healthy_training_latents(c);
    const Volume tmpl = io::read_tauv(st.dir("template") / "template.tauv");
    st.begin("denoiser");
    const auto s = st.cfg.schedule();
    if (st.cfg.denoiser == DenoiserKind::oracle) {
        const double tau2 = st.cfg.tau2 > 0.0 ? st.cfg.tau2 : pooled_variance(healthy, tmpl, c.shape);
        io::atomic_write(st.dir("denoiser") / "oracle.txt",
                         std::string("oracle = ") + (st.cfg.oracle == OracleKind::template_gaussian ? "template" : "cohort") +
                             "\ntau2 = " + fmt(tau2) + "\n");
        log(LogLevel::info, "oracle tau2 = " + fmt(tau2));
    } else {
        std::vector<Condition> conds;
        for (std::size_t i = 0; i < c.subjects.size(); ++i)
            if (c.train[i] && c.subjects[i].group == Group::healthy) conds.push_back(c.subjects[i].edge);
        LocalLinearFitOptions opt;
        opt.buckets = st.cfg.buckets;
        opt.lambda = st.cfg.lambda;
        opt.draws_per_volume = st.cfg.draws_per_volume;
        opt.seed = mix_seed(st.cfg.seed, 0xf17);
        write_tauw(st.dir("denoiser") / "denoiser.tauw", fit_local_linear(healthy, conds, s, opt));
    }
}

inline std::unique_ptr<Denoiser> load_denoiser(const Stage& st, const Cohort& c) {
    const auto s = st.cfg.schedule();
    if (st.cfg.denoiser == DenoiserKind::local_linear) {
        auto den = std::make_unique<LocalLinearDenoiser>(read_tauw(st.dir("denoiser") / "denoiser.tauw"));
        if (den->schedule().steps() != s.steps()) throw ConfigError("denoiser.tauw was fitted with a different T");
        return den;
    }
    const fs::path path = st.dir("denoiser") / "oracle.txt";
    double tau2 = 0.0;
    std::string kind;
    std::istringstream in(io::read_text(path));
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key == "tau2") tau2 = parse_double_field(value, path.string());
        else if (key == "oracle") kind = value;
    }
    if (!(tau2 > 0.0) || (kind != "template" && kind != "cohort")) throw IoError(path.string() + ": malformed oracle description");
    const Volume tmpl = io::read_tauv(st.dir("template") / "template.tauv");
    const auto healthy = healthy_training_latents(c);
    return std::make_unique<MixtureDenoiser>(
        healthy_oracle(healthy, tmpl, kind == "template" ? OracleKind::template_gaussian : OracleKind::cohort_mixture, tau2),
        s);
}

inline SamplerConfig sampler_config(const Stage& st) {
    SamplerConfig sc;
    sc.kind = st.cfg.sampler;
    sc.t_start = st.cfg.t_start;
    sc.seed = st.cfg.sampler_seed();
    if (st.cfg.nu > 0.0) {
        auto [tmpl, shape] = load_guidance_inputs(st);
        GuidanceSpec g;
        g.template_volume = std::move(tmpl);
        g.shape = std::move(shape);
        g.nu = st.cfg.nu;
        g.grad_mode = st.cfg.grad_mode;
        g.cfg_scale = st.cfg.cfg_scale;
        g.t_min = st.cfg.guidance_t_min;
        g.t_max = st.cfg.guidance_t_max;
        sc.guidance = std::move(g);
    }
    return sc;
}

/// Reconstructs the selected subjects (all when `only` is empty). The per-subject seed
/// depends on the subject's cohort position, so subsets reproduce full-run outputs.
inline void reconstruct_stage(const Stage& st, const std::vector<std::string>& only = {}) {
    validate(st.cfg);
    const Cohort c = load_cohort(st.dir("cohort"), st.cfg);
    const auto den = load_denoiser(st, c);
    const SamplerConfig sc = sampler_config(st);
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < c.subjects.size(); ++i)
        if (only.empty() || std::find(only.begin(), only.end(), c.subjects[i].id) != only.end()) picked.push_back(i);
    for (const auto& id : only)
        if (std::none_of(c.subjects.begin(), c.subjects.end(), [&](const Subject& s) { return s.id == id; }))
            throw ConfigError("unknown subject '" + id + "'");
    st.begin("recon");
    std::vector<Volume> out(picked.size());
    parallel_for(picked.size(), st.jobs, [&](std::size_t j) {
        const std::size_t i = picked[j];
        SamplerConfig local = sc;
        local.seed = mix_seed(sc.seed, i);
        out[j] = reconstruct(c.subjects[i].latent, local, *den, c.subjects[i].edge);
    });
    for (std::size_t j = 0; j < picked.size(); ++j) {
        io::write_tauv(st.dir("recon") / (c.subjects[picked[j]].id + ".tauv"), out[j]);
        log(LogLevel::debug, "reconstructed " + c.subjects[picked[j]].id);
    }
}

inline void anomaly_stage(const Stage& st) {
    validate(st.cfg);
    const Cohort c = load_cohort(st.dir("cohort"), st.cfg);
    st.begin("anomaly");
    std::string table = "id,group,map_mean\n";
    std::size_t n = 0;
    for (const auto& s : c.subjects) {
        const fs::path recon = st.dir("recon") / (s.id + ".tauv");
        if (!fs::exists(recon)) continue;
        const Volume map = anomaly_map(s.latent, io::read_tauv(recon), c.spec.codec);
        io::write_tauv(st.dir("anomaly") / (s.id + ".tauv"), map);
        table += s.id + "," + group_name(s.group) + "," + fmt(masked_mean(map, c.brain)) + "\n";
        ++n;
    }
    if (n == 0) throw IoError("no reconstructions found under " + st.dir("recon").string());
    io::atomic_write(st.dir("anomaly") / "anomaly.csv", table);
}

inline const char* kReportsHeader = "id,group,split,m_suvr,p_cls,score";

inline void score_stage(const Stage& st) {
    validate(st.cfg);
    const Cohort c = load_cohort(st.dir("cohort"), st.cfg);
    std::vector<Volume> maps;
    for (const auto& s : c.subjects) maps.push_back(io::read_tauv(st.dir("anomaly") / (s.id + ".tauv")));
    st.begin("score");
    const auto scored = score_cohort(c.subjects, std::move(maps), c.brain, c.train, st.cfg.classifier_options(), st.cfg.m_suvr);
    std::string table = std::string(kReportsHeader) + "\n";
    for (std::size_t i = 0; i < c.subjects.size(); ++i) {
        const auto& r = scored.reports[i];
        table += c.subjects[i].id + "," + group_name(c.subjects[i].group) + "," + (c.train[i] ? "train" : "test") + "," +
                 fmt(r.m_suvr) + "," + fmt(r.p_cls) + "," + fmt(r.score) + "\n";
    }
    io::atomic_write(st.dir("score") / "reports.csv", table);
    std::string model = "feature,mean,scale,weight\n";
    static const char* names[kFeatureCount] = {"map_mean", "map_max", "map_p95", "positive_fraction"};
    for (std::size_t j = 0; j < kFeatureCount; ++j)
        model += std::string(names[j]) + "," + fmt(scored.classifier.mean[j]) + "," + fmt(scored.classifier.scale[j]) + "," +
                 fmt(scored.classifier.weights[j]) + "\n";
    model += "bias,,," + fmt(scored.classifier.bias) + "\n";
    io::atomic_write(st.dir("score") / "classifier.txt", model);
}

/// Table-style correlations and the group comparison over held-out subjects.
inline EvaluationTable evaluate_stage(const Stage& st) {
    validate(st.cfg);
    const Cohort c = load_cohort(st.dir("cohort"), st.cfg);
    const auto rows = read_csv(st.dir("score") / "reports.csv", kReportsHeader);
    if (rows.size() != c.subjects.size()) throw IoError("reports.csv does not match the cohort");
    std::vector<Subject> held_subjects;
    std::vector<AnomalyReport> held_reports;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i][0] != c.subjects[i].id) throw IoError("reports.csv row order differs from subjects.csv");
        if (c.train[i]) continue;
        AnomalyReport r;
        const std::string where = "reports.csv [" + rows[i][0] + "]";
        r.m_suvr = parse_double_field(rows[i][3], where);
        r.p_cls = parse_double_field(rows[i][4], where);
        r.score = parse_double_field(rows[i][5], where);
        held_subjects.push_back(c.subjects[i]);
        held_reports.push_back(r);
    }
    st.begin("evaluate");
    const EvaluationTable table = evaluate_cohort(held_subjects, held_reports, c.regions);
    for (const auto& w : table.warnings) log(LogLevel::error, "warning: " + w);
    io::atomic_write(st.dir("evaluate") / "regions.csv", regions_csv(table));
    io::atomic_write(st.dir("evaluate") / "groups.csv", groups_csv(table));
    return table;
}

inline fs::path render_stage(const Stage& st, const fs::path& input) {
    const Volume v = io::read_tauv(input);
    const int slice = st.cfg.render_slice >= 0 ? st.cfg.render_slice : static_cast<int>(v.dims().nz / 2);
    st.begin("render");
    const fs::path out = st.dir("render") / (input.stem().string() + "_z" + std::to_string(slice) + ".pgm");
    io::write_pgm_slice(out, v, static_cast<std::size_t>(slice));
    return out;
}

/// The full workflow in order, as run by the demo.
inline EvaluationTable run_all(const Stage& st) {
    phantom_gen(st);
    build_template_stage(st);
    fit_denoiser_stage(st);
    reconstruct_stage(st);
    anomaly_stage(st);
    score_stage(st);
    return evaluate_stage(st);
}

} // namespace pfode::workflow
